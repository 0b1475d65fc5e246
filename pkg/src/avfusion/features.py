"""Feature sequences and the "AVF1" on-disk feature format.

An AVF1 file is: magic ``b"AVF1"``, then three 32-bit little-endian
unsigned integers (n_frames, dim, frame_rate_hz), then n_frames*dim
32-bit little-endian floats in row-major order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["FeatureSequence", "save_features", "load_features"]

_MAGIC = b"AVF1"
_HEADER = struct.Struct("<4sIII")


@dataclass
class FeatureSequence:
    """Per-utterance feature matrix of shape (n_frames, dim)."""

    frames: np.ndarray
    modality: str  # "audio" or "video"
    frame_rate: int

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1 or self.frames.shape[1] < 1:
            raise ValueError(f"frames must be a nonempty (T, d) matrix, got shape {self.frames.shape}")
        if self.modality not in ("audio", "video"):
            raise ValueError(f"modality must be 'audio' or 'video', got {self.modality!r}")
        if self.frame_rate < 1:
            raise ValueError(f"frame_rate must be positive, got {self.frame_rate}")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


def save_features(seq: FeatureSequence, path) -> None:
    n, d = seq.frames.shape
    payload = seq.frames.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, n, d, seq.frame_rate))
        fh.write(payload)


def load_features(path, modality: str) -> FeatureSequence:
    """Read an AVF1 file; the modality tag is supplied by the caller."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: too short to hold an AVF1 header")
    magic, n, d, rate = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
    need = _HEADER.size + 4 * n * d
    if len(raw) < need:
        raise ValueError(
            f"{path}: truncated payload, header declares {n}x{d} frames "
            f"({need} bytes) but file has {len(raw)}"
        )
    frames = np.frombuffer(raw, dtype="<f4", count=n * d, offset=_HEADER.size)
    return FeatureSequence(
        frames=frames.astype(np.float64).reshape(n, d),
        modality=modality,
        frame_rate=int(rate),
    )
