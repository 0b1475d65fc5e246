"""Video frontend: mouth-ROI ingestion, temporal upsampling, and PCA.

ROI files use the "AVU8" byte format: magic ``b"AVU8"``, three 32-bit
little-endian unsigned integers (n_frames, dim, frame_rate_hz), then
n_frames*dim unsigned bytes, one intensity per pixel, row-major within
each 80x40 frame.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import FeatureSequence

__all__ = [
    "ROI_DIM",
    "load_roi_sequence",
    "write_roi_sequence",
    "roi_from_frame_dir",
    "upsample_repeat",
    "PcaBasis",
    "pca_fit",
    "pca_transform",
    "save_basis",
    "load_basis",
]

ROI_DIM = 80 * 40

_MAGIC = b"AVU8"
_HEADER = struct.Struct("<4sIII")


def load_roi_sequence(path) -> FeatureSequence:
    """Read an AVU8 ROI file into [0, 1] float features (pixel / 255)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: too short to hold an AVU8 header")
    magic, n, d, rate = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
    if d != ROI_DIM:
        raise ValueError(f"{path}: frame dim {d}, expected {ROI_DIM} (80x40)")
    need = _HEADER.size + n * d
    if len(raw) < need:
        raise ValueError(
            f"{path}: truncated payload, header declares {n} frames "
            f"({need} bytes) but file has {len(raw)}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, count=n * d, offset=_HEADER.size)
    return FeatureSequence(
        frames=pixels.astype(np.float64).reshape(n, d) / 255.0,
        modality="video",
        frame_rate=int(rate),
    )


def write_roi_sequence(path, frames: np.ndarray, frame_rate: int = 25) -> None:
    """Write (T, 3200) uint8 pixel rows as an AVU8 file."""
    frames = np.ascontiguousarray(frames, dtype=np.uint8)
    if frames.ndim != 2 or frames.shape[1] != ROI_DIM:
        raise ValueError(f"expected (T, {ROI_DIM}) uint8 frames, got {frames.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, frames.shape[0], ROI_DIM, frame_rate))
        fh.write(frames.tobytes())


def roi_from_frame_dir(directory) -> np.ndarray:
    """Collect raw 80x40 8-bit grayscale frame files (sorted by name).

    Each file must be exactly 3200 bytes of headerless pixel data.
    """
    paths = sorted(p for p in Path(directory).iterdir() if p.is_file())
    if not paths:
        raise ValueError(f"{directory}: no frame files found")
    rows = []
    for p in paths:
        blob = p.read_bytes()
        if len(blob) != ROI_DIM:
            raise ValueError(f"{p}: {len(blob)} bytes, expected exactly {ROI_DIM}")
        rows.append(np.frombuffer(blob, dtype=np.uint8))
    return np.stack(rows)


def upsample_repeat(seq: FeatureSequence, factor: int = 4) -> FeatureSequence:
    """Repeat each frame ``factor`` times; values are preserved exactly."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"upsampling factor must be a positive integer, got {factor}")
    factor = int(factor)
    return FeatureSequence(
        frames=np.repeat(seq.frames, factor, axis=0),
        modality=seq.modality,
        frame_rate=seq.frame_rate * factor,
    )


@dataclass
class PcaBasis:
    """Mean vector plus top-k orthonormal components (rows, descending variance)."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]


def pca_fit(train_frames: np.ndarray, k: int) -> PcaBasis:
    """Covariance eigendecomposition of training frames, top-k components.

    Sign convention: each component's largest-magnitude entry is positive,
    so repeated fits of the same data are bit-identical.
    """
    x = np.asarray(train_frames, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"train_frames must be 2-D, got shape {x.shape}")
    n, d = x.shape
    if k < 1 or k > min(n, d):
        raise ValueError(f"k must be in [1, min(N, dim)] = [1, {min(n, d)}], got {k}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = (centered.T @ centered) / max(n - 1, 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1][:k]
    components = eigenvectors[:, order].T.copy()
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return PcaBasis(mean=mean, components=components,
                    explained_variance=eigenvalues[order].copy())


def pca_transform(basis: PcaBasis, seq: FeatureSequence) -> FeatureSequence:
    """Project each frame onto the basis: components @ (frame - mean)."""
    if seq.dim != basis.dim:
        raise ValueError(f"feature dim {seq.dim} does not match basis dim {basis.dim}")
    return FeatureSequence(
        frames=(seq.frames - basis.mean) @ basis.components.T,
        modality=seq.modality,
        frame_rate=seq.frame_rate,
    )


_BASIS_MAGIC = b"AVPB"
_BASIS_HEADER = struct.Struct("<4sII")


def save_basis(basis: PcaBasis, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_BASIS_HEADER.pack(_BASIS_MAGIC, basis.k, basis.dim))
        fh.write(basis.mean.astype("<f8").tobytes())
        fh.write(basis.components.astype("<f8").tobytes())
        fh.write(basis.explained_variance.astype("<f8").tobytes())


def load_basis(path) -> PcaBasis:
    raw = Path(path).read_bytes()
    if len(raw) < _BASIS_HEADER.size:
        raise ValueError(f"{path}: too short to hold a basis header")
    magic, k, d = _BASIS_HEADER.unpack_from(raw)
    if magic != _BASIS_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {_BASIS_MAGIC!r}")
    need = _BASIS_HEADER.size + 8 * (d + k * d + k)
    if len(raw) != need:
        raise ValueError(f"{path}: expected {need} bytes for k={k}, dim={d}, "
                         f"got {len(raw)}")
    body = np.frombuffer(raw, dtype="<f8", offset=_BASIS_HEADER.size)
    mean = body[:d].astype(np.float64)
    comps = body[d:d + k * d].astype(np.float64).reshape(k, d)
    var = body[d + k * d:].astype(np.float64)
    return PcaBasis(mean=mean, components=comps, explained_variance=var)
