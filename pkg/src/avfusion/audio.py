"""Audio frontend: waveform ingestion, log-Mel features, SNR noise mixing.

Waveform files are canonical mono PCM WAV: a 44-byte header followed by
16-bit signed little-endian samples, normalized to [-1, 1) on read by
dividing by 32768.  Anything else (multi-channel, other encodings,
nonstandard chunk layout) is rejected with a descriptive error.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .features import FeatureSequence

__all__ = [
    "Waveform",
    "read_wav",
    "write_wav",
    "frame_signal",
    "mel_filterbank",
    "log_mel",
    "extract_logmel",
    "mix_at_snr",
    "measured_snr",
]


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("waveform must be a nonempty 1-D sample array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate < 1:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return self.samples.size


_WAV_HEADER = struct.Struct("<4sI4s4sIHHIIHH4sI")


def read_wav(path) -> Waveform:
    """Read a canonical 44-byte-header mono 16-bit PCM WAV file."""
    raw = open(path, "rb").read()
    if len(raw) < _WAV_HEADER.size:
        raise ValueError(f"{path}: too short to hold a WAV header")
    (riff, _, wave, fmt, fmt_size, audio_format, channels, rate,
     _byte_rate, _block, bits, data_tag, data_size) = _WAV_HEADER.unpack_from(raw)
    if riff != b"RIFF" or wave != b"WAVE" or fmt != b"fmt ":
        raise ValueError(f"{path}: not a RIFF/WAVE file")
    if fmt_size != 16 or data_tag != b"data":
        raise ValueError(f"{path}: nonstandard chunk layout, expected the "
                         "canonical 44-byte header")
    if audio_format != 1:
        raise ValueError(f"{path}: unsupported encoding {audio_format}, "
                         "only 16-bit PCM is accepted")
    if channels != 1:
        raise ValueError(f"{path}: {channels} channels, only mono is accepted")
    if bits != 16:
        raise ValueError(f"{path}: {bits}-bit samples, only 16-bit is accepted")
    if len(raw) < _WAV_HEADER.size + data_size:
        raise ValueError(f"{path}: truncated data chunk")
    pcm = np.frombuffer(raw, dtype="<i2", count=data_size // 2,
                        offset=_WAV_HEADER.size)
    return Waveform(samples=pcm.astype(np.float64) / 32768.0, sample_rate=int(rate))


def write_wav(path, w: Waveform) -> None:
    """Quantize to 16-bit PCM (round, clip) and write a canonical WAV file."""
    pcm = np.clip(np.rint(w.samples * 32768.0), -32768, 32767).astype("<i2")
    data = pcm.tobytes()
    head = _WAV_HEADER.pack(
        b"RIFF", 36 + len(data), b"WAVE", b"fmt ", 16, 1, 1,
        w.sample_rate, w.sample_rate * 2, 2, 16, b"data", len(data),
    )
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(data)


def frame_signal(w: Waveform, win_ms: float = 20.0, shift_ms: float = 10.0) -> np.ndarray:
    """Slice into overlapping windows; the trailing remainder is discarded.

    Returns an (n_frames, window_samples) matrix with
    n_frames = floor((N - W) / S) + 1.
    """
    win = int(round(win_ms * w.sample_rate / 1000.0))
    shift = int(round(shift_ms * w.sample_rate / 1000.0))
    if win < 1 or shift < 1:
        raise ValueError(f"window {win_ms} ms / shift {shift_ms} ms collapse to "
                         f"zero samples at {w.sample_rate} Hz")
    n = w.samples.size
    if n < win:
        raise ValueError(f"signal of {n} samples is shorter than one "
                         f"{win}-sample window")
    windows = np.lib.stride_tricks.sliding_window_view(w.samples, win)[::shift]
    return np.array(windows)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_bands: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters equally spaced on the Mel scale over 0..Nyquist.

    Returns an (n_bands, n_fft//2 + 1) weight matrix acting on the
    one-sided power spectrum.
    """
    n_bins = n_fft // 2 + 1
    if n_bins < n_bands + 2:
        raise ValueError(
            f"sample rate / FFT size too small: {n_bins} spectral bins cannot "
            f"hold {n_bands} distinct filters"
        )
    edges_mel = np.linspace(_hz_to_mel(0.0), _hz_to_mel(sample_rate / 2.0),
                            n_bands + 2)
    edges_hz = _mel_to_hz(edges_mel)
    bin_hz = np.arange(n_bins) * sample_rate / n_fft
    weights = np.zeros((n_bands, n_bins))
    for b in range(n_bands):
        lo, center, hi = edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        weights[b] = np.maximum(0.0, np.minimum(rising, falling))
    return weights


def mel_band_centers(n_bands: int, sample_rate: int) -> np.ndarray:
    """Center frequencies (Hz) of the triangular filters."""
    edges_mel = np.linspace(_hz_to_mel(0.0), _hz_to_mel(sample_rate / 2.0),
                            n_bands + 2)
    return _mel_to_hz(edges_mel[1:-1])


def log_mel(frames: np.ndarray, sample_rate: int, n_bands: int = 27,
            frame_rate: int = 100, energy_floor: float = 1e-10) -> FeatureSequence:
    """Log Mel-band energies of Hamming-windowed frames.

    Each frame is windowed, zero-padded to the next power of two, turned
    into a one-sided power spectrum, pooled by the Mel filterbank, and the
    natural log of max(energy, energy_floor) is taken.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValueError("frames must be a nonempty (n_frames, window) matrix")
    win = frames.shape[1]
    n_fft = 1
    while n_fft < win:
        n_fft *= 2
    fb = mel_filterbank(n_bands, n_fft, sample_rate)
    spectrum = np.abs(np.fft.rfft(frames * np.hamming(win), n=n_fft)) ** 2
    energies = spectrum @ fb.T
    feats = np.log(np.maximum(energies, energy_floor))
    return FeatureSequence(frames=feats, modality="audio", frame_rate=frame_rate)


def extract_logmel(w: Waveform, win_ms: float = 20.0, shift_ms: float = 10.0,
                   n_bands: int = 27) -> FeatureSequence:
    """Waveform to log-Mel feature sequence (default 20 ms / 10 ms framing)."""
    frames = frame_signal(w, win_ms, shift_ms)
    return log_mel(frames, w.sample_rate, n_bands,
                   frame_rate=int(round(1000.0 / shift_ms)))


def _power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x)))


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db: float,
               rng: np.random.Generator | None = None) -> Waveform:
    """Superimpose noise on clean speech at an exact signal-to-noise ratio.

    The noise is tiled cyclically (or a contiguous stretch is taken when it
    is long enough) to the clean signal's length; with an rng the stretch
    starts at a random offset, otherwise at 0.  The gain solves
    P_clean / (g^2 P_noise) = 10^(snr_db/10) with powers measured over the
    full mixed extent, so ``measured_snr`` recovers ``snr_db`` exactly.
    """
    if clean.sample_rate != noise.sample_rate:
        raise ValueError(f"sample rates differ: {clean.sample_rate} vs "
                         f"{noise.sample_rate}")
    n = len(clean)
    p_clean = _power(clean.samples)
    if p_clean == 0.0:
        raise ValueError("clean signal has zero power")
    if rng is None:
        start = 0
    elif len(noise) >= n:
        start = int(rng.integers(0, len(noise) - n + 1))
    else:
        start = int(rng.integers(0, len(noise)))
    segment = np.take(noise.samples, np.arange(start, start + n), mode="wrap")
    p_noise = _power(segment)
    if p_noise == 0.0:
        raise ValueError("noise segment has zero power")
    gain = math.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    return Waveform(samples=clean.samples + gain * segment,
                    sample_rate=clean.sample_rate)


def measured_snr(clean: Waveform, noisy: Waveform) -> float:
    """10 log10(P_clean / P_residual); +inf when the residual is zero."""
    if len(clean) != len(noisy):
        raise ValueError(f"length mismatch: {len(clean)} vs {len(noisy)}")
    residual = noisy.samples - clean.samples
    p_res = _power(residual)
    if p_res == 0.0:
        return math.inf
    return 10.0 * math.log10(_power(clean.samples) / p_res)
