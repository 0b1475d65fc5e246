"""Per-modality input-gradient saliency of a trained network's class score.

For a sequence with true label c, the class score is differentiated with
respect to every input feature of every frame in one backward pass; the
absolute values form per-modality saliency maps.  Summing a map over
features and averaging over frames yields one scalar per modality per
sequence, and aggregating over an evaluation set measures how much the
network relies on each modality.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tape, Tensor, pick, softmax
from .dataset import Dataset
from .model import Model, forward_last_frame

__all__ = [
    "class_score",
    "saliency_maps",
    "modality_saliency",
    "SaliencyReport",
    "speaker_saliency",
    "format_report",
    "write_report",
]


def class_score(model: Model, seq_audio=None, seq_video=None, label: int = 0,
                mode: str = "logit") -> Tensor:
    """Scalar score of class ``label`` at the final frame.

    ``logit`` (default) is the pre-softmax output unit, which avoids the
    gradient damping the softmax saturation would introduce; ``probability``
    is the softmax output instead.  Dropout is always off.
    """
    if not 0 <= label < model.spec.n_classes:
        raise IndexError(f"class {label} out of range for "
                         f"{model.spec.n_classes} classes")
    if mode not in ("logit", "probability"):
        raise ValueError(f"mode must be 'logit' or 'probability', got {mode!r}")
    logits = forward_last_frame(model, seq_audio, seq_video, mode="eval")
    if mode == "logit":
        return pick(logits, label)
    return pick(softmax(logits), label)


def saliency_maps(model: Model, seq_audio=None, seq_video=None, label: int = 0,
                  mode: str = "logit"):
    """|d score / d input| for every frame and feature of each modality.

    Returns (audio_map, video_map); a modality the model does not consume
    maps to None.  Both maps of a fusion model come from a single backward
    pass from the class score.
    """
    spec = model.spec
    audio_frames = video_frames = None
    if spec.uses_audio:
        if seq_audio is None:
            raise ValueError("model requires an audio sequence")
        audio_frames = [Tensor(row) for row in np.asarray(
            seq_audio.frames if hasattr(seq_audio, "frames") else seq_audio)]
    if spec.uses_video:
        if seq_video is None:
            raise ValueError("model requires a video sequence")
        video_frames = [Tensor(row) for row in np.asarray(
            seq_video.frames if hasattr(seq_video, "frames") else seq_video)]

    with Tape() as tape:
        for frames in (audio_frames, video_frames):
            if frames is not None:
                for t in frames:
                    tape.watch(t)
        score = class_score(model, audio_frames, video_frames, label, mode)
    tape.backward(score)

    def collect(frames):
        if frames is None:
            return None
        return np.abs(np.stack([tape.grad(t) for t in frames]))

    return collect(audio_frames), collect(video_frames)


def modality_saliency(saliency_map: np.ndarray) -> float:
    """Sum over features, averaged over frames: (1/T) sum_t sum_i M[t][i]."""
    m = np.asarray(saliency_map)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ValueError(f"saliency map must be a nonempty (T, d) matrix, "
                         f"got shape {m.shape}")
    return float(m.sum() / m.shape[0])


@dataclass
class SaliencyReport:
    """Per-sequence saliencies plus mean and sample standard deviation."""

    entries: list[tuple[str, float, float]]  # (utt_id, audio, video)
    audio_mean: float
    audio_std: float
    video_mean: float
    video_std: float

    @property
    def count(self) -> int:
        return len(self.entries)


def speaker_saliency(model: Model, eval_set: Dataset,
                     mode: str = "logit") -> SaliencyReport:
    """Aggregate per-sequence modality saliencies over an evaluation set."""
    if model.spec.kind != "fusion":
        raise ValueError("per-modality saliency reports need a fusion model")
    if not eval_set.items:
        raise ValueError("evaluation set is empty")
    entries = []
    for item in eval_set.items:
        m_audio, m_video = saliency_maps(model, item.audio, item.video,
                                         item.label, mode)
        entries.append((item.utt_id,
                        modality_saliency(m_audio),
                        modality_saliency(m_video)))
    audio_vals = np.array([e[1] for e in entries])
    video_vals = np.array([e[2] for e in entries])

    def spread(v):
        return float(np.std(v, ddof=1)) if v.size > 1 else 0.0

    return SaliencyReport(
        entries=entries,
        audio_mean=float(audio_vals.mean()),
        audio_std=spread(audio_vals),
        video_mean=float(video_vals.mean()),
        video_std=spread(video_vals),
    )


def format_report(report: SaliencyReport) -> str:
    """One line per sequence (id, audio, video), then an aggregate line.

    Numbers are printed with 6 significant digits; the final line is
    "aggregate <audio mean> <audio std> <video mean> <video std>".
    """
    lines = [f"{utt} {a:.6g} {v:.6g}" for utt, a, v in report.entries]
    lines.append(f"aggregate {report.audio_mean:.6g} {report.audio_std:.6g} "
                 f"{report.video_mean:.6g} {report.video_std:.6g}")
    return "\n".join(lines) + "\n"


def write_report(path, report: SaliencyReport) -> None:
    Path(path).write_text(format_report(report))
