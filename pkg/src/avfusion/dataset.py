"""Labeled utterance collections, per-word splitting, and manifest files.

A manifest is a tab-separated text file with one utterance per line:
utterance-id, speaker-id, label-index, audio feature path (or "-"),
video feature path (or "-").  Paths are resolved relative to the
manifest's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .features import FeatureSequence, load_features

__all__ = ["Item", "Dataset", "SplitSpec", "split_per_word",
           "load_manifest", "save_manifest", "strip_modality"]


@dataclass
class Item:
    utt_id: str
    speaker_id: str
    label: int
    audio: FeatureSequence | None = None
    video: FeatureSequence | None = None


@dataclass
class Dataset:
    items: list[Item]
    n_classes: int

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class SplitSpec:
    """Per-word validation/test counts plus the shuffle seed."""

    val_per_word: int = 5
    test_per_word: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.val_per_word < 0 or self.test_per_word < 0:
            raise ValueError("split counts must be nonnegative")


def split_per_word(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded per-word partition into train/validation/test.

    Each word label contributes exactly ``val_per_word`` items to validation
    and ``test_per_word`` to test; the remainder trains.  The partition is
    disjoint, exhaustive, and a pure function of (dataset order, seed).
    """
    by_label: dict[int, list[int]] = {}
    for i, item in enumerate(dataset.items):
        by_label.setdefault(item.label, []).append(i)

    hold = spec.val_per_word + spec.test_per_word
    rng = np.random.default_rng(spec.seed)
    train_idx, val_idx, test_idx = [], [], []
    for label in sorted(by_label):
        idxs = by_label[label]
        if len(idxs) < hold:
            raise ValueError(
                f"word {label} has only {len(idxs)} samples, "
                f"needs at least {hold} for the split"
            )
        perm = rng.permutation(len(idxs))
        shuffled = [idxs[j] for j in perm]
        val_idx += shuffled[:spec.val_per_word]
        test_idx += shuffled[spec.val_per_word:hold]
        train_idx += shuffled[hold:]

    def subset(indices):
        return Dataset(items=[dataset.items[i] for i in sorted(indices)],
                       n_classes=dataset.n_classes)

    return subset(train_idx), subset(val_idx), subset(test_idx)


def load_manifest(path, n_classes: int | None = None) -> Dataset:
    """Read a manifest and eagerly load every referenced feature file."""
    path = Path(path)
    base = path.parent
    items = []
    max_label = -1
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.rstrip("\n").split("\t")
        if len(fields) != 5:
            raise ValueError(f"{path}:{lineno}: expected 5 tab-separated fields, "
                             f"got {len(fields)}")
        utt, spk, label_s, a_path, v_path = fields
        try:
            label = int(label_s)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad label {label_s!r}") from None
        if label < 0:
            raise ValueError(f"{path}:{lineno}: negative label {label}")
        max_label = max(max_label, label)
        audio = load_features(base / a_path, "audio") if a_path != "-" else None
        video = load_features(base / v_path, "video") if v_path != "-" else None
        items.append(Item(utt_id=utt, speaker_id=spk, label=label,
                          audio=audio, video=video))
    if not items:
        raise ValueError(f"{path}: empty manifest")
    if n_classes is None:
        n_classes = max_label + 1
    elif max_label >= n_classes:
        raise ValueError(f"{path}: label {max_label} exceeds n_classes={n_classes}")
    return Dataset(items=items, n_classes=n_classes)


def save_manifest(path, rows) -> None:
    """Write manifest rows of (utt_id, speaker_id, label, audio_path, video_path).

    Feature paths may be None, written as "-"; they should be relative to
    the manifest's directory.
    """
    lines = []
    for utt, spk, label, a_path, v_path in rows:
        lines.append("\t".join([
            str(utt), str(spk), str(int(label)),
            "-" if a_path is None else str(a_path),
            "-" if v_path is None else str(v_path),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def strip_modality(dataset: Dataset, drop: str) -> Dataset:
    """Copy of the dataset with one modality removed ('audio' or 'video')."""
    if drop not in ("audio", "video"):
        raise ValueError(f"drop must be 'audio' or 'video', got {drop!r}")
    items = [replace(item, **{drop: None}) for item in dataset.items]
    return Dataset(items=items, n_classes=dataset.n_classes)
