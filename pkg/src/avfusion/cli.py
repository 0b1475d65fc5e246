"""Command line entry point.

Subcommands cover the whole pipeline: ``prep-audio`` (WAV to log-Mel
AVF1), ``mix-noise`` (SNR-exact babble superposition), ``prep-video``
(ROI frames to AVF1, with 4x upsampling), ``pca`` (fit on the training
split, rewrite video features), ``synth`` (synthetic datasets), ``train``,
``eval``, ``saliency``, and ``ttest``.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
Diagnostics go to stderr; results go to stdout or to files.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .audio import extract_logmel, mix_at_snr, read_wav, write_wav
from .dataset import SplitSpec, load_manifest, save_manifest, split_per_word, strip_modality
from .features import FeatureSequence, save_features
from .model import build_fusion, build_single, load_checkpoint, save_checkpoint
from .saliency import format_report, speaker_saliency
from .stats import paired_t_one_tailed, read_pairs
from .synthdata import SynthConfig, generate, write_dataset
from .training import TrainConfig, evaluate, save_history, train
from .video import (load_roi_sequence, pca_fit, pca_transform,
                    roi_from_frame_dir, save_basis, upsample_repeat,
                    write_roi_sequence)

__all__ = ["RunConfig", "parse_config", "parse_arch", "main"]


@dataclass
class RunConfig:
    """Typed experiment configuration with the standard defaults filled in."""

    arch: str | None = None
    width: int = 128
    classes: int = 51
    modality: str = "fusion"     # audio | video | fusion
    lr: float = 0.001
    momentum: float = 0.5
    batch: int = 64
    dropout: float = 0.5
    epochs: int = 50
    patience: int = 20
    seed: int = 0
    manifest: str | None = None
    val_per_word: int = 5
    test_per_word: int = 5


_CONFIG_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, raw: str, lineno: int):
    kind = _CONFIG_TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ValueError(
            f"line {lineno}: bad value {raw!r} for key {key!r}"
        ) from None


def parse_config(text: str) -> RunConfig:
    """Parse "key = value" lines; '#' starts a comment, unknown keys fail."""
    cfg = RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _CONFIG_TYPES:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _parse_value(key, raw, lineno))
    if cfg.modality not in ("audio", "video", "fusion"):
        raise ValueError(f"modality must be audio, video or fusion, "
                         f"got {cfg.modality!r}")
    return cfg


def format_config(cfg: RunConfig) -> str:
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(RunConfig)]
    return "\n".join(lines) + "\n"


def parse_arch(arch: str):
    """"single:N" -> ("single", n); "X+Y" -> ("fusion", x, y)."""
    if arch.startswith("single:"):
        try:
            n = int(arch.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad architecture {arch!r}") from None
        if n < 1:
            raise ValueError(f"architecture {arch!r} needs at least one layer")
        return ("single", n)
    if "+" in arch:
        left, _, right = arch.partition("+")
        try:
            x, y = int(left), int(right)
        except ValueError:
            raise ValueError(f"bad architecture {arch!r}") from None
        if x < 0 or y < 1:
            raise ValueError(f"architecture {arch!r} needs x >= 0 and y >= 1")
        return ("fusion", x, y)
    raise ValueError(f"bad architecture {arch!r}: use 'X+Y' or 'single:N'")


_SNR_NAMES = {"clean": None, "5dB": 5.0, "0dB": 0.0, "-5dB": -5.0}


def _parse_snr(raw: str):
    if raw in _SNR_NAMES:
        return _SNR_NAMES[raw]
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"bad SNR {raw!r}: use clean, 5dB, 0dB, -5dB or a "
                         "number in dB") from None


def _load_run_config(path: str) -> RunConfig:
    return parse_config(Path(path).read_text())


def _split_sets(cfg: RunConfig):
    dataset = load_manifest(cfg.manifest, n_classes=cfg.classes)
    spec = SplitSpec(val_per_word=cfg.val_per_word,
                     test_per_word=cfg.test_per_word, seed=cfg.seed)
    return split_per_word(dataset, spec)


def _restrict_modality(dataset, modality: str):
    if modality == "audio":
        return strip_modality(dataset, "video")
    if modality == "video":
        return strip_modality(dataset, "audio")
    return dataset


def _feature_dims(dataset, modality: str):
    first = dataset.items[0]
    dim_a = first.audio.dim if first.audio is not None else 0
    dim_v = first.video.dim if first.video is not None else 0
    if modality in ("audio", "fusion") and dim_a == 0:
        raise ValueError("manifest provides no audio features")
    if modality in ("video", "fusion") and dim_v == 0:
        raise ValueError("manifest provides no video features")
    return dim_a, dim_v


def _build_from_config(cfg: RunConfig, dims):
    parsed = parse_arch(cfg.arch)
    rng = np.random.default_rng([cfg.seed, 2])
    if parsed[0] == "single":
        if cfg.modality == "fusion":
            raise ValueError("a 'single:N' architecture needs modality = "
                             "audio or video")
        in_dim = dims[0] if cfg.modality == "audio" else dims[1]
        return build_single(parsed[1], cfg.width, in_dim, cfg.classes, rng,
                            modality=cfg.modality)
    if cfg.modality != "fusion":
        raise ValueError("an 'X+Y' architecture needs modality = fusion")
    return build_fusion(parsed[1], parsed[2], cfg.width, dims, cfg.classes, rng)


def _cmd_prep_audio(args) -> int:
    wav = read_wav(args.input)
    feats = extract_logmel(wav, win_ms=args.win_ms, shift_ms=args.shift_ms,
                           n_bands=args.bands)
    save_features(feats, args.output)
    print(f"{args.output} {feats.n_frames} frames x {feats.dim} bands "
          f"at {feats.frame_rate} Hz")
    return 0


def _cmd_mix_noise(args) -> int:
    snr = _parse_snr(args.snr)
    clean = read_wav(args.clean)
    if snr is None:
        write_wav(args.output, clean)
        print(f"{args.output} clean copy, {len(clean)} samples")
        return 0
    noise = read_wav(args.noise)
    rng = np.random.default_rng(args.seed) if args.seed is not None else None
    mixed = mix_at_snr(clean, noise, snr, rng=rng)
    write_wav(args.output, mixed)
    print(f"{args.output} mixed at {snr} dB, {len(mixed)} samples")
    return 0


def _cmd_prep_video(args) -> int:
    src = Path(args.input)
    if args.output.endswith(".avu8"):
        if not src.is_dir():
            raise ValueError("packing to .avu8 needs a directory of raw frames")
        frames = roi_from_frame_dir(src)
        write_roi_sequence(args.output, frames, frame_rate=args.fps)
        print(f"{args.output} {frames.shape[0]} ROI frames packed")
        return 0
    if src.is_dir():
        frames = roi_from_frame_dir(src)
        seq = FeatureSequence(frames=frames.astype(np.float64) / 255.0,
                              modality="video", frame_rate=args.fps)
    else:
        seq = load_roi_sequence(src)
    if args.factor > 1:
        seq = upsample_repeat(seq, args.factor)
    save_features(seq, args.output)
    print(f"{args.output} {seq.n_frames} frames x {seq.dim} pixels "
          f"at {seq.frame_rate} Hz")
    return 0


def _cmd_pca(args) -> int:
    cfg = _load_run_config(args.config)
    if cfg.manifest is None:
        raise ValueError("config is missing 'manifest'")
    train_set, _, _ = _split_sets(cfg)
    frames = [item.video.frames for item in train_set.items
              if item.video is not None]
    if not frames:
        raise ValueError("manifest provides no video features to reduce")
    basis = pca_fit(np.vstack(frames), args.k)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_basis(basis, out / "pca_basis.avpb")

    dataset = load_manifest(cfg.manifest, n_classes=cfg.classes)
    rows = []
    for item in dataset.items:
        v_name = None
        if item.video is not None:
            v_name = f"{item.utt_id}.v{args.k}.avf1"
            save_features(pca_transform(basis, item.video), out / v_name)
        a_name = None
        if item.audio is not None:
            a_name = f"{item.utt_id}.a.avf1"
            save_features(item.audio, out / a_name)
        rows.append((item.utt_id, item.speaker_id, item.label, a_name, v_name))
    save_manifest(out / "manifest.tsv", rows)
    print(f"{out / 'manifest.tsv'} k={args.k} "
          f"explained={basis.explained_variance.sum():.6g}")
    return 0


def _cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_classes=args.classes,
        samples_per_class=args.samples,
        len_min=args.len_min,
        len_max=args.len_max,
        dim_audio=args.dim_audio,
        dim_video=args.dim_video,
        sigma_audio=args.sigma_audio,
        sigma_video=args.sigma_video,
        seed=args.seed,
    )
    manifest = write_dataset(generate(cfg), args.out_dir)
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in fields(SynthConfig)]
    (Path(args.out_dir) / "synth_config.txt").write_text("\n".join(lines) + "\n")
    print(f"{manifest} {cfg.n_classes * cfg.samples_per_class} utterances")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_run_config(args.config)
    if cfg.manifest is None:
        raise ValueError("config is missing 'manifest'")
    if cfg.arch is None:
        raise ValueError("config is missing 'arch'")
    train_full, val_set, _ = _split_sets(cfg)
    train_set = _restrict_modality(train_full, cfg.modality)
    val_used = _restrict_modality(val_set, cfg.modality)
    dims = _feature_dims(train_set, cfg.modality)
    model = _build_from_config(cfg, dims)
    tcfg = TrainConfig(learn_rate=cfg.lr, momentum=cfg.momentum,
                       batch_size=cfg.batch, dropout_p=cfg.dropout,
                       max_epochs=cfg.epochs, patience=cfg.patience,
                       seed=cfg.seed)
    best, history = train(model, train_set, val_used, tcfg)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(format_config(cfg))
    save_checkpoint(best, out / "checkpoint.avnn")
    save_history(out / "history.txt", history)
    best_epoch = max(range(len(history)), key=lambda i: history[i][1]) if history else -1
    best_acc = history[best_epoch][1] if history else 0.0
    result = (f"best_val_accuracy {best_acc!r} best_epoch {best_epoch} "
              f"epochs_run {len(history)}\n")
    (out / "result.txt").write_text(result)
    print(result, end="")
    return 0


def _pick_split(cfg: RunConfig, which: str):
    tr, va, te = _split_sets(cfg)
    if which == "train":
        return tr
    if which == "val":
        return va
    if which == "test":
        return te
    return load_manifest(cfg.manifest, n_classes=cfg.classes)


def _cmd_eval(args) -> int:
    cfg = _load_run_config(args.config)
    if cfg.manifest is None:
        raise ValueError("config is missing 'manifest'")
    model = load_checkpoint(args.checkpoint)
    subset = _pick_split(cfg, args.split)
    modality = ("fusion" if model.spec.kind == "fusion"
                else ("audio" if model.spec.uses_audio else "video"))
    subset = _restrict_modality(subset, modality)
    acc = evaluate(model, subset)
    print(f"accuracy {acc!r} n {len(subset.items)}")
    return 0


def _cmd_saliency(args) -> int:
    cfg = _load_run_config(args.config)
    if cfg.manifest is None:
        raise ValueError("config is missing 'manifest'")
    model = load_checkpoint(args.checkpoint)
    subset = _pick_split(cfg, args.split)
    report = speaker_saliency(model, subset, mode=args.mode)
    text = format_report(report)
    if args.out:
        Path(args.out).write_text(text)
        print(f"{args.out} {report.count} sequences")
    else:
        print(text, end="")
    return 0


def _cmd_ttest(args) -> int:
    a, b = read_pairs(args.pairs)
    result = paired_t_one_tailed(a, b, alpha=args.alpha,
                                 alternative=args.alternative)
    verdict = "significant" if result.significant else "not significant"
    print(f"t {result.t:.6g} df {result.df} p {result.p:.6g} {verdict}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avfusion",
        description="audiovisual fusion pipeline: features, training, "
                    "saliency, significance", )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep-audio", help="WAV to log-Mel AVF1 features")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--win-ms", type=float, default=20.0)
    p.add_argument("--shift-ms", type=float, default=10.0)
    p.add_argument("--bands", type=int, default=27)
    p.set_defaults(func=_cmd_prep_audio)

    p = sub.add_parser("mix-noise", help="superimpose noise at an exact SNR")
    p.add_argument("clean")
    p.add_argument("noise")
    p.add_argument("output")
    p.add_argument("--snr", required=True,
                   help="clean, 5dB, 0dB, -5dB, or a number in dB")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for the noise segment offset (default: offset 0)")
    p.set_defaults(func=_cmd_mix_noise)

    p = sub.add_parser("prep-video",
                       help="ROI frames (dir or .avu8) to AVF1 features, "
                            "or pack a dir to .avu8")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--factor", type=int, default=4,
                   help="temporal upsampling factor (default 4)")
    p.add_argument("--fps", type=int, default=25,
                   help="source frame rate (default 25)")
    p.set_defaults(func=_cmd_prep_video)

    p = sub.add_parser("pca", help="fit PCA on the training split and rewrite "
                                   "video features")
    p.add_argument("--config", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_pca)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--classes", type=int, default=51)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--len-min", type=int, default=8)
    p.add_argument("--len-max", type=int, default=12)
    p.add_argument("--dim-audio", type=int, default=27)
    p.add_argument("--dim-video", type=int, default=32)
    p.add_argument("--sigma-audio", type=float, default=0.0)
    p.add_argument("--sigma-video", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a network from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a split")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "val", "test", "all"),
                   default="test")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("saliency", help="per-modality saliency report")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "val", "test", "all"),
                   default="test")
    p.add_argument("--mode", choices=("logit", "probability"), default="logit")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_saliency)

    p = sub.add_parser("ttest", help="paired one-tailed t-test on column pairs")
    p.add_argument("pairs")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--alternative", choices=("greater", "less"),
                   default="greater")
    p.set_defaults(func=_cmd_ttest)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except Exception as exc:  # runtime failures exit 1 with a diagnostic
        print(f"error: {exc}", file=sys.stderr)
        return 1
