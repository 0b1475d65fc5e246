"""Network builders, whole-sequence forward evaluation, and checkpoints.

Two topologies are supported:

* single-modality: (n-1) dense+dropout layers, one LSTM layer, linear output;
* fusion "x+y": x dense+dropout layers per modality, feature concatenation,
  (y-1) joint dense+dropout layers, one shared LSTM, linear output.

"0+y" fusion is early feature fusion and computes exactly the same function
as a single-modality network on the concatenated features.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, concat_features
from .features import FeatureSequence
from .layers import (
    DenseParams,
    LstmParams,
    dense_linear,
    dense_tanh,
    dropout,
    init_dense,
    init_lstm,
    lstm_step,
    zero_state,
)

__all__ = [
    "ArchSpec",
    "Model",
    "build_single",
    "build_fusion",
    "forward_last_frame",
    "predict",
    "parameters",
    "clone_model",
    "save_checkpoint",
    "load_checkpoint",
]

_CKPT_MAGIC = b"AVNN"
_CKPT_VERSION = 1
_KIND_CODE = {"single": 0, "fusion": 1}
_KIND_NAME = {v: k for k, v in _KIND_CODE.items()}


@dataclass(frozen=True)
class ArchSpec:
    """Declarative topology; exactly one in_dim is nonzero for kind='single'."""

    kind: str
    n_separate: int
    n_joint: int
    width: int
    in_dim_audio: int
    in_dim_video: int
    n_classes: int

    def __post_init__(self):
        if self.kind not in _KIND_CODE:
            raise ValueError(f"kind must be 'single' or 'fusion', got {self.kind!r}")
        if self.n_joint < 1:
            raise ValueError(f"need at least one joint layer, got {self.n_joint}")
        if self.n_separate < 0:
            raise ValueError(f"n_separate must be >= 0, got {self.n_separate}")
        if self.width < 1 or self.n_classes < 1:
            raise ValueError("width and n_classes must be positive")
        if self.kind == "single":
            if self.n_separate != 0:
                raise ValueError("single-modality networks have no separate layers")
            if (self.in_dim_audio > 0) == (self.in_dim_video > 0):
                raise ValueError("single-modality spec must set exactly one input dim")
        else:
            if self.in_dim_audio < 1 or self.in_dim_video < 1:
                raise ValueError("fusion spec needs both input dims")

    @property
    def uses_audio(self) -> bool:
        return self.in_dim_audio > 0

    @property
    def uses_video(self) -> bool:
        return self.in_dim_video > 0

    @property
    def merged_dim(self) -> int:
        """Input width of the joint network."""
        if self.kind == "single":
            return self.in_dim_audio + self.in_dim_video
        if self.n_separate == 0:
            return self.in_dim_audio + self.in_dim_video
        return 2 * self.width


@dataclass
class Model:
    spec: ArchSpec
    audio_branch: list[DenseParams] = field(default_factory=list)
    video_branch: list[DenseParams] = field(default_factory=list)
    joint_dense: list[DenseParams] = field(default_factory=list)
    lstm: LstmParams = None
    output: DenseParams = None


@dataclass
class ParamRef:
    """Named handle on one parameter tensor that supports reassignment."""

    name: str
    owner: object
    attr: str

    @property
    def value(self) -> Tensor:
        return getattr(self.owner, self.attr)

    def assign(self, t: Tensor) -> None:
        setattr(self.owner, self.attr, t)


def parameters(model: Model) -> list[ParamRef]:
    """All parameter tensors in the fixed checkpoint order.

    Order: audio branch, video branch, joint dense (w then b per layer),
    LSTM gates i, f, o, candidate (w, u, b each), output layer.
    """
    refs = []
    for branch, tag in ((model.audio_branch, "audio"),
                        (model.video_branch, "video"),
                        (model.joint_dense, "joint")):
        for i, layer in enumerate(branch):
            refs.append(ParamRef(f"{tag}{i}.w", layer, "w"))
            refs.append(ParamRef(f"{tag}{i}.b", layer, "b"))
    for gate in ("i", "f", "o", "c"):
        for part in ("w", "u", "b"):
            refs.append(ParamRef(f"lstm.{part}_{gate}", model.lstm, f"{part}_{gate}"))
    refs.append(ParamRef("output.w", model.output, "w"))
    refs.append(ParamRef("output.b", model.output, "b"))
    return refs


def _build(spec: ArchSpec, rng: np.random.Generator) -> Model:
    m = Model(spec=spec)
    if spec.kind == "fusion":
        for branch, d_in in (("audio_branch", spec.in_dim_audio),
                             ("video_branch", spec.in_dim_video)):
            layers = []
            width_in = d_in
            for _ in range(spec.n_separate):
                layers.append(init_dense(width_in, spec.width, rng))
                width_in = spec.width
            setattr(m, branch, layers)
    joint_in = spec.merged_dim
    for _ in range(spec.n_joint - 1):
        m.joint_dense.append(init_dense(joint_in, spec.width, rng))
        joint_in = spec.width
    m.lstm = init_lstm(joint_in, spec.width, rng)
    m.output = init_dense(spec.width, spec.n_classes, rng)
    return m


def build_single(n_layers: int, width: int, in_dim: int, n_classes: int,
                 rng: np.random.Generator, modality: str = "audio") -> Model:
    """Single-modality stack: (n_layers-1) dense+dropout, LSTM, linear output.

    ``n_layers`` counts the LSTM, so n_layers=1 puts the LSTM directly on
    the input features.
    """
    if n_layers < 1:
        raise ValueError(f"need at least one layer, got {n_layers}")
    if modality not in ("audio", "video"):
        raise ValueError(f"modality must be 'audio' or 'video', got {modality!r}")
    spec = ArchSpec(
        kind="single",
        n_separate=0,
        n_joint=n_layers,
        width=width,
        in_dim_audio=in_dim if modality == "audio" else 0,
        in_dim_video=in_dim if modality == "video" else 0,
        n_classes=n_classes,
    )
    return _build(spec, rng)


def build_fusion(x: int, y: int, width: int, dims: tuple[int, int],
                 n_classes: int, rng: np.random.Generator) -> Model:
    """Fusion "x+y" network: x separate layers per modality, y joint layers.

    x=0 is early fusion: the raw features are concatenated and fed to the
    joint network, which with identical parameters computes exactly what a
    single-modality network would on the concatenated input.
    """
    spec = ArchSpec(
        kind="fusion",
        n_separate=x,
        n_joint=y,
        width=width,
        in_dim_audio=dims[0],
        in_dim_video=dims[1],
        n_classes=n_classes,
    )
    return _build(spec, rng)


def _as_frame_tensors(seq, expect_dim: int, what: str) -> list[Tensor]:
    if isinstance(seq, FeatureSequence):
        frames = [Tensor(row) for row in seq.frames]
    else:
        frames = list(seq)
    if not frames:
        raise ValueError(f"{what} sequence is empty")
    for t in frames:
        if t.data.shape != (expect_dim,):
            raise ValueError(
                f"{what} frame has shape {t.data.shape}, expected ({expect_dim},)"
            )
    return frames


def forward_last_frame(model: Model, seq_audio=None, seq_video=None,
                       mode: str = "eval", rng: np.random.Generator | None = None,
                       dropout_p: float = 0.5) -> Tensor:
    """Run the whole sequence and return the logits at the final frame.

    Sequences may be :class:`FeatureSequence` values or lists of per-frame
    rank-1 tensors (the saliency analyzer passes pre-watched tensors).
    Dropout is applied after every dense layer in train mode only; the call
    is recorded when executed inside an open tape.
    """
    spec = model.spec
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")

    audio = video = None
    if spec.uses_audio:
        if seq_audio is None:
            raise ValueError("model requires an audio sequence")
        audio = _as_frame_tensors(seq_audio, spec.in_dim_audio, "audio")
    if spec.uses_video:
        if seq_video is None:
            raise ValueError("model requires a video sequence")
        video = _as_frame_tensors(seq_video, spec.in_dim_video, "video")
    if audio is not None and video is not None and len(audio) != len(video):
        raise ValueError(
            f"modality lengths differ: audio {len(audio)} vs video {len(video)}"
        )

    n_frames = len(audio) if audio is not None else len(video)

    def drop(t):
        return dropout(t, dropout_p, mode, rng)

    state = zero_state(spec.width)
    for t in range(n_frames):
        if spec.kind == "fusion":
            a = audio[t]
            v = video[t]
            for layer in model.audio_branch:
                a = drop(dense_tanh(a, layer))
            for layer in model.video_branch:
                v = drop(dense_tanh(v, layer))
            z = concat_features(a, v)
        else:
            z = audio[t] if audio is not None else video[t]
        for layer in model.joint_dense:
            z = drop(dense_tanh(z, layer))
        state = lstm_step(z, state, model.lstm)
    return dense_linear(state.h, model.output)


def predict(model: Model, seq_audio=None, seq_video=None) -> int:
    """Argmax class of the last-frame logits; ties go to the lowest index."""
    logits = forward_last_frame(model, seq_audio, seq_video, mode="eval")
    return int(np.argmax(logits.data))


def clone_model(model: Model) -> Model:
    """Deep copy with fresh tensors (tape bookkeeping is not carried over)."""
    out = Model(spec=model.spec)
    for src, attr in ((model.audio_branch, "audio_branch"),
                      (model.video_branch, "video_branch"),
                      (model.joint_dense, "joint_dense")):
        setattr(out, attr, [DenseParams(w=Tensor(p.w.data.copy()),
                                        b=Tensor(p.b.data.copy())) for p in src])
    out.lstm = LstmParams(**{
        f"{part}_{gate}": Tensor(getattr(model.lstm, f"{part}_{gate}").data.copy())
        for gate in ("i", "f", "o", "c") for part in ("w", "u", "b")
    })
    out.output = DenseParams(w=Tensor(model.output.w.data.copy()),
                             b=Tensor(model.output.b.data.copy()))
    return out


def save_checkpoint(model: Model, path) -> None:
    """Write the "AVNN" checkpoint: magic, version, spec, parameter payload."""
    spec = model.spec
    head = struct.pack(
        "<4sIIIIIIII",
        _CKPT_MAGIC,
        _CKPT_VERSION,
        _KIND_CODE[spec.kind],
        spec.n_separate,
        spec.n_joint,
        spec.width,
        spec.in_dim_audio,
        spec.in_dim_video,
        spec.n_classes,
    )
    with open(path, "wb") as fh:
        fh.write(head)
        for ref in parameters(model):
            fh.write(ref.value.data.astype("<f8").tobytes())


def load_checkpoint(path) -> Model:
    raw = open(path, "rb").read()
    head = struct.Struct("<4sIIIIIIII")
    if len(raw) < head.size:
        raise ValueError(f"{path}: too short to hold a checkpoint header")
    magic, version, kind, n_sep, n_joint, width, d_a, d_v, n_cls = head.unpack_from(raw)
    if magic != _CKPT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {_CKPT_MAGIC!r}")
    if version != _CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    if kind not in _KIND_NAME:
        raise ValueError(f"{path}: unknown architecture kind code {kind}")
    spec = ArchSpec(
        kind=_KIND_NAME[kind],
        n_separate=n_sep,
        n_joint=n_joint,
        width=width,
        in_dim_audio=d_a,
        in_dim_video=d_v,
        n_classes=n_cls,
    )
    model = _build(spec, np.random.default_rng(0))  # shapes only; overwritten below
    offset = head.size
    for ref in parameters(model):
        shape = ref.value.data.shape
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(raw):
            raise ValueError(f"{path}: truncated parameter payload")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        ref.assign(Tensor(arr.astype(np.float64).reshape(shape)))
        offset = end
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes after payload")
    return model
