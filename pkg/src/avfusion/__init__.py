"""Audiovisual fusion at desk scale.

Feature frontends (log-Mel audio, pixel video), LSTM fusion networks
trained with minibatch SGD plus momentum on last-frame cross-entropy,
per-modality input-gradient saliency, and the paired one-tailed t-test
used to judge improvements, all on top of a small reverse-mode
differentiation tape.
"""

from .autodiff import (
    ShapeError,
    Tape,
    Tensor,
    add,
    concat_features,
    matmul,
    mul,
    pick,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    tanh,
)
from .audio import (
    Waveform,
    extract_logmel,
    frame_signal,
    log_mel,
    measured_snr,
    mel_filterbank,
    mix_at_snr,
    read_wav,
    write_wav,
)
from .dataset import Dataset, Item, SplitSpec, load_manifest, save_manifest, split_per_word
from .features import FeatureSequence, load_features, save_features
from .layers import (
    DenseParams,
    LstmParams,
    LstmState,
    dense_linear,
    dense_tanh,
    dropout,
    init_dense,
    init_lstm,
    lstm_sequence,
    lstm_step,
)
from .model import (
    ArchSpec,
    Model,
    build_fusion,
    build_single,
    clone_model,
    forward_last_frame,
    load_checkpoint,
    parameters,
    predict,
    save_checkpoint,
)
from .saliency import (
    SaliencyReport,
    class_score,
    modality_saliency,
    saliency_maps,
    speaker_saliency,
)
from .stats import TTestResult, paired_t_one_tailed, t_cdf
from .synthdata import SynthConfig, generate, monotonicity_benchmark, write_dataset
from .training import (
    DivergenceError,
    TrainConfig,
    evaluate,
    sgd_momentum_step,
    train,
)
from .video import (
    PcaBasis,
    load_roi_sequence,
    pca_fit,
    pca_transform,
    upsample_repeat,
    write_roi_sequence,
)

__version__ = "0.1.0"
