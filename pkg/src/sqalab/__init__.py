"""sqalab: subjective speech-quality ratings, representative values, and
a desk-scale frame-pooling quality predictor.

The core workflow: ingest listener ratings, pick a representative value
per sample (MOS or a low/high/trimmed variant), extract or simulate
frame features, train the pooled regressor against those targets, and
evaluate with MSE/LCC/SRCC across repeated trials.
"""

from .audio import (
    StftConfig,
    WaveBuffer,
    frame_count,
    hamming_window,
    read_wav,
    stft_magnitude,
    write_wav,
)
from .errors import SqaLabError
from .estimator import EarlyStopping, FramePoolRegressor, StftFeaturizer
from .experiment import (
    Split,
    TrainConfig,
    TrialReport,
    read_fixed_split,
    run_trials,
    split_ids,
    train_model,
)
from .features import read_features_csv, write_features_csv
from .metrics import (
    MetricSummary,
    aggregate_trials,
    average_ranks,
    evaluate,
    lcc,
    mse,
    srcc,
)
from .model import (
    Adam,
    LossBreakdown,
    ModelParams,
    batch_gradient,
    forward,
    init_params,
    load_model,
    loss_terms,
    sample_gradient,
    save_model,
)
from .ratings import (
    Dataset,
    Histogram,
    Rating,
    RepValSpec,
    SampleRatings,
    SampleStats,
    SkewSignCounts,
    central_mos,
    extreme_usage_proportions,
    histogram,
    ingest_ratings,
    mos,
    n_high_mos,
    n_low_mos,
    repval,
    repval_batch,
    sample_stats,
    skew_sign_counts,
)
from .simulate import SimConfig, SimResult, SyntheticTruth, listener_score, simulate

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "Dataset",
    "EarlyStopping",
    "FramePoolRegressor",
    "Histogram",
    "LossBreakdown",
    "MetricSummary",
    "ModelParams",
    "Rating",
    "RepValSpec",
    "SampleRatings",
    "SampleStats",
    "SimConfig",
    "SimResult",
    "SkewSignCounts",
    "Split",
    "SqaLabError",
    "StftConfig",
    "StftFeaturizer",
    "SyntheticTruth",
    "TrainConfig",
    "TrialReport",
    "WaveBuffer",
    "aggregate_trials",
    "average_ranks",
    "batch_gradient",
    "central_mos",
    "evaluate",
    "extreme_usage_proportions",
    "forward",
    "frame_count",
    "hamming_window",
    "histogram",
    "ingest_ratings",
    "init_params",
    "lcc",
    "listener_score",
    "load_model",
    "loss_terms",
    "mos",
    "mse",
    "n_high_mos",
    "n_low_mos",
    "read_features_csv",
    "read_fixed_split",
    "read_wav",
    "repval",
    "repval_batch",
    "run_trials",
    "sample_gradient",
    "sample_stats",
    "save_model",
    "simulate",
    "skew_sign_counts",
    "split_ids",
    "srcc",
    "stft_magnitude",
    "train_model",
    "write_features_csv",
    "write_wav",
]
