"""Time series anomaly detection with trainable quantum time-devolution
(rewinding) operators, on an exact few-qubit statevector simulator."""

from .ansatz import (
    EigenbasisCircuit,
    EmbeddingSpec,
    ZStringBasis,
    apply_eigenbasis,
    diag_phases,
    embed,
    rewind,
    zstring_basis,
)
from .data import (
    Dataset,
    SpikeParams,
    TimeSeries,
    gen_blobs,
    gen_gaussian,
    gen_noisy_sinusoids,
    gen_sine_added,
    gen_sinusoid_tests,
    gen_spikes,
    load_csv,
    minmax_rescale,
    save_csv,
    split,
)
from .errors import ConfigError, DataError, NumericError, QRewindError
from .evaluate import (
    Confusion,
    ScoreRow,
    ThresholdResult,
    balanced_accuracy,
    benchmark_optimizers,
    confusion_at,
    f1,
    score_dataset,
    static_score_grid,
    sweep_mu_sigma,
    sweep_ne,
    sweep_tau,
    time_value_score_grid,
    tune_threshold,
)
from .model import (
    CostBatch,
    ModelParams,
    TrainedModel,
    anomaly_score,
    cost,
    load_model,
    pack_params,
    penalty,
    point_cost,
    point_costs,
    point_score,
    reference_cost,
    rewound_expectation,
    sample_rates,
    save_model,
    series_cost,
    time_resolved_score,
    unpack_params,
)
from .optimize import (
    InitRanges,
    MultiRestartResult,
    OptimizerSpec,
    TrainConfig,
    TrainResult,
    TrainTrace,
    multi_restart,
    nelder_mead,
    powell,
    random_params,
    train,
)
from .statevec import (
    ShotConfig,
    Statevector,
    apply_cnot,
    apply_diagonal,
    apply_rot,
    apply_ry,
    expectation_mean_z,
    init_zero,
    sample_mean_z,
)

__version__ = "0.1.0"
