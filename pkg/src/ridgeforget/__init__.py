"""Exact continual unlearning for closed-form ridge classifiers."""

from .core import (
    DEFAULT_GAMMA,
    AnalyticModel,
    FeatureBatch,
    TrackingMatrix,
    joint_fit,
    learn_update,
    objective_value,
    predict,
    unlearn_model,
    unlearn_tracking,
    woodbury_update,
)
from .errors import (
    ContractViolation,
    InputError,
    IntegrityError,
    RidgeForgetError,
    RunAbortedError,
    SingularityError,
    StateFormatError,
    StateIntegrityError,
    UnlearnabilityError,
    VersionError,
)
from .features import (
    EncodedDataset,
    FeatureExtractor,
    RawDataset,
    SyntheticSpec,
    encode,
    generate_synthetic,
    load_csv,
    one_hot,
    write_csv,
)
from .harness import (
    BenchRow,
    EngineState,
    RequestRecord,
    RequestStream,
    RunOptions,
    RunRecord,
    StreamMeta,
    bench_scaling,
    build_forget_stream,
    build_stream,
    run_stream,
)
from .state import load_state, save_state
from .verify import (
    GAP_CSV_HEADER,
    GapReport,
    SampleLedger,
    accuracy,
    gap_report,
    mia_gap,
    oracle_retrain,
    params_gap,
)

__all__ = [
    "DEFAULT_GAMMA",
    "AnalyticModel",
    "TrackingMatrix",
    "FeatureBatch",
    "joint_fit",
    "learn_update",
    "objective_value",
    "predict",
    "unlearn_model",
    "unlearn_tracking",
    "woodbury_update",
    "RidgeForgetError",
    "ContractViolation",
    "InputError",
    "SingularityError",
    "UnlearnabilityError",
    "StateIntegrityError",
    "StateFormatError",
    "IntegrityError",
    "VersionError",
    "RunAbortedError",
    "FeatureExtractor",
    "RawDataset",
    "EncodedDataset",
    "SyntheticSpec",
    "encode",
    "generate_synthetic",
    "one_hot",
    "load_csv",
    "write_csv",
    "EngineState",
    "RequestStream",
    "StreamMeta",
    "RequestRecord",
    "RunRecord",
    "RunOptions",
    "BenchRow",
    "build_stream",
    "build_forget_stream",
    "run_stream",
    "bench_scaling",
    "save_state",
    "load_state",
    "GapReport",
    "GAP_CSV_HEADER",
    "SampleLedger",
    "accuracy",
    "gap_report",
    "mia_gap",
    "oracle_retrain",
    "params_gap",
]
