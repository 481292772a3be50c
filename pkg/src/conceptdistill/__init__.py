"""Training-free image editing on diffusion latents.

Optimizes a latent along a descending timestep plan using the difference
between target- and source-conditioned noise predictions, with an optional
pixel-space regularizer and dynamic patch-wise blending of concept adapters.
"""

from .config import ConfigError, RunSetup, build_backend, load_config, parse_config
from .core import (
    AdapterSpec,
    BadHeaderError,
    BadMagicError,
    CodecError,
    NonFiniteValueError,
    ShapeMismatchError,
    TruncatedPayloadError,
    VersionMismatchError,
    as_latent,
    read_latent,
    tensor_read,
    tensor_write,
    write_latent,
)
from .distill import (
    GradConfig,
    GradResult,
    NumericalAbort,
    apply_update,
    cds_grad,
    dds_grad,
    sds_grad,
)
from .editor import (
    BackendStepFailure,
    EditConfig,
    EditTrace,
    StepRecord,
    SweepRow,
    compare_objectives,
    load_trace,
    run_edit,
    run_sweep,
    write_trace,
)
from .predictor import (
    BackendError,
    ConstantBackend,
    GaussianConceptModel,
    PredictorBackend,
    UnknownAdapterError,
    UnknownConditionError,
    guided_predict,
    predict,
)
from .remote import (
    DuplicateConditionError,
    NotReadyError,
    ProtocolVersionError,
    RemoteBackend,
    ServerError,
    TransportError,
    decode_tensor,
    encode_tensor,
)
from .schedule import (
    NoiseSchedule,
    TimestepPlan,
    add_noise,
    build_noise_schedule,
    plan_timesteps,
)
from .weighting import (
    PatchGrid,
    WeightMap,
    composite_prediction,
    dynamic_weighted_predict,
    partition_patches,
    patch_cosine,
    similarity_matrix,
    softmin_weights,
    upsample_weights,
    weighted_composite,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterSpec",
    "BackendError",
    "BackendStepFailure",
    "BadHeaderError",
    "BadMagicError",
    "CodecError",
    "ConfigError",
    "ConstantBackend",
    "DuplicateConditionError",
    "EditConfig",
    "EditTrace",
    "GaussianConceptModel",
    "GradConfig",
    "GradResult",
    "NoiseSchedule",
    "NonFiniteValueError",
    "NotReadyError",
    "NumericalAbort",
    "PatchGrid",
    "PredictorBackend",
    "ProtocolVersionError",
    "RemoteBackend",
    "RunSetup",
    "ServerError",
    "ShapeMismatchError",
    "StepRecord",
    "SweepRow",
    "TimestepPlan",
    "TransportError",
    "TruncatedPayloadError",
    "UnknownAdapterError",
    "UnknownConditionError",
    "VersionMismatchError",
    "add_noise",
    "apply_update",
    "as_latent",
    "build_backend",
    "build_noise_schedule",
    "cds_grad",
    "compare_objectives",
    "composite_prediction",
    "dds_grad",
    "decode_tensor",
    "dynamic_weighted_predict",
    "encode_tensor",
    "guided_predict",
    "load_config",
    "load_trace",
    "parse_config",
    "partition_patches",
    "patch_cosine",
    "plan_timesteps",
    "predict",
    "read_latent",
    "run_edit",
    "run_sweep",
    "sds_grad",
    "similarity_matrix",
    "softmin_weights",
    "tensor_read",
    "tensor_write",
    "upsample_weights",
    "weighted_composite",
    "write_latent",
    "write_trace",
]
