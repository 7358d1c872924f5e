"""Content-aware secure volumetric transport.

A desk-scale pipeline for streaming 3D point-cloud frames under
saliency-conditioned protection: spatial cube partitioning, joint
perceptual-privacy scoring, per-cube AEAD with adaptive key rotation,
selective traffic shaping with a mutual-information leakage bound, and a
verifying client with hold-over rendering admission.
"""

from .errors import (
    AuthFailure,
    BudgetExceededWarning,
    ConfigError,
    FrameParseError,
    InsufficientData,
    MalformedHeader,
    NonceReuseError,
    OrderingError,
    PrivisError,
    ValidationError,
)
from .frame_io import (
    PointCloudFrame,
    PointRecord,
    SceneSpec,
    generate_frame,
    generate_scene,
    load_frame,
    write_frame,
)
from .partition import (
    Cube,
    CubeId,
    CubeSet,
    PartitionConfig,
    membership_change_fraction,
    partition_frame,
    reuse_or_repartition,
)
from .saliency import (
    SaliencyConfig,
    SaliencyScore,
    joint_saliency,
    perceptual_saliency,
    privacy_saliency,
    score_cubes,
)
from .policy import (
    CostModel,
    PolicyBudget,
    PolicyConfig,
    ProtectionLevel,
    ProtectionPolicy,
    Scope,
    assign_policy,
    calibrate_cost_model,
    enforce_budget,
    protection_level,
)
from .keyring import KeyEpoch, KeyRing, RootKey, derive_key, hkdf_sha256, key_for_frame
from .seal import (
    CubePlaintext,
    NonceRegistry,
    SealedCube,
    nonce_for,
    open_cube,
    seal_cube,
    serialize_cube,
)
from .shaping import (
    ShapedPacket,
    ShapingConfig,
    flow_rng,
    jitter_delay,
    pad_length,
    schedule_flow,
    shape_times,
)
from .netw import (
    Datagram,
    NetConfig,
    TrafficTrace,
    flow_isolation_check,
    packetize,
    reassemble,
    transmit,
)
from .leakage import (
    AdaptAction,
    LeakageConfig,
    LeakageReport,
    estimate_mi,
    leakage_check_and_adapt,
    trace_features,
)
from .client import (
    Admitted,
    Client,
    Dropped,
    FrameSummary,
    HeldOver,
    RenderState,
    ReplayGuard,
    admit_cube,
    frame_compose,
    replay_filter,
)
from .bench import (
    ComparisonResult,
    LatencyBreakdown,
    RunConfig,
    SessionResult,
    compare_modes,
    default_scene,
    leakage_scene,
    run_session,
)

__version__ = "0.1.0"
