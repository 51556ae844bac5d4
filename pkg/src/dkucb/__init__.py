"""Kernelized contextual-bandit user association for mmWave vehicular networks.

The package couples a discrete-time vehicular network simulator with
distributed learning agents: each vehicle estimates per-base-station
transmission rates by kernel ridge regression over past contexts and picks
its uplink by an upper-confidence-bound rule, sharing data with base
stations only when an information-volume trigger or a movement threshold
fires.  Baselines, a seeded experiment harness, and a CLI round out the
library.
"""

from .agent import (
    Agent,
    AgentConfig,
    ArmSamples,
    Estimate,
    SampleStore,
    candidate_set,
    estimate,
    record,
    select_arm,
)
from .env import MapSpec, Rect, Route, World, WorldConfig, default_map, parse_geometry_file
from .harness import (
    ConfigError,
    MetricsLog,
    RunConfig,
    RunResult,
    build_run_config,
    default_config,
    load_config,
    merge_config,
    run,
    sharing_efficiency,
    sweep,
)
from .kernels import (
    CompositeKernel,
    Context,
    KernelMatrix,
    KernelParams,
    angle_kernel,
    build_kernel_matrix,
    context_kernel,
    distance_kernel,
    doppler_kernel,
    ridge_log_det,
    tx_count_kernel,
)
from .policies import (
    DkUcbPolicy,
    GaussianKernelPolicy,
    HypercubeUcbPolicy,
    Policy,
    RandomPolicy,
    SingleGaussianKernel,
    SyncSettings,
    WcsPolicy,
    brute_force_optimum,
    wcs_assignment,
)
from .sync import (
    BsStore,
    CommLedger,
    SharedSample,
    SyncState,
    context_location,
    should_sync,
    subspace_filter,
    sync_rate,
    synchronize,
    trigger,
    trigger_statistic,
)

__version__ = "0.1.0"
