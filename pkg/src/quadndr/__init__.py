"""Neural dead reckoning for quadrotors flying periodic trajectories."""

__version__ = "0.1.0"

from .ins import (
    DEFAULT_GRAVITY,
    GRAVITY,
    ImuSample,
    ImuSeries,
    NavState,
    dcm_to_yaw,
    euler_to_dcm,
    mechanize_series,
    mechanize_step,
    skew,
)
from .simulate import (
    GroundTruthSeries,
    ImuErrorModel,
    TrajectoryProfile,
    corrupt_imu,
    generate_periodic_trajectory,
    initial_nav_state,
    inverse_mechanize,
)
from .windows import NormStats, SampleSet, WindowSpec, normalize, split, window_series
from .network import (
    AdamState,
    NetConfig,
    TrainConfig,
    adam_step,
    backward,
    forward_multi_head,
    forward_single_head,
    init_params,
    leaky_relu,
    load_model,
    mse_loss,
    save_model,
    train,
)
from .deadreckon import (
    EvalReport,
    PredictedTrajectory,
    improvement_pct,
    integrate_deltas,
    quadnet_update,
    rmse,
    run_baseline,
)

__all__ = [name for name in dir() if not name.startswith("_")]
