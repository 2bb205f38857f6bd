"""DCM foothold search over elevation maps, with a pendulum stair-walking simulator."""

__version__ = "0.1.0"

from .dcm import (
    CommandVelocity,
    DcmState,
    DynamicsError,
    GaitConfig,
    VhipParams,
    a_coefficient,
    dcm_propagate,
    nominal_offset,
    nominal_step,
    omega,
    periodic_offset,
    sigma,
    step_duration,
    vhip_integrate,
)
from .planner import (
    FootholdPlan,
    NoPlanError,
    PlannerWeights,
    PlanningError,
    PlanRequest,
    SearchWindow,
    brute_force_plan,
    candidate_costs,
    plan_foothold,
    plan_foothold_batch,
)
from .swing import SwingTrajectory, foothold_reward, make_swing, sample
from .terrain import (
    ElevationMap,
    FootprintKernel,
    MapFormatError,
    SteepnessMap,
    TerrainError,
    TerrainSpec,
    generate_terrain,
    height_at,
    load_map,
    save_map,
    sobel_gradient,
    steepness_map,
)
from .sim import (
    EpisodeConfig,
    EpisodeMetrics,
    Fall,
    StepTrace,
    SuccessReport,
    WalkerState,
    initial_state,
    run_ensemble,
    run_episode,
    step_once,
)
from .bench import BenchReport, bench_planner
