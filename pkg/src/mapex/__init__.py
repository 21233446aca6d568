"""Deterministic 2-D indoor exploration simulation and benchmarking.

Building blocks: procedural floor plans, a noisy planar range sensor,
two-level log-odds occupancy mapping with ego-centric views, discrete
vehicle dynamics from a measured motion table, map prediction with dynamic
thresholding and F1 scoring, frontier/greedy exploration policies, and a
reproducible multi-trial benchmark harness. External predictors and
policies attach over a small byte-stream protocol.
"""

from .grid import FREE, NON_FLIGHT, OCCUPIED, UNKNOWN, Grid2D
from .floorplan import (FloorPlan, FloorPlanConfig, GenerationError,
                        generate_plan, load_plan, save_plan)
from .dynamics import (ACTION_COUNT, ACTION_NAMES, FORWARD, FORWARD_LEFT,
                       FORWARD_RIGHT, HOVER, TURN_LEFT, TURN_RIGHT,
                       MotionTable, Pose, apply_action, check_collision,
                       wrap_angle)
from .sensor import ScanResult, SensorConfig, ray_angles, sense
from .occupancy import (EgoTransformSpec, HierarchicalMap, LogOddsConfig,
                        LogOddsGrid, ego_to_world, ego_transform, inflate,
                        integrate_scan, load_grid, project_low_from_high,
                        save_grid)
from .predictor import (ExternalPredictor, HeuristicPredictor,
                        IdentityPredictor, OraclePredictor, ProbabilityMap,
                        ThresholdConfig, dynamic_threshold, free_cutoff,
                        make_predictor)
from .metrics import PredictionScore, coverage, f1_score
from .episode import (Episode, EpisodeConfig, EpisodeRecord, Observation,
                      StepRow, sample_start_pose)
from .planners import (ExternalPolicy, Frontier, FrontierPolicy,
                       FrontierPredPolicy, GreedyPredPolicy,
                       detect_frontiers, make_policy, plan_external,
                       plan_frontier_pred, plan_greedy_pred,
                       plan_nearest_frontier)
from .protocol import (ExternalPolicyClient, ExternalPredictorClient,
                       ProtocolError, SubprocessEndpoint, TcpEndpoint)
from .bench import (BenchSpec, BenchSummary, coverage_curve, run_bench,
                    run_episode, summarize)

__version__ = "0.1.0"
