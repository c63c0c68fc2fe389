"""Reachability-aware visual tracking control for a redundant 7-DoF arm."""

from .ik import IkParams, ik_reachable, ik_solve
from .kinematics import (
    KinematicChain,
    default_chain,
    desk_chain,
    forward_kinematics,
    jacobian,
    self_collision,
)
from .planner import (
    PlannerInput,
    PlannerParams,
    RescaleWeights,
    objective,
    plan_step,
    rescale,
)
from .reachability import ReachabilityMap, build_map, load_map, save_map
from .scenarios import AblationMask, CameraModel, ObstacleSpec, ScenarioSpec, TargetSpec
from .transforms import Pose6, compose_pose_delta
from .world import (
    ObstacleBody,
    OccupancyGrid,
    SightCone,
    cone_grid_distance,
    point_grid_distance,
    rasterize,
    segment_visibility,
)

__all__ = [
    "AblationMask",
    "CameraModel",
    "IkParams",
    "KinematicChain",
    "ObstacleBody",
    "ObstacleSpec",
    "OccupancyGrid",
    "PlannerInput",
    "PlannerParams",
    "Pose6",
    "ReachabilityMap",
    "RescaleWeights",
    "ScenarioSpec",
    "SightCone",
    "TargetSpec",
    "build_map",
    "compose_pose_delta",
    "cone_grid_distance",
    "default_chain",
    "desk_chain",
    "forward_kinematics",
    "ik_reachable",
    "ik_solve",
    "jacobian",
    "load_map",
    "objective",
    "plan_step",
    "point_grid_distance",
    "rasterize",
    "rescale",
    "save_map",
    "segment_visibility",
    "self_collision",
]

__version__ = "0.1.0"
