"""Vehicular network environment: geometry, channel surrogate, world model."""

from .channel import RateEvaluator, ar1_coefficient, evolve_scatter, fading_power, path_loss
from .geometry import (
    MapSpec,
    Rect,
    Route,
    default_map,
    manhattan_grid_routes,
    parse_geometry_file,
    segment_blocked,
    segments_blocked,
)
from .world import PeriodObservation, VehicleState, World, WorldConfig, db_to_linear

__all__ = [
    "MapSpec",
    "PeriodObservation",
    "RateEvaluator",
    "Rect",
    "Route",
    "VehicleState",
    "World",
    "WorldConfig",
    "ar1_coefficient",
    "db_to_linear",
    "default_map",
    "evolve_scatter",
    "fading_power",
    "manhattan_grid_routes",
    "parse_geometry_file",
    "path_loss",
    "segment_blocked",
    "segments_blocked",
]
