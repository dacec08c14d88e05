"""Simulation of greedy social search on geographically embedded networks."""

from .geo import (
    EARTH_RADIUS_KM,
    CONTIGUOUS_US,
    BoundingBox,
    GeoPoint,
    RhomboidGrid,
    build_grid,
    geographic_diameter,
    haversine_km,
    load_locations,
)
from .graph import SocialGraph, bfs_hops, fit_power_law_exponent, giant_component, load_graph
from .communities import CommunityAssignment, detect_communities, load_communities
from .knowledge import KnowledgeModel, fof_candidates, knows_target
from .routing import RoutingContext, TrialResult, Weights, route, select_next

__all__ = [
    "EARTH_RADIUS_KM",
    "CONTIGUOUS_US",
    "BoundingBox",
    "GeoPoint",
    "RhomboidGrid",
    "build_grid",
    "geographic_diameter",
    "haversine_km",
    "load_locations",
    "SocialGraph",
    "bfs_hops",
    "fit_power_law_exponent",
    "giant_component",
    "load_graph",
    "CommunityAssignment",
    "detect_communities",
    "load_communities",
    "KnowledgeModel",
    "fof_candidates",
    "knows_target",
    "RoutingContext",
    "TrialResult",
    "Weights",
    "route",
    "select_next",
]

__version__ = "0.1.0"
