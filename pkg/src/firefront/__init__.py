"""Wildfire firefront simulation via time-minimizing fire trajectories.

Fire trajectories are integrated as the lightlike geodesics of the
spacetime metric dt^2 - F^2, where F is a slope- and wind-aware Finsler
fire metric (a reverse Matsumoto term for slope plus a focus-centered
ellipse term for wind).  Crossovers between trajectories are detected and
pruned; an independent grid oracle cross-validates arrival times.
"""

from firefront.backend import BACKEND
from firefront.front import (
    FireMap,
    IgnitionCircle,
    IgnitionEllipse,
    IgnitionPoint,
    IgnitionPolyline,
    propagate,
)
from firefront.metric import FireMetric
from firefront.scenario import Scenario, list_presets, load_scenario
from firefront.terrain import (
    GaussianBump,
    GaussianSumTerrain,
    GridTerrain,
    PlaneTerrain,
    load_dem,
)

__version__ = "0.1.0"
__all__ = [
    "BACKEND",
    "FireMap",
    "FireMetric",
    "GaussianBump",
    "GaussianSumTerrain",
    "GridTerrain",
    "IgnitionCircle",
    "IgnitionEllipse",
    "IgnitionPoint",
    "IgnitionPolyline",
    "PlaneTerrain",
    "Scenario",
    "__version__",
    "list_presets",
    "load_dem",
    "load_scenario",
    "propagate",
]
