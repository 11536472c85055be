"""Pydantic records shared by services and the command line"""

from .bounds import AvatarSpec, BoundReport, Side, TailRecord
from .drift import DriftKind, DriftModel, HitTimeResult
from .run_config import Command, Recipe, RunConfig, StatsTest
from .simulation import Coupling, Scheme, SimConfig, SimOptions, TauSample
from .stats import KsResult

__all__ = [
    "AvatarSpec",
    "BoundReport",
    "Side",
    "TailRecord",
    "DriftKind",
    "DriftModel",
    "HitTimeResult",
    "Command",
    "Recipe",
    "RunConfig",
    "StatsTest",
    "Coupling",
    "Scheme",
    "SimConfig",
    "SimOptions",
    "TauSample",
    "KsResult",
]
