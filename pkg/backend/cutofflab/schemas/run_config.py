"""
Run configuration echoed at the top of every output file
"""
from enum import Enum
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from cutofflab import __version__
from cutofflab.core.config import settings
from cutofflab.schemas.drift import DriftModel
from cutofflab.schemas.simulation import SimOptions


class Command(str, Enum):
    SPECFUN = "specfun"
    DETFLOW = "detflow"
    SDE = "sde"
    AVATAR = "avatar"
    STATS = "stats"
    REPRODUCE = "reproduce"


class Recipe(str, Enum):
    THEOREM1 = "theorem1"
    THEOREM1B = "theorem1b"
    THEOREM2 = "theorem2"
    COROLLARY1 = "corollary1"
    PROP18 = "prop18"


class StatsTest(str, Enum):
    SUMMARY = "summary"
    KS = "ks"
    RADIAL = "radial"
    PROFILE = "profile"


class RunConfig(BaseModel):
    """Everything needed to rerun one command and reproduce its files"""

    command: Command
    recipe: Optional[Recipe] = None
    n: Optional[int] = Field(None, ge=1, description="Dimension parameter, sphere S^(n+1)")
    n_list: List[int] = Field(default_factory=list, description="Dimensions for multi-n runs")
    x_values: List[float] = Field(default_factory=list, description="Abscissae for specfun tables")
    model: DriftModel = Field(default_factory=DriftModel.exact)
    tol: Optional[float] = Field(None, ge=1e-12, description="Quadrature relative tolerance")
    sim: SimOptions = Field(default_factory=SimOptions)
    paths: Optional[int] = Field(None, ge=1, description="Monte Carlo paths per dimension")
    master_seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0, lt=2**64)
    eps: float = Field(0.05, gt=0, lt=1, description="Avatar slope tolerance")
    A: float = Field(6.0, gt=0, description="Avatar window half-width")
    r_values: List[float] = Field(default_factory=lambda: [0.5])
    stats_test: StatsTest = StatsTest.SUMMARY
    inputs: List[Path] = Field(default_factory=list, description="Sample files read by stats")
    name: Optional[str] = Field(None, description="Stem of the output files")
    version: str = __version__

    @field_validator("n_list")
    @classmethod
    def positive_dims(cls, v: List[int]) -> List[int]:
        if any(n < 1 for n in v):
            raise ValueError("every n must be at least 1")
        return v

    @field_validator("r_values")
    @classmethod
    def positive_r(cls, v: List[float]) -> List[float]:
        if any(r <= 0 for r in v):
            raise ValueError("r values must be positive")
        return v

    @model_validator(mode="after")
    def command_fields(self) -> "RunConfig":
        if self.command == Command.REPRODUCE and self.recipe is None:
            raise ValueError("reproduce needs a recipe")
        if self.command in (Command.SPECFUN, Command.SDE, Command.AVATAR) and self.n is None:
            raise ValueError(f"{self.command.value} needs n")
        if self.command == Command.DETFLOW and self.n is None and not self.n_list:
            raise ValueError("detflow needs n or n_list")
        if self.command == Command.STATS and not self.inputs:
            raise ValueError("stats needs at least one input file")
        return self

    def dims(self) -> List[int]:
        """n_list if given, otherwise [n]"""
        if self.n_list:
            return list(self.n_list)
        return [] if self.n is None else [self.n]

    def paths_or(self, default: int) -> int:
        return default if self.paths is None else self.paths

    def stem(self) -> str:
        if self.name:
            return self.name
        if self.command == Command.REPRODUCE:
            return self.recipe.value
        if self.command == Command.SDE:
            return f"sde_n{self.n}_{self.sim.coupling.value}_seed{self.master_seed}"
        return self.command.value

    @classmethod
    def load(cls, path: Path) -> "RunConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def dump(self, path: Path) -> None:
        Path(path).write_text(self.model_dump_json(indent=2), encoding="utf-8")
