"""
Monte Carlo configuration and sample records
"""
import math
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class Coupling(str, Enum):
    DIRECT = "direct"
    FULL_COUPLING = "full"
    REFLECTION = "reflection"


class Scheme(str, Enum):
    EULER_MARUYAMA = "euler"


class SimConfig(BaseModel):
    """Time-stepping policy for one dimension n"""

    n: int = Field(..., ge=1)
    dt_base: float = Field(..., gt=0, description="Base time step")
    refine_factor: float = Field(1.0, ge=1.0, description="Extra shrink where the drift cap binds")
    delta_max: float = Field(0.02, gt=0, le=0.1, description="Max drift displacement per step")
    kickoff_dt: float = Field(..., gt=0, description="Length of the exact-law first step")
    scheme: Scheme = Scheme.EULER_MARUYAMA
    coupling: Coupling = Coupling.DIRECT
    max_steps: int = Field(2_000_000, ge=1, description="Step budget per path")
    normals_block: int = Field(1024, ge=1, description="Normals pre-drawn per path and refill")

    @model_validator(mode="after")
    def check_steps(self) -> "SimConfig":
        if self.dt_base > self.kickoff_dt:
            raise ValueError("dt_base must not exceed kickoff_dt")
        if math.sqrt(2.0 * self.kickoff_dt * (self.n + 3)) >= 0.1:
            raise ValueError("kickoff_dt too large: sqrt(2*kickoff_dt*(n+3)) must stay below 0.1")
        return self

    @classmethod
    def for_n(cls, n: int, coupling: Coupling = Coupling.DIRECT, **overrides) -> "SimConfig":
        """Default policy: kickoff radius about 0.09, base step half the kickoff."""
        kickoff_dt = overrides.pop("kickoff_dt", 0.004 / (n + 3))
        dt_base = overrides.pop("dt_base", 0.5 * kickoff_dt)
        return cls(n=n, dt_base=dt_base, kickoff_dt=kickoff_dt, coupling=coupling, **overrides)


class SimOptions(BaseModel):
    """Dimension-free part of a SimConfig, as carried by a RunConfig"""

    coupling: Coupling = Coupling.DIRECT
    delta_max: float = Field(0.02, gt=0, le=0.1)
    refine_factor: float = Field(1.0, ge=1.0)
    dt_scale: float = Field(1.0, gt=0, le=1.0, description="Multiplier on the default base step")
    max_steps: int = Field(2_000_000, ge=1)

    def to_config(self, n: int) -> SimConfig:
        kickoff_dt = 0.004 / (n + 3)
        return SimConfig(
            n=n,
            dt_base=0.5 * kickoff_dt * self.dt_scale,
            kickoff_dt=kickoff_dt,
            coupling=self.coupling,
            delta_max=self.delta_max,
            refine_factor=self.refine_factor,
            max_steps=self.max_steps,
        )


class TauSample(BaseModel):
    """A batch of hitting-time draws with its seed provenance"""

    n: int = Field(..., ge=1)
    coupling: Coupling
    master_seed: int = Field(..., ge=0, lt=2**64)
    config: SimConfig
    values: List[float]
    steps: List[int]
    rho_at_tau: Optional[List[float]] = None
    pushed: Optional[List[float]] = None
    order_violations: int = 0

    @field_validator("values")
    @classmethod
    def finite_positive(cls, v: List[float]) -> List[float]:
        arr = np.asarray(v, dtype=float)
        if not (np.all(np.isfinite(arr)) and np.all(arr > 0)):
            raise ValueError("tau draws must be finite and positive")
        return v

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std_error(self) -> float:
        if self.size < 2:
            return float("nan")
        return float(np.std(self.values, ddof=1) / math.sqrt(self.size))

    @property
    def per_path_steps(self) -> Dict[str, float]:
        arr = np.asarray(self.steps, dtype=float)
        return {"min": float(arr.min()), "mean": float(arr.mean()), "max": float(arr.max())}
