"""
Drift models and deterministic hitting-time results
"""
import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, model_validator

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class DriftKind(str, Enum):
    """Which drift the noise-free flow follows"""
    EXACT = "exact"
    TILDE_LOWER = "tilde"
    HAT_UPPER = "hat"


class DriftModel(BaseModel):
    """Exact drift b_n or one of the two piecewise comparison drifts"""

    kind: DriftKind = Field(DriftKind.EXACT, description="Drift selector")
    A: float = Field(6.0, gt=0, description="Window half-width in a-units")
    c_tilde: Optional[float] = Field(None, gt=0, description="Plateau constant of the lower drift")
    eps_A: Optional[float] = Field(None, ge=0, description="Outer inflation of the upper drift")

    @model_validator(mode="after")
    def check_constants(self) -> "DriftModel":
        if self.kind == DriftKind.TILDE_LOWER:
            if self.c_tilde is None:
                raise ValueError("tilde drift needs c_tilde")
            if not self.c_tilde < min(SQRT_2_OVER_PI, self.A):
                raise ValueError(
                    f"c_tilde={self.c_tilde} must lie below min(sqrt(2/pi), A={self.A})"
                )
        elif self.kind == DriftKind.HAT_UPPER:
            from cutofflab.services.specfun import eps_A as eps_of_A

            expected = eps_of_A(self.A)[2]
            if self.eps_A is None:
                self.eps_A = expected
            elif not math.isclose(self.eps_A, expected, rel_tol=1e-12):
                raise ValueError(f"eps_A={self.eps_A} differs from eps(A)={expected}")
        return self

    @classmethod
    def exact(cls) -> "DriftModel":
        return cls(kind=DriftKind.EXACT)

    @classmethod
    def tilde(cls, A: float = 0.8, c_tilde: float = 0.5) -> "DriftModel":
        return cls(kind=DriftKind.TILDE_LOWER, A=A, c_tilde=c_tilde)

    @classmethod
    def hat(cls, A: float = 6.0) -> "DriftModel":
        return cls(kind=DriftKind.HAT_UPPER, A=A)


class HitTimeResult(BaseModel):
    """Hitting time of pi for the noise-free flow driven by a drift model"""

    n: int = Field(..., ge=1)
    model: DriftModel
    T: float = Field(..., gt=0, description="Hitting time of pi")
    ratio: float = Field(..., description="n*T/ln(n); NaN for n = 1")
    quad_error: float = Field(0.0, ge=0)
