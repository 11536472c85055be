"""
Avatar breakpoint records and bound reports
"""
import math
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator


class Side(str, Enum):
    PLUS = "plus"
    MINUS = "minus"


class AvatarSpec(BaseModel):
    """Breakpoints and smoothing of one piecewise avatar profile"""

    eps: float = Field(..., gt=0, lt=1)
    A: float = Field(..., gt=0, description="Window half-width in a-units")
    a_beta_root: float = Field(..., description="Critical point of beta")
    a_minus: float
    a_plus: float
    m_minus: float
    m_plus: float
    mollify_width: float = Field(..., gt=0, description="Kernel half-width in a-units")
    grid_density: int = Field(40, ge=4, description="Grid points per kernel half-width")

    @model_validator(mode="after")
    def check_breakpoints(self) -> "AvatarSpec":
        if not self.a_minus < self.a_beta_root < self.a_plus:
            raise ValueError("tangency points must surround the critical point of beta")
        if not (self.m_minus < self.a_minus and self.m_plus > self.a_plus):
            raise ValueError("rejoin points must lie outside the tangency points")
        if not self.A > max(abs(self.m_minus), self.m_plus):
            raise ValueError(
                f"A={self.A} must exceed |m_minus|={abs(self.m_minus):.4g} and m_plus={self.m_plus:.4g}"
            )
        if not self.mollify_width < self.min_gap() / 4.0:
            raise ValueError("mollify_width must stay below a quarter of the smallest breakpoint gap")
        return self

    def breakpoints(self) -> List[float]:
        return [-self.A, self.m_minus, self.a_minus, self.a_plus, self.m_plus, self.A]

    def min_gap(self) -> float:
        pts = self.breakpoints()
        return min(b - a for a, b in zip(pts[:-1], pts[1:]))


class TailRecord(BaseModel):
    """Ingredients of the second-moment tail bound for one avatar"""

    side: Side
    span: float = Field(..., gt=0, description="psi(pi) - psi(0)")
    min_second: float
    max_second: float
    cubic_integral: float = Field(..., ge=0, description="integral of psi'^3 over [0, pi]")

    @property
    def base_time(self) -> float:
        extreme = self.min_second if self.side == Side.PLUS else self.max_second
        return self.span / (1.0 + extreme)

    def threshold(self, r: float) -> float:
        return self.base_time * (1.0 + r if self.side == Side.PLUS else 1.0 - r)

    def bound(self, r: float) -> float:
        from cutofflab.core.errors import HypothesisViolated

        if r <= 0:
            raise ValueError("r must be positive")
        if self.min_second <= -1.0 / 3.0:
            raise HypothesisViolated(f"min psi''={self.min_second:.4g} is not above -1/3")
        return self.cubic_integral / (r**2 * self.span**2 * (1.0 + 3.0 * self.min_second))

    def bound_at(self, t: float) -> float:
        """Bound on P[tau > t] (plus) or P[tau < t] (minus); 1 when vacuous"""
        base = self.base_time
        r = t / base - 1.0 if self.side == Side.PLUS else 1.0 - t / base
        if r <= 0 or self.min_second <= -1.0 / 3.0:
            return 1.0
        return min(1.0, self.bound(r))


class BoundReport(BaseModel):
    """Expectation sandwich and tail evaluators for one dimension"""

    n: int = Field(..., ge=1)
    eps: Optional[float] = None
    A: Optional[float] = None
    lb: float = Field(..., gt=0)
    ub: float = Field(..., gt=0)
    family: str = Field("avatar", description="avatar, trivial or mixed")
    tail_upper: TailRecord
    tail_lower: TailRecord
    membership_margins: Dict[str, float] = Field(default_factory=dict)
    max_second_condition: Dict[str, bool] = Field(default_factory=dict)
    trivial_lb: Optional[float] = None
    trivial_ub: Optional[float] = None

    @model_validator(mode="after")
    def ordered(self) -> "BoundReport":
        if self.lb > self.ub * (1.0 + 1e-12):
            raise ValueError(f"lb={self.lb} exceeds ub={self.ub}")
        for name, margin in self.membership_margins.items():
            if margin < -1e-9:
                raise ValueError(f"membership margin {name}={margin} is negative")
        return self

    def ratio(self, value: float) -> float:
        return value * self.n / math.log(self.n) if self.n > 1 else float("nan")
