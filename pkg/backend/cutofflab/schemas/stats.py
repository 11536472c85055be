"""
Hypothesis test results
"""
from pydantic import BaseModel, Field


class KsResult(BaseModel):
    """Kolmogorov-Smirnov statistic with its asymptotic p-value"""

    statistic: float = Field(..., ge=0, le=1)
    p_value: float = Field(..., ge=0, le=1)
    n_a: int = Field(..., ge=1)
    n_b: int = Field(0, ge=0, description="0 for a one-sample test")
