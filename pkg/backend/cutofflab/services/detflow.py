"""
Deterministic hitting times of pi for the noise-free flows x' = b(x).

For a positive drift the hitting time is the integral of 1/b over [0, pi].
The integral is split at the edges of the central window and the outer
pieces are integrated in the log of the distance to pi/2, where 1/b behaves
like |tan x|/n across many decades.
"""
import logging
import math
import warnings
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy import integrate

from cutofflab.core.config import settings
from cutofflab.core.errors import DomainError, QuadFailure
from cutofflab.schemas.drift import DriftKind, DriftModel, HitTimeResult
from cutofflab.services.specfun import HALF_PI, eps_A, get_drift_evaluator

logger = logging.getLogger(__name__)

EXACT_SPLIT = 8.0  # a-units
HAT_SLACK = 1.05


def _window(n: int, A: float) -> float:
    w = A / math.sqrt(n)
    if w >= HALF_PI:
        raise DomainError(f"window A={A} does not fit inside (0, pi) for n={n}; need n > {(A / HALF_PI) ** 2:.4g}")
    return w


@lru_cache(maxsize=128)
def c_hat(n: int, A: float) -> float:
    """Plateau constant of the upper drift: 1.05 x max over the window of b_n/sqrt(n)"""
    w = _window(n, A)
    x = HALF_PI + np.linspace(-w, w, 4001)
    b = get_drift_evaluator(n).b(x)
    return HAT_SLACK * float(np.max(b)) / math.sqrt(n)


def piecewise_drift(n: int, model: DriftModel, x):
    """Evaluate the drift selected by model at x in (0, pi)"""
    arr = np.asarray(x, dtype=float)
    if model.kind == DriftKind.EXACT:
        return get_drift_evaluator(n).b(arr)

    w = _window(n, model.A)
    inside = np.abs(arr - HALF_PI) <= w
    outer = n * np.abs(1.0 / np.tan(arr))
    if model.kind == DriftKind.TILDE_LOWER:
        plateau = model.c_tilde * math.sqrt(n)
    else:
        plateau = c_hat(n, model.A) * math.sqrt(n)
        outer = (1.0 + model.eps_A) * outer
    out = np.where(inside, plateau, outer)
    return float(out) if arr.ndim == 0 else out


def _quad(
    func: Callable[[float], float], lo: float, hi: float, epsabs: float, epsrel: float, accept: float
) -> Tuple[float, float]:
    """quad that tolerates roundoff warnings once the error estimate is below accept"""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        value, err = integrate.quad(func, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=400)
    issues = [w for w in caught if issubclass(w.category, integrate.IntegrationWarning)]
    for w in caught:
        if not issubclass(w.category, integrate.IntegrationWarning):
            warnings.warn(w.message, w.category)
    if issues:
        if not (math.isfinite(value) and math.isfinite(err) and err <= accept):
            raise QuadFailure(f"quadrature on [{lo:.6g}, {hi:.6g}] failed (err={err:.3g}): {issues[0].message}")
        logger.debug(f"quadrature on [{lo:.6g}, {hi:.6g}] stopped at err={err:.3g}: {issues[0].message}")
    return value, err


def hit_time(n: int, model: Optional[DriftModel] = None, tol: Optional[float] = None) -> HitTimeResult:
    """T = integral of 1/b over [0, pi] for the drift selected by model.

    Args:
        n: dimension parameter, sphere S^(n+1)
        model: drift selector, exact b_n by default
        tol: relative tolerance, at least 1e-12

    Returns:
        HitTimeResult whose quad_error is the relative error estimate.
    """
    model = model or DriftModel.exact()
    tol = settings.QUAD_TOL if tol is None else tol
    if tol < 1e-12:
        raise DomainError(f"tol={tol} below 1e-12")

    if model.kind == DriftKind.EXACT:
        w = min(EXACT_SPLIT / math.sqrt(n), 0.9 * HALF_PI)
        g = get_drift_evaluator(n).phi_prime
    else:
        w = _window(n, model.A)

        def g(x):
            return 1.0 / piecewise_drift(n, model, x)

    scale = math.log(n + 2.0) / n
    epsabs = 0.1 * tol * scale
    accept = 1e3 * tol * scale
    tiny = 1e-300

    def left(v):
        x = max(HALF_PI - math.exp(v), tiny)
        return g(x) * math.exp(v)

    def right(v):
        x = min(HALF_PI + math.exp(v), math.pi - 1e-16)
        return g(x) * math.exp(v)

    pieces = [
        _quad(left, math.log(w), math.log(HALF_PI), epsabs, tol, accept),
        _quad(g, HALF_PI - w, HALF_PI + w, epsabs, tol, accept),
        _quad(right, math.log(w), math.log(HALF_PI), epsabs, tol, accept),
    ]
    T = math.fsum(p[0] for p in pieces)
    err = sum(p[1] for p in pieces) / T
    ratio = n * T / math.log(n) if n > 1 else float("nan")
    logger.debug(f"hit_time n={n} model={model.kind.value}: T={T:.12g} rel_err={err:.2e}")
    return HitTimeResult(n=n, model=model, T=T, ratio=ratio, quad_error=err)


def tilde_T_closed(n: int, A: float, c_tilde: float) -> float:
    """Closed-form hitting time of the lower piecewise drift"""
    if n <= A * A:
        raise DomainError(f"need n > A^2, got n={n}, A={A}")
    if c_tilde <= 0:
        raise DomainError("c_tilde must be positive")
    outer = -math.log(math.sin(A / math.sqrt(n))) / n
    return outer + 2.0 * A / (c_tilde * n) + outer


def hat_T_closed(n: int, A: float, c_hat_value: Optional[float] = None, eps: Optional[float] = None) -> float:
    """Closed-form hitting time of the upper piecewise drift"""
    if n <= A * A:
        raise DomainError(f"need n > A^2, got n={n}, A={A}")
    c = c_hat(n, A) if c_hat_value is None else c_hat_value
    e = eps_A(A)[2] if eps is None else eps
    outer = -math.log(math.sin(A / math.sqrt(n))) / ((1.0 + e) * n)
    return 2.0 * outer + 2.0 * A / (c * n)


def drift_sandwich_margin(n: int, tilde: DriftModel, hat: DriftModel, points: int = 10_000) -> Dict[str, float]:
    """Smallest relative gaps b - b_tilde and b_hat - b on an interior grid"""
    x = np.linspace(0.0, math.pi, points + 2)[1:-1]
    b = get_drift_evaluator(n).b(x)
    lower = piecewise_drift(n, tilde, x)
    upper = piecewise_drift(n, hat, x)
    return {
        "tilde": float(np.min((b - lower) / (1.0 + b))),
        "hat": float(np.min((upper - b) / (1.0 + b))),
    }
