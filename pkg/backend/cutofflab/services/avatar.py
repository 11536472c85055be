"""
Avatar functions and hitting-time bounds.

An avatar is a C^2 function psi on [0, pi] whose derivative dominates
(Plus) or is dominated by (Minus) phi_n' = 1/b_n and whose second derivative
is small. For such psi, Ito's formula applied to psi(R) gives

    E[tau] <= (psi(pi) - psi(0)) / (1 + min psi'')      (Plus)
    E[tau] >= (psi(pi) - psi(0)) / (1 + max psi'')      (Minus)

and a second-moment argument gives tail bounds.

The profiles are built in the window coordinate a = sqrt(n)(x - pi/2),
where b_n / sqrt(n) is close to beta(a). A profile P(a) with |P'| <= eps is
mollified with a compact bump kernel and mapped back by psi' = P / sqrt(n);
outside the window psi' = |tan x| / n.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from cutofflab.core.errors import (
    BracketFailure,
    DegenerateBound,
    DomainError,
    MembershipFailure,
    NoSolution,
)
from cutofflab.schemas.bounds import AvatarSpec, BoundReport, Side, TailRecord
from cutofflab.services.detflow import hit_time
from cutofflab.services.specfun import (
    HALF_PI,
    GridFunction,
    beta_prime,
    beta_second,
    chi_family,
    eps_A,
    get_drift_evaluator,
    q_of_beta,
    q_prime,
)

logger = logging.getLogger(__name__)

MEMBERSHIP_SLACK = 1e-9
SECOND_SLACK = 1e-6
CONSISTENCY_RTOL = 1e-6
RESOLVED_ULPS = 1e8


# ---------------------------------------------------------------------------
# Breakpoints of the asymptotic profile
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def find_beta_critical() -> float:
    """Unique zero of beta', which lies in (0, 1)"""
    lo, hi = 0.0, 1.0
    if not (beta_prime(lo) < 0 < beta_prime(hi)):
        raise BracketFailure("beta' does not change sign on [0, 1]")
    root = optimize.brentq(beta_prime, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    if not beta_second(root) > 0:
        raise BracketFailure(f"beta'' is not positive at a={root}")
    return float(root)


def _first_crossing(func: Callable[[float], float], start: float, direction: float, step: float, reach: float) -> float:
    """First sign change of func when walking from start; refined with brentq"""
    a_prev = start
    f_prev = func(a_prev)
    k = 1
    while k * step <= reach:
        a_next = start + direction * k * step
        f_next = func(a_next)
        if f_prev == 0.0:
            return a_prev
        if f_prev * f_next < 0:
            lo, hi = sorted((a_prev, a_next))
            return float(optimize.brentq(func, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))
        a_prev, f_prev = a_next, f_next
        k += 1
    raise NoSolution(f"no crossing within {reach} of a={start}")


def tangency_points(eps: float, scan_step: float = 0.01, reach: float = 10.0) -> Tuple[float, float]:
    """(a_minus, a_plus): nearest points around the critical point where |(1/beta)'| = eps"""
    if eps <= 0:
        raise NoSolution("eps must be positive")
    a0 = find_beta_critical()
    try:
        a_plus = _first_crossing(lambda a: q_prime(a) + eps, a0, +1.0, scan_step, reach)
        a_minus = _first_crossing(lambda a: q_prime(a) - eps, a0, -1.0, scan_step, reach)
    except NoSolution as e:
        raise NoSolution(f"eps={eps} has no tangency points: {e}") from e
    return a_minus, a_plus


def rejoin_points(eps: float) -> Tuple[float, float]:
    """(m_minus, m_plus): where the tangent lines of slope -/+ eps meet 1/|a|.

    Multiplying the line-meets-1/|m| equation by m leaves a quadratic; the
    outermost root is kept on each side.
    """
    a_minus, a_plus = tangency_points(eps)

    c = q_of_beta(a_plus) + eps * a_plus
    disc = c * c - 4.0 * eps
    if disc < 0:
        raise NoSolution(f"eps={eps}: right tangent line never meets 1/a")
    m_plus = (c + math.sqrt(disc)) / (2.0 * eps)

    d = q_of_beta(a_minus) - eps * a_minus
    disc = d * d - 4.0 * eps
    if disc < 0:
        raise NoSolution(f"eps={eps}: left tangent line never meets 1/|a|")
    m_minus = (-d - math.sqrt(disc)) / (2.0 * eps)

    if not (m_plus > a_plus and m_minus < min(a_minus, 0.0)):
        raise NoSolution(f"eps={eps}: rejoin points out of order")
    return float(m_minus), float(m_plus)


@dataclass(frozen=True)
class Breakpoints:
    eps: float
    a_beta_root: float
    a_minus: float
    a_plus: float
    m_minus: float
    m_plus: float

    @classmethod
    def of(cls, eps: float) -> "Breakpoints":
        a_minus, a_plus = tangency_points(eps)
        m_minus, m_plus = rejoin_points(eps)
        return cls(eps, find_beta_critical(), a_minus, a_plus, m_minus, m_plus)


@lru_cache(maxsize=64)
def breakpoints(eps: float) -> Breakpoints:
    return Breakpoints.of(eps)


def _line_profile(bp: Breakpoints, a: np.ndarray, outer: np.ndarray, m_lo: float, m_hi: float) -> np.ndarray:
    eps = bp.eps
    out = outer.copy()
    left = (a > m_lo) & (a < bp.a_minus)
    mid = (a >= bp.a_minus) & (a <= bp.a_plus)
    right = (a > bp.a_plus) & (a < m_hi)
    out[left] = q_of_beta(bp.a_minus) + eps * (a[left] - bp.a_minus)
    out[mid] = q_of_beta(a[mid])
    out[right] = q_of_beta(bp.a_plus) - eps * (a[right] - bp.a_plus)
    return out


def theta(eps: float, a):
    """Tangent-line upper envelope of 1/beta that rejoins 1/|a| at m_minus and m_plus"""
    bp = breakpoints(eps)
    arr = np.atleast_1d(np.asarray(a, dtype=float))
    with np.errstate(divide="ignore"):
        outer = 1.0 / np.abs(arr)
    out = _line_profile(bp, arr, outer, bp.m_minus, bp.m_plus)
    return float(out[0]) if np.ndim(a) == 0 else out


def theta_prime(eps: float, a):
    """Derivative of theta; the one-sided value from the left at the kinks"""
    bp = breakpoints(eps)
    arr = np.atleast_1d(np.asarray(a, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.sign(arr) / np.square(arr)
    out[(arr > bp.m_minus) & (arr < bp.a_minus)] = eps
    mid = (arr >= bp.a_minus) & (arr <= bp.a_plus)
    out[mid] = q_prime(arr[mid])
    out[(arr > bp.a_plus) & (arr < bp.m_plus)] = -eps
    return float(out[0]) if np.ndim(a) == 0 else out


def _max_abs_q_prime(a0: float) -> Tuple[float, float]:
    right = optimize.minimize_scalar(q_prime, bounds=(a0, a0 + 6.0), method="bounded",
                                     options={"xatol": 1e-10})
    left = optimize.minimize_scalar(lambda a: -q_prime(a), bounds=(a0 - 6.0, a0), method="bounded",
                                    options={"xatol": 1e-10})
    return float(-right.fun), float(-left.fun)


@lru_cache(maxsize=1)
def admissible_eps(samples: int = 40) -> Tuple[float, float]:
    """(eps0, eps1) found numerically.

    eps0 bounds the eps for which both tangency points exist. eps1 is the
    largest scanned eps below eps0 for which theta >= 1/beta on a grid
    three times wider than the rejoin points.
    """
    a0 = find_beta_critical()
    eps0 = min(_max_abs_q_prime(a0))
    eps1 = 0.0
    for eps in np.linspace(eps0, 0.0, samples + 1)[1:-1]:
        try:
            bp = breakpoints(float(eps))
        except NoSolution:
            continue
        reach = 3.0 * max(abs(bp.m_minus), bp.m_plus)
        a = np.linspace(-reach, reach, 20001)
        if np.all(theta(float(eps), a) >= q_of_beta(a) - 1e-12):
            eps1 = float(eps)
            break
    logger.info(f"Admissible eps: eps0={eps0:.6g}, eps1={eps1:.6g}")
    return eps0, eps1


def make_spec(eps: float, A: float = 6.0, mollify_width: Optional[float] = None,
              grid_density: int = 40, widen: bool = True) -> AvatarSpec:
    """AvatarSpec for eps; A is widened past the rejoin points when needed"""
    bp = breakpoints(eps)
    needed = max(abs(bp.m_minus), bp.m_plus)
    if A <= needed:
        if not widen:
            raise DomainError(f"A={A} must exceed {needed:.4g} for eps={eps}")
        widened = math.ceil((needed + 1.0) * 100.0) / 100.0
        logger.warning(f"Window A={A} is inside the rejoin points for eps={eps}; using A={widened}")
        A = widened
    return _spec_for(bp, A, mollify_width, grid_density)


def _spec_for(bp: Breakpoints, A: float, mollify_width: Optional[float], grid_density: int) -> AvatarSpec:
    points = [-A, bp.m_minus, bp.a_minus, bp.a_plus, bp.m_plus, A]
    gap = min(b - a for a, b in zip(points[:-1], points[1:]))
    eps = bp.eps
    return AvatarSpec(
        eps=eps,
        A=A,
        a_beta_root=bp.a_beta_root,
        a_minus=bp.a_minus,
        a_plus=bp.a_plus,
        m_minus=bp.m_minus,
        m_plus=bp.m_plus,
        mollify_width=gap / 8.0 if mollify_width is None else mollify_width,
        grid_density=grid_density,
    )


def widen_window(spec: AvatarSpec, A: float) -> AvatarSpec:
    """Copy of spec with a larger window; the mollifier width is kept"""
    if A <= spec.A:
        return spec
    logger.info(f"Widening avatar window from A={spec.A} to A={A}")
    return _spec_for(breakpoints(spec.eps), A, spec.mollify_width, spec.grid_density)


# ---------------------------------------------------------------------------
# Finite-n profiles
# ---------------------------------------------------------------------------

def _phi_n(n: int, a: np.ndarray) -> np.ndarray:
    """sqrt(n) f_n in window units: |cot(a/sqrt(n))| / sqrt(n)"""
    sqrt_n = math.sqrt(n)
    with np.errstate(divide="ignore"):
        return 1.0 / (sqrt_n * np.abs(np.tan(a / sqrt_n)))


def _finite_rejoin(n: int, bp: Breakpoints) -> Tuple[float, float]:
    """Rejoin points of the tangent lines with the finite-n outer profile"""
    eps = bp.eps
    edge = HALF_PI * math.sqrt(n)
    c = q_of_beta(bp.a_plus) + eps * bp.a_plus
    d = q_of_beta(bp.a_minus) - eps * bp.a_minus
    zero_plus, zero_minus = c / eps, -d / eps
    if zero_plus >= edge or -zero_minus >= edge:
        raise DomainError(f"n={n} too small: the tangent lines leave the window before rejoining")

    def gap_plus(m):
        return c - eps * m - _phi_n(n, np.array([m]))[0]

    def gap_minus(m):
        return d + eps * m - _phi_n(n, np.array([m]))[0]

    m_plus = optimize.brentq(gap_plus, bp.m_plus, zero_plus, xtol=1e-13)
    m_minus = optimize.brentq(gap_minus, zero_minus, bp.m_minus, xtol=1e-13)
    return float(m_minus), float(m_plus)


def _lipschitz_minorant(values: np.ndarray, slope: float, step: float) -> np.ndarray:
    """Largest function below values with |derivative| <= slope, on a uniform grid"""
    g = values.copy()
    rise = slope * step
    for i in range(1, g.size):
        g[i] = min(g[i], g[i - 1] + rise)
    for i in range(g.size - 2, -1, -1):
        g[i] = min(g[i], g[i + 1] + rise)
    return g


def _bump(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def _bump_prime(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti**2)) * (-2.0 * ti) / (1.0 - ti**2) ** 2
    return out


@lru_cache(maxsize=1)
def _bump_mass() -> float:
    return integrate.quad(lambda t: math.exp(-1.0 / (1.0 - t * t)), -1.0, 1.0, epsabs=1e-15)[0]


@dataclass
class Profile:
    """Mollified window profile P and P' on a uniform a-grid"""

    a: np.ndarray
    value: np.ndarray
    slope: np.ndarray


def _mollify(profile: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, width: float, density: int) -> Profile:
    da = width / density
    count = int(math.floor((hi - lo) / da)) + 1
    a = lo + da * np.arange(count)
    a_ext = lo - density * da + da * np.arange(count + 2 * density)
    P = profile(a_ext)

    t = np.arange(-density, density + 1) / density
    norm = 1.0 / (_bump_mass() * width)
    kernel = _bump(t) * norm * da
    kernel_prime = _bump_prime(t) * norm / width * da
    value = np.convolve(P, kernel, mode="valid")
    slope = np.convolve(P, kernel_prime, mode="valid")
    return Profile(a=a, value=value, slope=slope)


def _plus_profile(n: int, spec: AvatarSpec, bp: Breakpoints) -> Profile:
    m_minus_n, m_plus_n = _finite_rejoin(n, bp)
    lo = min(-spec.A, m_minus_n) - 2.0
    hi = max(spec.A, m_plus_n) + 2.0
    _check_fits(n, lo, hi, spec.mollify_width)

    def profile(a):
        return _line_profile(bp, a, _phi_n(n, a), m_minus_n, m_plus_n)

    return _mollify(profile, lo, hi, spec.mollify_width, spec.grid_density)


def _minus_profile(n: int, spec: AvatarSpec) -> Profile:
    w = spec.mollify_width
    da = w / spec.grid_density
    margin = 2.0
    for _ in range(6):
        lo, hi = -spec.A - margin, spec.A + margin
        _check_fits(n, lo - w, hi + w, 0.0)
        grid = np.arange(lo - w - da, hi + w + 2 * da, da)
        target = np.where(np.abs(grid) <= spec.A, q_of_beta(grid), _phi_n(n, grid))
        env = _lipschitz_minorant(target, spec.eps, da)
        ends = np.r_[env[:3] - target[:3], env[-3:] - target[-3:]]
        if np.all(np.abs(ends) <= 1e-15 * np.abs(np.r_[target[:3], target[-3:]])):
            break
        margin *= 2.0
    else:
        raise MembershipFailure(f"lower envelope did not rejoin the outer profile for n={n}")

    def profile(a):
        return np.interp(a, grid, env)

    return _mollify(profile, lo, hi, w, spec.grid_density)


def _check_fits(n: int, lo: float, hi: float, pad: float) -> None:
    edge = HALF_PI * math.sqrt(n)
    if lo - pad <= -edge or hi + pad >= edge:
        raise DomainError(f"n={n} too small for an avatar window [{lo:.4g}, {hi:.4g}]")


# ---------------------------------------------------------------------------
# Avatars
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Avatar:
    """psi, psi' and psi'' on [0, pi] before scaling; the member is scale * psi"""

    n: int
    side: Side
    spec: AvatarSpec
    psi: GridFunction
    psi_prime: GridFunction
    psi_second: GridFunction
    scale: float
    margin: float = float("nan")

    @property
    def grid(self) -> np.ndarray:
        return self.psi.grid

    @property
    def span(self) -> float:
        return self.scale * float(self.psi.values[-1] - self.psi.values[0])

    @property
    def raw_span(self) -> float:
        return float(self.psi.values[-1] - self.psi.values[0])

    @property
    def min_second(self) -> float:
        return self.scale * float(np.min(self.psi_second.values))

    @property
    def max_second(self) -> float:
        return self.scale * float(np.max(self.psi_second.values))

    @property
    def cubic_integral(self) -> float:
        cube = (self.scale * self.psi_prime.values) ** 3
        return float(integrate.simpson(cube, x=self.grid))

    @property
    def boundary_slope(self) -> float:
        """Limit of scale * psi'(x) / x at 0+"""
        return self.scale / self.n

    def member_prime(self, x):
        return self.scale * np.asarray(self.psi_prime(x))

    def tail_record(self) -> TailRecord:
        return TailRecord(
            side=self.side,
            span=self.span,
            min_second=self.min_second,
            max_second=self.max_second,
            cubic_integral=self.cubic_integral,
        )


def _outer_grid(x_seam: float, left: bool, points: int = 3000) -> np.ndarray:
    """Abscissae between an endpoint of [0, pi] and a window seam"""
    length = x_seam if left else math.pi - x_seam
    near_end = np.geomspace(1e-9 * length, length, points)
    near_seam = length - np.geomspace(1e-6 * length, length, points)
    d = np.unique(np.concatenate([[0.0], near_end, near_seam]))
    d = d[(d >= 0.0) & (d < length)]
    return d if left else math.pi - d[::-1]


def _assemble(n: int, prof: Profile) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    sqrt_n = math.sqrt(n)
    x_in = HALF_PI + prof.a / sqrt_n
    x_left = _outer_grid(float(x_in[0]), left=True)
    x_right = _outer_grid(float(x_in[-1]), left=False)
    x_right = x_right[x_right > x_in[-1]]

    c_left, c_right = np.cos(x_left), np.cos(x_right)
    p_left = np.tan(x_left) / n
    s_left = 1.0 / (n * c_left * c_left)
    p_right = -np.tan(x_right) / n
    s_right = -1.0 / (n * c_right * c_right)
    p_right[-1] = 0.0
    p_left[0] = 0.0

    x = np.concatenate([x_left, x_in, x_right])
    p = np.concatenate([p_left, prof.value / sqrt_n, p_right])
    s = np.concatenate([s_left, prof.slope, s_right])
    keep = np.concatenate([[True], np.diff(x) > 0])
    return x[keep], p[keep], s[keep]


def _cumulative(x: np.ndarray, p: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Hermite trapezoid rule, exact when psi' is cubic on each cell"""
    h = np.diff(x)
    cells = 0.5 * h * (p[:-1] + p[1:]) + h * h / 12.0 * (s[:-1] - s[1:])
    return np.concatenate([[0.0], np.cumsum(cells)])


def _consistency(psi: GridFunction, psi_prime: GridFunction) -> float:
    """Relative gap between d/dx of the psi spline and psi' at cell midpoints.

    Only cells whose psi increment is resolved to ~1e-8 in floating point are
    compared; near pi the increments sink below the spacing of psi itself.
    """
    x = psi.grid
    increments = np.diff(psi.values)
    resolved = increments > RESOLVED_ULPS * np.spacing(np.abs(psi.values[1:]))
    if not np.any(resolved):
        return 0.0
    mid = (0.5 * (x[1:] + x[:-1]))[resolved]
    d_psi = psi.derivative(mid)
    ref = psi_prime(mid)
    floor = 1e-14 * float(np.max(np.abs(psi_prime.values)))
    return float(np.max(np.abs(d_psi - ref) / (np.abs(ref) + floor)))


def build_avatar(n: int, spec: AvatarSpec, side: Side, check_membership: bool = True) -> Avatar:
    """Construct psi_{n,+} or psi_{n,-} and verify its class membership.

    Raises:
        DomainError: if n <= A^2 or the window does not fit in (0, pi).
        MembershipFailure: with the offending x and margin.
    """
    if n <= spec.A**2:
        raise DomainError(f"need n > A^2 = {spec.A**2:.4g}, got n={n}")
    side = Side(side)
    bp = breakpoints(spec.eps)

    prof = _plus_profile(n, spec, bp) if side == Side.PLUS else _minus_profile(n, spec)
    x, p, s = _assemble(n, prof)
    values = _cumulative(x, p, s)

    psi = GridFunction(x, values, slopes=p, rule="hermite")
    psi_prime = GridFunction(x, p, slopes=s, rule="hermite")
    psi_second = GridFunction(x, s, rule="pchip")

    eps = spec.eps
    if side == Side.PLUS:
        scale = 1.0 / (1.0 - eps)
    else:
        scale = 1.0 / ((1.0 + eps_A(spec.A)[2]) * (1.0 + eps))

    interior = p[1:-1]
    if np.any(interior <= 0):
        bad = x[1:-1][np.argmin(interior)]
        raise MembershipFailure(f"psi' is not positive at x={bad:.6g}", x=float(bad), margin=float(interior.min()))
    sup_second = float(np.max(np.abs(s)))
    if sup_second > eps * (1.0 + eps) + SECOND_SLACK:
        x_bad = float(x[np.argmax(np.abs(s))])
        raise MembershipFailure(
            f"sup |psi''| = {sup_second:.6g} exceeds eps(1+eps) at x={x_bad:.6g}", x=x_bad, margin=sup_second
        )
    err = _consistency(psi, psi_prime)
    if err > CONSISTENCY_RTOL:
        raise MembershipFailure(f"psi and psi' disagree by {err:.3g} relative")

    avatar = Avatar(n=n, side=side, spec=spec, psi=psi, psi_prime=psi_prime, psi_second=psi_second, scale=scale)
    if check_membership:
        avatar.margin = membership_margin(avatar)
    logger.info(
        f"Built {side.value} avatar n={n} eps={eps} A={spec.A}: span={avatar.span:.6g}, "
        f"margin={avatar.margin:.3g}, {x.size} abscissae"
    )
    return avatar


def membership_margin(av: Avatar, check_points: int = 10_000) -> float:
    """Smallest gap between scaled psi' and phi_n' (signed so that >= 0 means member)"""
    ev = get_drift_evaluator(av.n)
    uniform = np.linspace(0.0, math.pi, check_points + 2)[1:-1]
    x = np.unique(np.concatenate([av.grid[1:-1], uniform]))
    member = av.member_prime(x)
    phi = ev.phi_prime(x)
    gap = member - phi if av.side == Side.PLUS else phi - member
    i = int(np.argmin(gap))
    if gap[i] < -MEMBERSHIP_SLACK:
        raise MembershipFailure(
            f"{av.side.value} avatar n={av.n} fails domination at x={x[i]:.8g} (margin {gap[i]:.3g})",
            x=float(x[i]),
            margin=float(gap[i]),
        )
    return float(gap[i])


def build_avatar_pair(n: int, spec: AvatarSpec) -> Tuple[Avatar, Avatar]:
    return build_avatar(n, spec, Side.PLUS), build_avatar(n, spec, Side.MINUS)


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

def _phi_grid(n: int) -> np.ndarray:
    """Abscissae resolving phi_n on (0, pi): both ends and the central window"""
    sqrt_n = math.sqrt(n)
    width = min(16.0 / sqrt_n, 0.9 * HALF_PI)
    ends = np.geomspace(1e-9, HALF_PI - width, 4000)
    core = HALF_PI + np.linspace(-width, width, 16001)
    x = np.concatenate([ends, core, math.pi - ends])
    return np.unique(x)


@lru_cache(maxsize=64)
def _trivial_record(n: int) -> Tuple[float, float, float, float]:
    ev = get_drift_evaluator(n)
    x = _phi_grid(n)
    second = ev.phi_second(x)
    cube = integrate.simpson(ev.phi_prime(x) ** 3, x=x)
    span = hit_time(n).T
    return span, float(second.min()), float(second.max()), float(cube)


def trivial_bounds(n: int) -> Tuple[float, float, TailRecord, TailRecord]:
    """Bounds obtained with psi = phi_n itself, valid for every n"""
    span, lo2, hi2, cube = _trivial_record(n)
    if 1.0 + lo2 <= 0 or 1.0 + hi2 <= 0:
        raise DegenerateBound(f"phi_n'' reaches -1 for n={n}")
    upper = TailRecord(side=Side.PLUS, span=span, min_second=lo2, max_second=hi2, cubic_integral=cube)
    lower = TailRecord(side=Side.MINUS, span=span, min_second=lo2, max_second=hi2, cubic_integral=cube)
    return span / (1.0 + hi2), span / (1.0 + lo2), upper, lower


def expectation_bounds(plus: Avatar, minus: Avatar, include_trivial: bool = True) -> BoundReport:
    """lb = span(minus)/(1 + max psi''), ub = span(plus)/(1 + min psi'')"""
    if plus.n != minus.n:
        raise DomainError("avatars belong to different n")
    for av in (plus, minus):
        if not (math.isfinite(av.margin) and av.margin >= -MEMBERSHIP_SLACK):
            raise MembershipFailure(
                f"{av.side.value} avatar n={av.n} was not checked for membership (margin {av.margin})",
                margin=av.margin,
            )
        if 1.0 + av.min_second <= 0:
            raise DegenerateBound(f"{av.side.value} avatar has min psi'' <= -1")
    if 1.0 + minus.max_second <= 0:
        raise DegenerateBound("minus avatar has max psi'' <= -1")

    ub = plus.span / (1.0 + plus.min_second)
    lb = minus.span / (1.0 + minus.max_second)
    report = dict(
        n=plus.n,
        eps=plus.spec.eps,
        A=plus.spec.A,
        lb=lb,
        ub=ub,
        family="avatar",
        tail_upper=plus.tail_record(),
        tail_lower=minus.tail_record(),
        membership_margins={"plus": plus.margin, "minus": minus.margin},
        max_second_condition={
            "plus_min": 1.0 + plus.min_second > 0,
            "minus_min": 1.0 + minus.min_second > 0,
            "minus_max": 1.0 + minus.max_second > 0,
        },
    )
    if include_trivial:
        t_lb, t_ub, _, _ = trivial_bounds(plus.n)
        report.update(trivial_lb=t_lb, trivial_ub=t_ub)
    return BoundReport(**report)


def trivial_report(n: int) -> BoundReport:
    t_lb, t_ub, upper, lower = trivial_bounds(n)
    return BoundReport(n=n, lb=t_lb, ub=t_ub, family="trivial", tail_upper=upper, tail_lower=lower,
                       membership_margins={"plus": 0.0, "minus": 0.0}, trivial_lb=t_lb, trivial_ub=t_ub)


def best_bounds(n: int, eps: float = 0.05, A: float = 6.0) -> BoundReport:
    """Avatar bounds where they can be built, the trivial pair elsewhere; tightest valid pair.

    Only a window that does not fit (n <= A^2) falls back to the trivial pair;
    a MembershipFailure propagates.
    """
    spec = make_spec(eps, A)
    t_lb, t_ub, t_upper, t_lower = trivial_bounds(n)
    plus = minus = None
    try:
        plus = build_avatar(n, spec, Side.PLUS)
    except DomainError as e:
        logger.warning(f"Plus avatar unavailable for n={n}: {e}")
    try:
        minus = build_avatar(n, spec, Side.MINUS)
    except DomainError as e:
        logger.warning(f"Minus avatar unavailable for n={n}: {e}")

    ub, tail_upper, lb, tail_lower = t_ub, t_upper, t_lb, t_lower
    margins = {"plus": 0.0, "minus": 0.0}
    used = set()
    if plus is not None and 1.0 + plus.min_second > 0:
        cand = plus.span / (1.0 + plus.min_second)
        margins["plus"] = plus.margin
        if cand < ub:
            ub, tail_upper = cand, plus.tail_record()
            used.add("plus")
    if minus is not None and 1.0 + minus.max_second > 0:
        cand = minus.span / (1.0 + minus.max_second)
        margins["minus"] = minus.margin
        if cand > lb:
            lb, tail_lower = cand, minus.tail_record()
            used.add("minus")
    family = {0: "trivial", 1: "mixed", 2: "avatar"}[len(used)]
    return BoundReport(n=n, eps=spec.eps, A=spec.A, lb=lb, ub=ub, family=family,
                       tail_upper=tail_upper, tail_lower=tail_lower, membership_margins=margins,
                       trivial_lb=t_lb, trivial_ub=t_ub)


def tail_bounds(av: Avatar, r: float) -> Tuple[float, float]:
    """(bound, threshold): P[tau > threshold] <= bound (Plus) or P[tau < threshold] <= bound (Minus)"""
    record = av.tail_record()
    return record.bound(r), record.threshold(r)


def tail_bound_at(av: Avatar, t: float) -> float:
    return av.tail_record().bound_at(t)


def tail_bound_corollary(av: Avatar, r: float) -> float:
    """Bound at displacement r/2, four times the raw r-bound"""
    return av.tail_record().bound(0.5 * r)


# ---------------------------------------------------------------------------
# Necessity of the avatar construction
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def find_chi_root() -> float:
    """Zero of xi in (1, 2), the minimiser of chi"""
    xi = lambda a: chi_family(a).xi  # noqa: E731
    if not (xi(1.0) > 0 > xi(2.0)):
        raise BracketFailure("xi does not change sign on [1, 2]")
    return float(optimize.brentq(xi, 1.0, 2.0, xtol=1e-14, rtol=4 * np.finfo(float).eps))


def min_phi_second(n: int, left_half_only: bool = False) -> Tuple[float, float]:
    """(argmin, min) of phi_n'' over [0, pi] or [0, pi/2]"""
    ev = get_drift_evaluator(n)
    x = _phi_grid(n)
    if left_half_only:
        x = x[x <= HALF_PI]
    values = ev.phi_second_closed(x)
    i = int(np.argmin(values))
    lo = x[max(i - 1, 0)]
    hi = x[min(i + 1, x.size - 1)]
    if 0 < lo < hi < math.pi:
        res = optimize.minimize_scalar(ev.phi_second, bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
        if res.fun < values[i]:
            return float(res.x), float(res.fun)
    return float(x[i]), float(values[i])


def necessity_analysis(n_list: Sequence[int]) -> Dict[str, object]:
    """Limit of min phi_n'' against chi at its minimiser"""
    a_chi = find_chi_root()
    chi_min = float(chi_family(a_chi).chi)
    rows: List[Dict[str, float]] = []
    for n in n_list:
        x_star, m_full = min_phi_second(n)
        _, m_left = min_phi_second(n, left_half_only=True)
        rows.append({
            "n": int(n),
            "argmin_a": math.sqrt(n) * (x_star - HALF_PI),
            "min_phi_second": m_full,
            "min_left_half": m_left,
            "rel_gap": abs(m_full - chi_min) / abs(chi_min),
        })
    logger.info(f"a_chi={a_chi:.12g}, chi(a_chi)={chi_min:.12g}")
    return {"a_chi": a_chi, "chi_min": chi_min, "in_interval": -5.0 / 11.0 <= chi_min <= -1.0 / 7.0, "rows": rows}
