"""Avatar construction and the hitting-time bounds"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from cutofflab.core.errors import DomainError, HypothesisViolated, MembershipFailure, NoSolution
from cutofflab.schemas.bounds import AvatarSpec, Side, TailRecord
from cutofflab.schemas.simulation import SimConfig
from cutofflab.services.avatar import (
    CONSISTENCY_RTOL,
    MEMBERSHIP_SLACK,
    RESOLVED_ULPS,
    _consistency,
    admissible_eps,
    best_bounds,
    build_avatar,
    expectation_bounds,
    find_beta_critical,
    find_chi_root,
    make_spec,
    min_phi_second,
    necessity_analysis,
    rejoin_points,
    tail_bound_at,
    tail_bound_corollary,
    tail_bounds,
    tangency_points,
    theta,
    theta_prime,
    trivial_bounds,
    widen_window,
)
from cutofflab.services.detflow import hit_time
from cutofflab.services.sde import sample_batch
from cutofflab.services.specfun import beta, beta_prime, chi_family, q_of_beta, q_prime

EPS = 0.05


@pytest.fixture(scope="module")
def spec():
    return make_spec(EPS, 6.0)


@pytest.fixture(scope="module")
def pair(spec):
    n = 10_000
    return build_avatar(n, spec, Side.PLUS), build_avatar(n, spec, Side.MINUS)


def test_beta_critical_point():
    a0 = find_beta_critical()
    assert 0.0 < a0 < 1.0
    assert abs(beta_prime(a0)) < 1e-10
    assert beta(a0) < beta(0.0)


@pytest.mark.parametrize("eps", [0.02, 0.05])
def test_tangency_points(eps):
    a_minus, a_plus = tangency_points(eps)
    a0 = find_beta_critical()
    assert a_minus < a0 < a_plus
    assert q_prime(a_plus) == pytest.approx(-eps, abs=1e-10)
    assert q_prime(a_minus) == pytest.approx(eps, abs=1e-10)
    coarse = tangency_points(eps, scan_step=0.02)
    assert coarse == pytest.approx((a_minus, a_plus), abs=1e-10)


def test_tangency_needs_small_eps():
    eps0, _ = admissible_eps()
    with pytest.raises(NoSolution):
        tangency_points(2.0 * eps0)
    with pytest.raises(NoSolution):
        tangency_points(0.0)


def test_admissible_eps_range():
    eps0, eps1 = admissible_eps()
    assert EPS < eps0
    assert 0.0 < eps1 <= eps0


@pytest.mark.parametrize("eps", [0.02, 0.05])
def test_theta_is_continuous_at_rejoin_points(eps):
    m_minus, m_plus = rejoin_points(eps)
    for m in (m_minus, m_plus):
        inside = theta(eps, m - 1e-9 * np.sign(m))
        assert inside == pytest.approx(1.0 / abs(m), rel=1e-6)


@pytest.mark.parametrize("eps", [0.02, 0.05])
def test_theta_dominates_q(eps):
    m_minus, m_plus = rejoin_points(eps)
    reach = 3.0 * (max(abs(m_minus), m_plus) + 1.0)
    a = np.linspace(-reach, reach, 40_001)
    assert np.all(theta(eps, a) >= q_of_beta(a) - 1e-12)
    assert np.max(np.abs(theta_prime(eps, a))) <= eps + 1e-12


def test_make_spec_widens_narrow_window(spec):
    assert spec.A > max(abs(spec.m_minus), spec.m_plus)
    assert spec.mollify_width < spec.min_gap() / 4
    with pytest.raises(DomainError):
        make_spec(EPS, 6.0, widen=False)
    wider = widen_window(spec, spec.A + 2.0)
    assert wider.A == spec.A + 2.0
    assert wider.mollify_width == spec.mollify_width
    with pytest.raises(ValidationError):
        AvatarSpec(**{**spec.model_dump(), "A": 1.0})


def test_small_n_is_outside_the_window(spec):
    with pytest.raises(DomainError):
        build_avatar(50, spec, Side.PLUS)


def test_avatar_integrity(pair, spec):
    plus, minus = pair
    for av in pair:
        assert av.margin >= -MEMBERSHIP_SLACK
        assert np.max(np.abs(av.psi_second.values)) <= EPS * (1 + EPS) + 1e-6
        assert av.psi.values[0] == 0.0
        assert np.all(av.psi_prime.values[1:-1] > 0)
        assert av.boundary_slope <= 1.0
    T = hit_time(plus.n).T
    assert minus.span <= T <= plus.span


def test_expectation_bounds_bracket_deterministic_time(pair):
    plus, minus = pair
    report = expectation_bounds(plus, minus)
    T = hit_time(plus.n).T
    assert report.lb <= report.ub
    assert report.family == "avatar"
    assert all(report.max_second_condition.values())
    assert report.trivial_lb <= T <= report.trivial_ub
    assert report.ub == pytest.approx(plus.span / (1 + plus.min_second))


def test_tail_bounds(pair):
    plus, _ = pair
    bound, threshold = tail_bounds(plus, 0.5)
    record = plus.tail_record()
    assert threshold == pytest.approx(1.5 * record.base_time)
    assert tail_bound_corollary(plus, 0.5) == pytest.approx(4.0 * bound)
    assert tail_bound_at(plus, 0.5 * record.base_time) == 1.0
    assert tail_bound_at(plus, threshold) == pytest.approx(min(1.0, bound))


def test_tail_record_needs_second_derivative_above_third():
    record = TailRecord(side=Side.PLUS, span=1.0, min_second=-0.5, max_second=0.1, cubic_integral=1.0)
    with pytest.raises(HypothesisViolated):
        record.bound(0.5)
    assert record.bound_at(2.0 * record.base_time) == 1.0


def test_cubic_integral_decays():
    spec = make_spec(EPS, 6.0)
    scaled = []
    for n in (1000, 10_000, 100_000, 1_000_000):
        av = build_avatar(n, spec, Side.PLUS, check_membership=False)
        scaled.append(n**2 / math.log(n) ** 2 * av.cubic_integral)
    assert all(b < a for a, b in zip(scaled[:-1], scaled[1:]))


@pytest.mark.parametrize("n", [2, 50, 1000])
def test_trivial_bounds_bracket(n):
    lb, ub, upper, lower = trivial_bounds(n)
    T = hit_time(n).T
    assert lb < T < ub
    assert upper.span == lower.span == pytest.approx(T)


def test_best_bounds_falls_back_for_small_n():
    report = best_bounds(50, EPS, 6.0)
    assert report.family == "trivial"
    assert report.lb == report.trivial_lb


def test_chi_root():
    a_chi = find_chi_root()
    assert 1.0 < a_chi < 2.0
    assert abs(chi_family(a_chi).xi) < 1e-10
    assert -5.0 / 11.0 <= chi_family(a_chi).chi <= -1.0 / 7.0


@pytest.mark.parametrize("n", [100, 1000])
def test_phi_convex_on_left_half(n):
    _, value = min_phi_second(n, left_half_only=True)
    assert value >= -1e-8


@pytest.mark.slow
def test_minimum_of_phi_second_approaches_chi():
    result = necessity_analysis([100_000])
    assert result["in_interval"]
    assert result["rows"][0]["rel_gap"] <= 0.05


@pytest.mark.parametrize("n", [1000, 10_000])
def test_both_avatars_are_members_at_moderate_n(spec, n):
    for side in (Side.PLUS, Side.MINUS):
        av = build_avatar(n, spec, side)
        assert av.margin >= -MEMBERSHIP_SLACK


def test_consistency_skips_cells_below_float_resolution(spec):
    av = build_avatar(1_000_000, spec, Side.PLUS, check_membership=False)
    values = av.psi.values
    unresolved = np.diff(values) <= RESOLVED_ULPS * np.spacing(np.abs(values[1:]))
    assert np.any(unresolved)
    assert _consistency(av.psi, av.psi_prime) <= CONSISTENCY_RTOL


def test_best_bounds_uses_avatars_once_the_window_fits():
    report = best_bounds(10_000, EPS, 6.0)
    assert report.family != "trivial"
    assert report.lb <= hit_time(10_000).T <= report.ub
    assert min(report.membership_margins.values()) >= -MEMBERSHIP_SLACK


def test_best_bounds_does_not_hide_membership_failures(monkeypatch):
    def failing(av, check_points=10_000):
        raise MembershipFailure("domination fails", x=1.0, margin=-1e-3)

    monkeypatch.setattr("cutofflab.services.avatar.membership_margin", failing)
    with pytest.raises(MembershipFailure):
        best_bounds(10_000, EPS, 6.0)


def test_expectation_bounds_need_checked_avatars(spec):
    plus = build_avatar(10_000, spec, Side.PLUS, check_membership=False)
    minus = build_avatar(10_000, spec, Side.MINUS, check_membership=False)
    with pytest.raises(MembershipFailure):
        expectation_bounds(plus, minus)


@pytest.mark.slow
def test_monte_carlo_mean_inside_avatar_bounds():
    n = 1000
    report = best_bounds(n, EPS, 6.0)
    assert report.family != "trivial"
    sample = sample_batch(SimConfig.for_n(n), 1500, 77)
    se = sample.std_error
    assert report.lb - 3 * se <= sample.mean <= report.ub + 3 * se
