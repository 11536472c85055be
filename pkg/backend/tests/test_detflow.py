"""Deterministic hitting times"""
import math

import pytest
from pydantic import ValidationError

from cutofflab.core.errors import DomainError, QuadFailure
from cutofflab.schemas.drift import DriftKind, DriftModel
from cutofflab.services.detflow import (
    _quad,
    c_hat,
    drift_sandwich_margin,
    hat_T_closed,
    hit_time,
    piecewise_drift,
    tilde_T_closed,
)


def test_n1_hitting_time_is_ln3():
    res = hit_time(1)
    assert res.T == pytest.approx(math.log(3.0), abs=1e-8)
    assert math.isnan(res.ratio)
    assert res.quad_error < 1e-8


@pytest.mark.parametrize("n", [100, 1000, 10_000])
def test_sandwich_by_piecewise_drifts(n):
    T = hit_time(n).T
    assert hat_T_closed(n, 6.0) <= T <= tilde_T_closed(n, 0.8, 0.5)


def test_ratio_decreasing_small_dims():
    ratios = [hit_time(n).ratio for n in (100, 1000, 10_000)]
    assert all(b < a for a, b in zip(ratios[:-1], ratios[1:]))
    assert 1.0 <= ratios[0] <= 1.6


@pytest.mark.slow
def test_ratio_trend_up_to_a_million():
    dims = [100, 1000, 10_000, 100_000, 1_000_000]
    ratios = [hit_time(n).ratio for n in dims]
    assert all(b < a for a, b in zip(ratios[:-1], ratios[1:]))
    assert 0.9 <= ratios[-1] <= 1.35
    for n in dims:
        T = hit_time(n).T
        assert hat_T_closed(n, 6.0) <= T <= tilde_T_closed(n, 0.8, 0.5)
    assert hit_time(1_000_000).quad_error < 1e-7


@pytest.mark.parametrize("model", [DriftModel.tilde(), DriftModel.hat()])
def test_quadrature_matches_closed_forms(model):
    n = 2000
    T = hit_time(n, model).T
    if model.kind == DriftKind.TILDE_LOWER:
        expected = tilde_T_closed(n, model.A, model.c_tilde)
    else:
        expected = hat_T_closed(n, model.A, c_hat(n, model.A), model.eps_A)
    assert T == pytest.approx(expected, rel=1e-7)


def test_piecewise_drifts_bracket_exact_drift():
    margins = drift_sandwich_margin(1000, DriftModel.tilde(), DriftModel.hat())
    assert margins["tilde"] >= -1e-9
    assert margins["hat"] >= -1e-9


def test_piecewise_drift_plateaus():
    n = 400
    tilde = DriftModel.tilde()
    assert piecewise_drift(n, tilde, math.pi / 2) == pytest.approx(0.5 * math.sqrt(n))
    hat = DriftModel.hat()
    assert piecewise_drift(n, hat, math.pi / 2) == pytest.approx(c_hat(n, 6.0) * math.sqrt(n))


def test_hat_model_fills_eps():
    assert DriftModel.hat(6.0).eps_A == pytest.approx(0.6733, abs=1e-3)
    with pytest.raises(ValidationError):
        DriftModel(kind=DriftKind.HAT_UPPER, A=6.0, eps_A=0.1)


def test_tilde_constant_must_stay_below_limit():
    with pytest.raises(ValidationError):
        DriftModel.tilde(A=0.8, c_tilde=0.9)
    with pytest.raises(ValidationError):
        DriftModel(kind=DriftKind.TILDE_LOWER, A=0.8)


def test_domain_errors():
    with pytest.raises(DomainError):
        tilde_T_closed(30, 6.0, 0.5)
    with pytest.raises(DomainError):
        hat_T_closed(36, 6.0)
    with pytest.raises(DomainError):
        hit_time(10, tol=1e-14)
    with pytest.raises(DomainError):
        hit_time(10, DriftModel.hat(6.0))


def test_quad_keeps_results_stopped_by_roundoff():
    def noisy(x):
        return 1.0 + 1e-13 * math.sin(1e9 * x)

    value, err = _quad(noisy, 0.0, 1.0, 0.0, 1e-15, accept=1e-9)
    assert value == pytest.approx(1.0, abs=1e-9)
    assert err <= 1e-9


def test_quad_rejects_divergent_integrand():
    with pytest.raises(QuadFailure):
        _quad(lambda x: 1.0 / x, 0.0, 1.0, 1e-12, 1e-10, accept=1e-9)
