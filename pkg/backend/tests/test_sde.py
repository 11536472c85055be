"""Monte Carlo sampling of the hitting time"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from cutofflab.core.errors import StepBudgetExceeded
from cutofflab.schemas.simulation import Coupling, SimConfig, SimOptions, TauSample
from cutofflab.services.avatar import trivial_bounds
from cutofflab.services.sde import (
    RadialPathEngine,
    kickoff,
    path_generator,
    sample_batch,
    simulate_direct,
    simulate_full_coupling,
    simulate_reflection,
)
from cutofflab.services.stats import cutoff_profile, ks_against_radial_law, ks_two_sample


def test_path_streams_are_reproducible_and_distinct():
    a = path_generator(7, 3).standard_normal(5)
    b = path_generator(7, 3).standard_normal(5)
    c = path_generator(7, 4).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_kickoff_matches_chi_square_mean():
    n, dt0 = 20, 1e-4
    rng = np.random.default_rng(11)
    draws = np.array([kickoff(n, dt0, rng) for _ in range(5000)])
    scaled = draws**2 / (2 * dt0)
    assert np.all(draws > 0)
    assert scaled.mean() == pytest.approx(n + 3, rel=0.03)


def test_default_policy_respects_kickoff_limit():
    cfg = SimConfig.for_n(1000)
    assert math.sqrt(2 * cfg.kickoff_dt * (cfg.n + 3)) < 0.1
    assert cfg.dt_base <= cfg.kickoff_dt
    with pytest.raises(ValidationError):
        SimConfig(n=1000, dt_base=1e-4, kickoff_dt=1e-4)
    with pytest.raises(ValidationError):
        SimConfig.for_n(10, delta_max=0.5)


def test_sim_options_build_configs():
    cfg = SimOptions(coupling=Coupling.REFLECTION, dt_scale=0.5).to_config(100)
    assert cfg.coupling == Coupling.REFLECTION
    assert cfg.dt_base == pytest.approx(0.25 * cfg.kickoff_dt)


def test_batch_is_independent_of_workers_and_chunks():
    cfg = SimConfig.for_n(30)
    base = sample_batch(cfg, 12, 99, threads=1, chunk_size=12)
    other = sample_batch(cfg, 12, 99, threads=4, chunk_size=5)
    assert base.values == other.values
    assert base.steps == other.steps


def test_single_path_matches_batch_entry():
    cfg = SimConfig.for_n(30)
    batch = sample_batch(cfg, 4, 5, threads=2, chunk_size=2)
    assert simulate_direct(cfg, 2, 5) == batch.values[2]


def test_coupled_systems_report_their_extras():
    full = SimConfig.for_n(20, Coupling.FULL_COUPLING)
    tau, rho = simulate_full_coupling(full, 0, 3)
    assert tau > 0
    assert 0.0 <= rho <= math.pi

    refl = SimConfig.for_n(20, Coupling.REFLECTION)
    sample = sample_batch(refl, 6, 3, threads=2)
    assert sample.pushed is not None and min(sample.pushed) >= 0.0
    assert sample.rho_at_tau is None
    assert simulate_reflection(refl, 0, 3) == sample.values[0]


def test_coupling_mismatch_is_rejected():
    with pytest.raises(ValueError):
        simulate_direct(SimConfig.for_n(20, Coupling.REFLECTION), 0, 1)


def test_step_budget_reports_every_failed_path():
    cfg = SimConfig.for_n(20, max_steps=3)
    with pytest.raises(StepBudgetExceeded) as info:
        sample_batch(cfg, 5, 1, threads=2, chunk_size=2)
    assert sorted(info.value.path_indices) == [0, 1, 2, 3, 4]


def test_tau_sample_rejects_bad_values():
    cfg = SimConfig.for_n(10)
    with pytest.raises(ValidationError):
        TauSample(n=10, coupling=Coupling.DIRECT, master_seed=1, config=cfg, values=[0.1, float("nan")], steps=[1, 1])
    with pytest.raises(ValidationError):
        TauSample(n=10, coupling=Coupling.DIRECT, master_seed=2**64, config=cfg, values=[0.1], steps=[1])


@pytest.mark.slow
def test_mean_is_bracketed_by_trivial_bounds():
    n = 10
    lb, ub, _, _ = trivial_bounds(n)
    sample = sample_batch(SimConfig.for_n(n), 800, 2024)
    se = sample.std_error
    assert lb - 3 * se <= sample.mean <= ub + 3 * se


def test_reflected_radius_never_drops_below_rho():
    engine = RadialPathEngine(SimConfig.for_n(20, Coupling.REFLECTION))
    gaps, pushed = [], []

    def observe(state, live):
        if live.size:
            gaps.append(float(np.min(state.r[live] - state.rho[live])))
        pushed.append(state.pushed.copy())

    res = engine.run(np.arange(6), 17, observer=observe)
    assert not res.failed
    assert min(gaps) >= 0.0
    assert np.all(np.diff(np.array(pushed), axis=0) >= 0.0)
    assert np.all(res.pushed > 0.0)


@pytest.mark.slow
def test_couplings_share_one_law():
    n, N = 50, 1000
    direct = sample_batch(SimConfig.for_n(n), N, 11)
    full = sample_batch(SimConfig.for_n(n, Coupling.FULL_COUPLING), N, 12)
    refl = sample_batch(SimConfig.for_n(n, Coupling.REFLECTION), N, 13)
    for a, b in ((direct, full), (direct, refl), (full, refl)):
        assert ks_two_sample(a.values, b.values).p_value > 1e-3
    assert ks_against_radial_law(full.rho_at_tau, n).p_value > 1e-3


@pytest.mark.slow
def test_mean_is_stable_when_the_step_halves():
    n, N = 20, 2000
    coarse = sample_batch(SimOptions(dt_scale=1.0).to_config(n), N, 5)
    fine = sample_batch(SimOptions(dt_scale=0.5).to_config(n), N, 6)
    se = math.hypot(coarse.std_error, fine.std_error)
    assert abs(coarse.mean - fine.mean) <= 4.0 * se + 0.02 * fine.mean
    lb, ub, _, _ = trivial_bounds(n)
    assert lb - 4.0 * fine.std_error <= fine.mean <= ub + 4.0 * fine.std_error


@pytest.mark.slow
def test_tails_around_the_cutoff_shrink_with_n():
    samples = {n: sample_batch(SimConfig.for_n(n), 2000, 40 + n).values for n in (20, 100, 500)}
    frame = cutoff_profile(samples, [0.5])
    for side in ("upper", "lower"):
        p, hi = frame[side].tolist(), frame[f"{side}_hi"].tolist()
        assert all(b <= a_hi for a_hi, b in zip(hi[:-1], p[1:]))
