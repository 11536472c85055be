"""
Numerical services of the cut-off laboratory
"""

from .specfun import (
    DriftEvaluator,
    GridFunction,
    JnSolution,
    LogValue,
    beta,
    bn,
    chi_family,
    eps_A,
    get_drift_evaluator,
    iota,
    radial_cdf,
    solve_Jn,
    varphi_prime,
    varphi_second,
)
from .detflow import c_hat, hat_T_closed, hit_time, piecewise_drift, tilde_T_closed
from .sde import sample_batch, simulate_direct, simulate_full_coupling, simulate_reflection
from .avatar import (
    Avatar,
    best_bounds,
    build_avatar,
    expectation_bounds,
    make_spec,
    necessity_analysis,
    tail_bounds,
    trivial_bounds,
)
from .stats import Ecdf, ks_against_radial_law, ks_two_sample, tail_probability, wilson_interval

__all__ = [
    "DriftEvaluator",
    "GridFunction",
    "JnSolution",
    "LogValue",
    "beta",
    "bn",
    "chi_family",
    "eps_A",
    "get_drift_evaluator",
    "iota",
    "radial_cdf",
    "solve_Jn",
    "varphi_prime",
    "varphi_second",
    "c_hat",
    "hat_T_closed",
    "hit_time",
    "piecewise_drift",
    "tilde_T_closed",
    "sample_batch",
    "simulate_direct",
    "simulate_full_coupling",
    "simulate_reflection",
    "Avatar",
    "best_bounds",
    "build_avatar",
    "expectation_bounds",
    "make_spec",
    "necessity_analysis",
    "tail_bounds",
    "trivial_bounds",
    "Ecdf",
    "ks_against_radial_law",
    "ks_two_sample",
    "tail_probability",
    "wilson_interval",
]
