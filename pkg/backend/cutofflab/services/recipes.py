"""
End-to-end reproduction recipes.

Each recipe computes a table, a JSON summary and a list of named checks;
reproduce() writes <recipe>.csv and <recipe>.json and returns the result.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from cutofflab.core.errors import UsageError
from cutofflab.schemas.bounds import TailRecord
from cutofflab.schemas.drift import DriftModel
from cutofflab.schemas.run_config import Recipe, RunConfig
from cutofflab.schemas.simulation import Coupling, SimOptions, TauSample
from cutofflab.services import artifacts
from cutofflab.services.avatar import (
    best_bounds,
    build_avatar_pair,
    make_spec,
    necessity_analysis,
    trivial_bounds,
)
from cutofflab.services.detflow import hat_T_closed, hit_time, tilde_T_closed
from cutofflab.services.sde import sample_batch
from cutofflab.services.stats import (
    ks_against_radial_law,
    ks_two_sample,
    mean_with_ci,
    tail_probability,
)

logger = logging.getLogger(__name__)

TILDE_A = 0.8
TILDE_C = 0.5
HAT_A = 6.0
KS_LEVEL = 0.01
KS_MIN_PATHS = 500
NO_BOUND = "NOBOUND"


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    status: Optional[str] = None

    def line(self, recipe: str) -> str:
        status = self.status or ("PASS" if self.passed else "FAIL")
        return f"{status} {recipe}/{self.name}" + (f": {self.detail}" if self.detail else "")


@dataclass
class RecipeResult:
    recipe: Recipe
    table: pd.DataFrame
    summary: Dict[str, object] = field(default_factory=dict)
    checks: List[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> List[str]:
        return [c.line(self.recipe.value) for c in self.checks]


def _dims(config: RunConfig, default: Sequence[int]) -> List[int]:
    return config.dims() or list(default)


def _non_increasing(values: Sequence[float], slack: float = 0.0) -> bool:
    return all(b <= a + slack for a, b in zip(values[:-1], values[1:]))


def _sample(config: RunConfig, n: int, paths: int, coupling: Coupling = Coupling.DIRECT,
            seed_offset: int = 0) -> TauSample:
    options = SimOptions(**{**config.sim.model_dump(), "coupling": coupling})
    return sample_batch(options.to_config(n), paths, config.master_seed + seed_offset)


def theorem2(config: RunConfig) -> RecipeResult:
    """n T_n / ln n for the exact drift, sandwiched by the piecewise drifts"""
    rows = []
    for n in _dims(config, [100, 1000, 10_000, 100_000, 1_000_000]):
        exact = hit_time(n, DriftModel.exact(), config.tol)
        T_tilde = tilde_T_closed(n, TILDE_A, TILDE_C)
        T_hat = hat_T_closed(n, HAT_A)
        rows.append({
            "n": n,
            "T": exact.T,
            "ratio": exact.ratio,
            "quad_error": exact.quad_error,
            "T_hat": T_hat,
            "T_tilde": T_tilde,
            "ratio_hat": T_hat * n / math.log(n),
            "ratio_tilde": T_tilde * n / math.log(n),
        })
    table = pd.DataFrame(rows)

    ratios = table["ratio"].tolist()
    checks = [
        Check("ratio_decreasing", all(b < a for a, b in zip(ratios[:-1], ratios[1:])),
              ", ".join(f"{r:.6f}" for r in ratios)),
        Check("sandwich", bool(np.all((table["T_hat"] <= table["T"]) & (table["T"] <= table["T_tilde"])))),
    ]
    bands = {100: (1.0, 1.6), 1_000_000: (0.9, 1.35)}
    for n, (lo, hi) in bands.items():
        hit = table[table["n"] == n]
        if len(hit):
            r = float(hit["ratio"].iloc[0])
            checks.append(Check(f"ratio_band_n{n}", lo <= r <= hi, f"{r:.6f} in [{lo}, {hi}]"))
    return RecipeResult(Recipe.THEOREM2, table, {"rows": rows}, checks)


def theorem1(config: RunConfig) -> RecipeResult:
    """Monte Carlo mean of tau against the expectation sandwich"""
    paths = config.paths_or(4000)
    rows, checks = [], []
    for n in _dims(config, [50, 1000, 2000]):
        report = best_bounds(n, config.eps, config.A)
        est = mean_with_ci(_sample(config, n, paths).values)
        lo, hi = report.lb - 2.0 * est["se"], report.ub + 2.0 * est["se"]
        inside = lo <= est["mean"] <= hi
        rows.append({
            "n": n,
            "mean": est["mean"],
            "se": est["se"],
            "lb": report.lb,
            "ub": report.ub,
            "family": report.family,
            "trivial_lb": report.trivial_lb,
            "trivial_ub": report.trivial_ub,
            "mean_ratio": report.ratio(est["mean"]),
        })
        checks.append(Check(f"bracket_n{n}", inside,
                            f"{report.lb:.6g} - 2se <= {est['mean']:.6g} <= {report.ub:.6g} + 2se ({report.family})"))
    return RecipeResult(Recipe.THEOREM1, pd.DataFrame(rows), {"paths": paths, "rows": rows}, checks)


def _tail_records(config: RunConfig, n: int) -> Tuple[TailRecord, TailRecord, str]:
    """Avatar tail records when the window fits, the trivial pair below A^2"""
    spec = make_spec(config.eps, config.A)
    if n > spec.A**2:
        plus, minus = build_avatar_pair(n, spec)
        return plus.tail_record(), minus.tail_record(), "avatar"
    _, _, upper, lower = trivial_bounds(n)
    return upper, lower, "trivial"


def _informative(record: TailRecord, t: float) -> float:
    """Tail bound at t, NaN when the curvature hypothesis fails"""
    if record.min_second <= -1.0 / 3.0:
        return float("nan")
    return record.bound_at(t)


def _bound_check(name: str, observed: float, ci_hi: float, bound: float, source: str) -> Check:
    if not math.isfinite(bound) or bound >= 1.0:
        return Check(name, False, f"{source} bound is vacuous at this n", status=NO_BOUND)
    allowance = bound + (ci_hi - observed)
    return Check(name, observed <= allowance, f"{observed:.4f} <= {bound:.4g} + CI ({source})")


def theorem1b(config: RunConfig) -> RecipeResult:
    """Empirical tails around ln(n)/n against the second-moment bounds"""
    paths = config.paths_or(4000)
    r = config.r_values[0]
    rows = []
    for n in _dims(config, [50, 1000, 2000, 5000]):
        upper_rec, lower_rec, source = _tail_records(config, n)
        tau = _sample(config, n, paths).values
        scale = math.log(n) / n
        t_up, t_low = (1.0 + r) * scale, (1.0 - r) * scale
        up, up_lo, up_hi = tail_probability(tau, t_up, upper=True)
        low, low_lo, low_hi = tail_probability(tau, t_low, upper=False)
        rows.append({
            "n": n, "r": r,
            "upper": up, "upper_lo": up_lo, "upper_hi": up_hi,
            "upper_bound": _informative(upper_rec, t_up),
            "lower": low, "lower_lo": low_lo, "lower_hi": low_hi,
            "lower_bound": _informative(lower_rec, t_low),
            "bound_source": source,
        })
    table = pd.DataFrame(rows)
    checks = [
        Check("upper_non_increasing", _non_increasing(table["upper"].tolist()),
              ", ".join(f"{v:.4f}" for v in table["upper"])),
        Check("lower_non_increasing", _non_increasing(table["lower"].tolist()),
              ", ".join(f"{v:.4f}" for v in table["lower"])),
    ]
    for row in rows:
        n, source = row["n"], row["bound_source"]
        checks.append(_bound_check(f"upper_bound_n{n}", row["upper"], row["upper_hi"], row["upper_bound"], source))
        checks.append(_bound_check(f"lower_bound_n{n}", row["lower"], row["lower_hi"], row["lower_bound"], source))
    return RecipeResult(Recipe.THEOREM1B, table, {"paths": paths, "r": r, "rows": rows}, checks)


def corollary1(config: RunConfig) -> RecipeResult:
    """Direct, fully coupled and reflected hitting times share one law"""
    n = config.n or 100
    paths = config.paths_or(2000)
    if paths < KS_MIN_PATHS:
        raise UsageError(f"corollary1 compares laws by KS and needs at least {KS_MIN_PATHS} paths, got {paths}")
    samples = {
        Coupling.DIRECT: _sample(config, n, paths, Coupling.DIRECT, 0),
        Coupling.FULL_COUPLING: _sample(config, n, paths, Coupling.FULL_COUPLING, 1),
        Coupling.REFLECTION: _sample(config, n, paths, Coupling.REFLECTION, 2),
    }
    pairs = [
        (Coupling.DIRECT, Coupling.FULL_COUPLING),
        (Coupling.DIRECT, Coupling.REFLECTION),
        (Coupling.FULL_COUPLING, Coupling.REFLECTION),
    ]
    rows, checks = [], []
    for a, b in pairs:
        ks = ks_two_sample(samples[a].values, samples[b].values)
        rows.append({"test": f"{a.value}-{b.value}", "statistic": ks.statistic, "p_value": ks.p_value})
        checks.append(Check(f"ks_{a.value}_{b.value}", ks.p_value > KS_LEVEL, f"p={ks.p_value:.4f}"))

    radial = ks_against_radial_law(samples[Coupling.FULL_COUPLING].rho_at_tau, n)
    rows.append({"test": "rho-uniform", "statistic": radial.statistic, "p_value": radial.p_value})
    checks.append(Check("rho_radial_law", radial.p_value > KS_LEVEL, f"p={radial.p_value:.4f}"))

    summary = {
        "n": n,
        "paths": paths,
        "means": {c.value: s.mean for c, s in samples.items()},
        "order_violations": samples[Coupling.FULL_COUPLING].order_violations,
        "rows": rows,
    }
    return RecipeResult(Recipe.COROLLARY1, pd.DataFrame(rows), summary, checks)


def prop18(config: RunConfig) -> RecipeResult:
    """min phi_n'' approaches the minimum of chi, and phi_n is convex on the left half"""
    dims = _dims(config, [100, 1000, 100_000])
    result = necessity_analysis(dims)
    table = pd.DataFrame(result["rows"])
    a_chi, chi_min = result["a_chi"], result["chi_min"]
    checks = [
        Check("a_chi_bracket", 1.0 < a_chi < 2.0, f"a_chi={a_chi:.12f}"),
        Check("chi_interval", result["in_interval"], f"chi(a_chi)={chi_min:.10f}"),
    ]
    for row in result["rows"]:
        if row["n"] >= 100_000:
            checks.append(Check(f"limit_n{row['n']}", row["rel_gap"] <= 0.05, f"rel gap {row['rel_gap']:.4f}"))
        if row["n"] <= 1000:
            checks.append(Check(f"left_convex_n{row['n']}", row["min_left_half"] >= -1e-8,
                                f"min={row['min_left_half']:.3g}"))
    return RecipeResult(Recipe.PROP18, table, result, checks)


RECIPES: Dict[Recipe, Callable[[RunConfig], RecipeResult]] = {
    Recipe.THEOREM1: theorem1,
    Recipe.THEOREM1B: theorem1b,
    Recipe.THEOREM2: theorem2,
    Recipe.COROLLARY1: corollary1,
    Recipe.PROP18: prop18,
}


def reproduce(config: RunConfig, out_dir: Optional[Path] = None) -> RecipeResult:
    """Run config.recipe and write its CSV and JSON files"""
    recipe = Recipe(config.recipe)
    logger.info(f"Reproducing {recipe.value}")
    try:
        result = RECIPES[recipe](config)
    except Exception as e:
        logger.error(f"Recipe {recipe.value} failed: {e}")
        raise

    if out_dir is not None:
        meta = artifacts.metadata(config, recipe=recipe.value)
        artifacts.write_table(Path(out_dir) / f"{config.stem()}.csv", result.table, meta)
        artifacts.write_json(Path(out_dir) / f"{config.stem()}.json", {
            **meta,
            "summary": result.summary,
            "checks": [
                {"name": c.name, "passed": c.passed, "status": c.status, "detail": c.detail}
                for c in result.checks
            ],
            "passed": result.passed,
        })
    return result
