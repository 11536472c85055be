"""
Command-line entry point.

    cutofflab detflow --n 1 --model exact
    cutofflab sde --n 100 --paths 10 --seed 7
    cutofflab reproduce theorem2 --n-list 100,1000,10000
    cutofflab --config run.json

Every command writes its files under --out (default OUTPUT_DIR) and echoes
its RunConfig in the first line of each file. Exit codes: 0 success,
1 usage error, 2 numerical failure.
"""
import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from cutofflab import __version__
from cutofflab.core.config import settings
from cutofflab.core.errors import CutoffLabError, DomainError, HypothesisViolated, UsageError
from cutofflab.core.logging_config import setup_logging
from cutofflab.schemas.drift import DriftKind, DriftModel
from cutofflab.schemas.run_config import Command, Recipe, RunConfig, StatsTest
from cutofflab.schemas.simulation import Coupling, SimOptions
from cutofflab.services import artifacts
from cutofflab.services.avatar import best_bounds, find_beta_critical, find_chi_root
from cutofflab.services.detflow import hit_time
from cutofflab.services.recipes import reproduce
from cutofflab.services.sde import sample_batch
from cutofflab.services.specfun import chi_family, get_drift_evaluator, iota
from cutofflab.services import stats

logger = logging.getLogger(__name__)


class LabArgumentParser(argparse.ArgumentParser):
    """Raise UsageError instead of exiting so that run() owns the exit code"""

    def error(self, message: str):
        raise UsageError(message)


def _int_list(text: str) -> List[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text}") from e


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text}") from e


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--paths", type=int, help="Monte Carlo paths per n")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--coupling", choices=[c.value for c in Coupling], default=Coupling.DIRECT.value)
    p.add_argument("--delta-max", type=float, default=0.02, help="max drift displacement per step")
    p.add_argument("--refine-factor", type=float, default=1.0)
    p.add_argument("--dt-scale", type=float, default=1.0, help="multiplier on the default base step")
    p.add_argument("--max-steps", type=int, default=2_000_000)


def build_parser() -> argparse.ArgumentParser:
    parser = LabArgumentParser(prog="cutofflab", description="Cut-off laboratory for spherical Brownian motion")
    parser.add_argument("--version", action="version", version=f"cutofflab {__version__}")
    parser.add_argument("--config", type=Path, help="JSON RunConfig; replaces the subcommand flags")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", parser_class=LabArgumentParser)

    p = sub.add_parser("specfun", help="tabulate b_n, phi_n', phi_n'' and the radial law")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--x", type=_float_list, default=[], help="abscissae in (0, pi)")

    p = sub.add_parser("detflow", help="deterministic hitting time of pi")
    p.add_argument("--n", type=int)
    p.add_argument("--n-list", type=_int_list, default=[])
    p.add_argument("--model", choices=[k.value for k in DriftKind], default=DriftKind.EXACT.value)
    p.add_argument("--A", type=float, help="window half-width (0.8 tilde, 6 hat)")
    p.add_argument("--c-tilde", type=float, default=0.5)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("sde", help="sample the hitting time of pi")
    p.add_argument("--n", type=int, required=True)
    _add_sim_flags(p)

    p = sub.add_parser("avatar", help="expectation and tail bounds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--A", type=float, default=6.0)
    p.add_argument("--r", type=_float_list, default=[0.25, 0.5, 1.0])

    p = sub.add_parser("stats", help="statistics of sample files written by sde")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("--test", choices=[t.value for t in StatsTest], default=StatsTest.SUMMARY.value)
    p.add_argument("--n", type=int, help="dimension for the radial test; read from the file header otherwise")
    p.add_argument("--r", type=_float_list, default=[0.25, 0.5, 1.0])

    p = sub.add_parser("reproduce", help="run a reproduction recipe")
    p.add_argument("recipe", choices=[r.value for r in Recipe])
    p.add_argument("--n", type=int)
    p.add_argument("--n-list", type=_int_list, default=[])
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--A", type=float, default=6.0)
    p.add_argument("--r", type=_float_list, default=[0.5])
    p.add_argument("--tol", type=float)
    _add_sim_flags(p)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        if not args.config.exists():
            raise UsageError(f"config file {args.config} does not exist")
        return RunConfig.load(args.config)
    if args.command is None:
        raise UsageError("a subcommand or --config is required")

    command = Command(args.command)
    fields: Dict[str, object] = {"command": command}
    for name in ("n", "n_list", "tol", "eps", "A", "paths"):
        if getattr(args, name, None) not in (None, []):
            fields[name] = getattr(args, name)
    if getattr(args, "seed", None) is not None:
        fields["master_seed"] = args.seed
    if getattr(args, "r", None):
        fields["r_values"] = args.r

    if command == Command.SPECFUN:
        fields["x_values"] = args.x
    elif command == Command.DETFLOW:
        kind = DriftKind(args.model)
        if kind == DriftKind.TILDE_LOWER:
            fields["model"] = DriftModel.tilde(A=args.A or 0.8, c_tilde=args.c_tilde)
        elif kind == DriftKind.HAT_UPPER:
            fields["model"] = DriftModel.hat(A=args.A or 6.0)
        fields.pop("A", None)
    elif command == Command.STATS:
        fields["inputs"] = args.inputs
        fields["stats_test"] = StatsTest(args.test)
    elif command == Command.REPRODUCE:
        fields["recipe"] = Recipe(args.recipe)
    if command in (Command.SDE, Command.REPRODUCE):
        fields["sim"] = SimOptions(
            coupling=Coupling(args.coupling),
            delta_max=args.delta_max,
            refine_factor=args.refine_factor,
            dt_scale=args.dt_scale,
            max_steps=args.max_steps,
        )
    return RunConfig(**fields)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_specfun(config: RunConfig, out: Path) -> None:
    n = config.n
    x = np.asarray(config.x_values or np.linspace(0.0, math.pi, 103)[1:-1], dtype=float)
    if np.any((x <= 0) | (x >= math.pi)):
        raise DomainError("specfun abscissae must lie in (0, pi)")
    ev = get_drift_evaluator(n)
    table = pd.DataFrame({
        "x": x,
        "b": ev.b(x),
        "phi_prime": ev.phi_prime(x),
        "phi_second": ev.phi_second(x),
        "radial_cdf": ev.radial_cdf(x),
    })
    extra = {"iota": iota(n), "a_beta_root": find_beta_critical()}
    artifacts.write_table(out / f"{config.stem()}.csv", table, artifacts.metadata(config, **extra))
    print(f"n={n} iota={extra['iota']:.17g} b(pi/2)={float(ev.b(math.pi / 2)):.17g}")


def cmd_detflow(config: RunConfig, out: Path) -> None:
    rows = []
    for n in config.dims():
        res = hit_time(n, config.model, config.tol)
        rows.append({"n": n, "model": res.model.kind.value, "T": res.T, "ratio": res.ratio,
                     "quad_error": res.quad_error})
        print(f"n={n} model={res.model.kind.value} T={res.T:.17g} ratio={res.ratio:.17g}")
    artifacts.write_table(out / f"{config.stem()}.csv", pd.DataFrame(rows), artifacts.metadata(config))


def cmd_sde(config: RunConfig, out: Path) -> None:
    cfg = config.sim.to_config(config.n)
    sample = sample_batch(cfg, config.paths_or(1000), config.master_seed)
    table = pd.DataFrame({"path_index": np.arange(sample.size), "tau": sample.values, "steps": sample.steps})
    if sample.rho_at_tau is not None:
        table["rho_at_tau"] = sample.rho_at_tau
    if sample.pushed is not None:
        table["pushed"] = sample.pushed
    meta = artifacts.metadata(
        config,
        n=sample.n,
        coupling=sample.coupling.value,
        seed=sample.master_seed,
        sim_config=cfg.model_dump(mode="json"),
        order_violations=sample.order_violations,
        steps_summary=sample.per_path_steps,
    )
    artifacts.write_table(out / f"{config.stem()}.csv", table, meta)
    print(f"n={sample.n} paths={sample.size} mean={sample.mean:.17g} se={sample.std_error:.3g}")


def cmd_avatar(config: RunConfig, out: Path) -> None:
    report = best_bounds(config.n, config.eps, config.A)
    tail = []
    for r in config.r_values:
        for record in (report.tail_upper, report.tail_lower):
            try:
                bound = record.bound(r)
            except HypothesisViolated as e:
                logger.warning(f"No {record.side.value} tail bound at r={r}: {e}")
                bound = None
            tail.append({"r": r, "side": record.side.value, "threshold": record.threshold(r),
                         "bound": bound})
    a_chi = find_chi_root()
    payload = {
        **artifacts.metadata(config),
        "n": report.n,
        "eps": report.eps,
        "A": report.A,
        "lb": report.lb,
        "ub": report.ub,
        "family": report.family,
        "trivial_lb": report.trivial_lb,
        "trivial_ub": report.trivial_ub,
        "tail": tail,
        "margins": report.membership_margins,
        "a_chi": a_chi,
        "chi_min": float(chi_family(a_chi).chi),
    }
    artifacts.write_json(out / f"{config.stem()}.json", payload)
    print(json.dumps(artifacts.to_plain(payload), indent=2, sort_keys=True))


def _load_samples(config: RunConfig):
    loaded = []
    for path in config.inputs:
        meta, frame = artifacts.read_table(path)
        if "tau" not in frame.columns:
            raise UsageError(f"{path} has no tau column")
        n = meta.get("config", {}).get("n")
        loaded.append((path, n, meta, frame))
    return loaded


def cmd_stats(config: RunConfig, out: Path) -> None:
    loaded = _load_samples(config)
    test = config.stats_test
    extra: Dict[str, object] = {"test": test.value}

    if test == StatsTest.SUMMARY:
        rows = []
        for path, n, _, frame in loaded:
            est = stats.mean_with_ci(frame["tau"])
            q = stats.Ecdf.of(frame["tau"]).quantile([0.05, 0.5, 0.95])
            rows.append({"file": Path(path).name, "n": n, **est, "q05": q[0], "q50": q[1], "q95": q[2]})
        table = pd.DataFrame(rows)
    elif test == StatsTest.KS:
        if len(loaded) != 2:
            raise UsageError("ks needs exactly two input files")
        res = stats.ks_two_sample(loaded[0][3]["tau"], loaded[1][3]["tau"])
        table = pd.DataFrame([res.model_dump()])
    elif test == StatsTest.RADIAL:
        if len(loaded) != 1:
            raise UsageError("radial needs exactly one input file")
        path, n, _, frame = loaded[0]
        n = config.n or n
        if "rho_at_tau" not in frame.columns or n is None:
            raise UsageError(f"{path} needs a rho_at_tau column and a known n")
        res = stats.ks_against_radial_law(frame["rho_at_tau"], n)
        table = pd.DataFrame([{"n": n, **res.model_dump()}])
    else:
        samples = {n: frame["tau"].to_numpy() for _, n, _, frame in loaded}
        if None in samples:
            raise UsageError("every profile input needs n in its header")
        table = stats.cutoff_profile(samples, config.r_values)

    artifacts.write_table(out / f"{config.stem()}.csv", table, artifacts.metadata(config, **extra))
    print(table.to_string(index=False))


def cmd_reproduce(config: RunConfig, out: Path) -> None:
    result = reproduce(config, out)
    for line in result.lines():
        print(line)
    if not result.passed:
        logger.warning(f"Recipe {config.recipe.value} has failing checks")


COMMANDS = {
    Command.SPECFUN: cmd_specfun,
    Command.DETFLOW: cmd_detflow,
    Command.SDE: cmd_sde,
    Command.AVATAR: cmd_avatar,
    Command.STATS: cmd_stats,
    Command.REPRODUCE: cmd_reproduce,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, execute one command and return the exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
        setup_logging(args.log_level or settings.LOG_LEVEL,
                      str(settings.LOG_FILE) if settings.LOG_FILE else None)
        config = config_from_args(args)
        out = Path(args.out) if args.out is not None else settings.OUTPUT_DIR
        COMMANDS[config.command](config, out)
        return 0
    except ValidationError as e:
        print(f"cutofflab: invalid configuration: {e}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return UsageError.exit_code
    except UsageError as e:
        print(f"cutofflab: {e}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return e.exit_code
    except CutoffLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"cutofflab: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
