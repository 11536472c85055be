"""
Monte Carlo sampling of the strong stationary time.

Three radial systems are simulated up to the first time the dual radius
reaches pi:

    direct      dR  = sqrt(2) dB + b_n(R) dt
    full        drho = sqrt(2) dW + n cot(rho) dt
                dR1  = sqrt(2) dW + n (2 cot(rho) - cot(R1)) dt       (same W)
    reflection  drho = sqrt(2) dW + n cot(rho) dt
                dR2  = -sqrt(2) dW' - n cot(R2) dt + push,  R2 >= rho  (W' independent)

Paths are advanced in lockstep over fixed-size chunks. Path i owns a
generator seeded from (master_seed, i) and consumes exactly one block row of
normals per step, so a path's trajectory does not depend on which chunk or
worker runs it.
"""
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from cutofflab.core.config import settings
from cutofflab.core.errors import OrderViolation, StepBudgetExceeded
from cutofflab.schemas.simulation import Coupling, SimConfig, TauSample
from cutofflab.services.specfun import get_drift_evaluator

logger = logging.getLogger(__name__)

PI = math.pi
TWO_PI = 2.0 * math.pi


def path_generator(master_seed: int, path_index: int) -> np.random.Generator:
    """Independent stream for one path, derived by SeedSequence spawn keys"""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(path_index),))
    return np.random.Generator(np.random.PCG64(seq))


def kickoff(n: int, dt0: float, rng: np.random.Generator, dof: Optional[int] = None) -> float:
    """Exact small-time law of the radius started at the entrance boundary 0.

    Near 0 the drift is (dof - 1)/r with diffusion sqrt(2), a time-changed
    Bessel process, so R(dt0)^2 / (2 dt0) is chi-square with dof degrees of
    freedom (n + 3 for the dual radius, n + 1 for rho).
    """
    dof = n + 3 if dof is None else dof
    return math.sqrt(2.0 * dt0 * rng.chisquare(dof))


@dataclass
class PathState:
    """State of a chunk of paths; rho and pushed are only used by the couplings"""

    t: np.ndarray
    r: np.ndarray
    rho: np.ndarray
    pushed: np.ndarray


@dataclass
class ChunkResult:
    indices: np.ndarray
    tau: np.ndarray
    steps: np.ndarray
    rho_at_tau: np.ndarray
    pushed: np.ndarray
    violations: int = 0
    failed: List[int] = field(default_factory=list)


class _NormalBuffer:
    """Per-path blocks of standard normals, refilled only for live paths"""

    def __init__(self, gens: Sequence[np.random.Generator], block: int, width: int):
        self.gens = gens
        self.block = block
        self.width = width
        self.buf = np.stack([g.standard_normal((block, width)) for g in gens])

    def row(self, step: int, live: np.ndarray) -> np.ndarray:
        k = step % self.block
        if k == 0 and step > 0:
            for i in live:
                self.buf[i] = self.gens[i].standard_normal((self.block, self.width))
            logger.debug(f"refilled normals for {live.size} paths at step {step}")
        return self.buf[live, k, :]


class RadialPathEngine:
    """Lockstep Euler-Maruyama engine for one SimConfig"""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.n = cfg.n
        self.evaluator = get_drift_evaluator(cfg.n) if cfg.coupling == Coupling.DIRECT else None

    def _step_sizes(self, speed: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        dt = np.full(speed.shape, cfg.dt_base)
        capped = speed * cfg.dt_base > cfg.delta_max
        dt[capped] = cfg.delta_max / (speed[capped] * cfg.refine_factor)
        return dt

    @staticmethod
    def _reflect_poles(x: np.ndarray) -> np.ndarray:
        x = np.abs(x)
        return np.where(x > PI, TWO_PI - x, x)

    def _initial_state(self, gens: Sequence[np.random.Generator]) -> PathState:
        cfg = self.cfg
        m = len(gens)
        dt0 = cfg.kickoff_dt
        r = np.empty(m)
        rho = np.zeros(m)
        for i, g in enumerate(gens):
            if cfg.coupling == Coupling.DIRECT:
                r[i] = kickoff(self.n, dt0, g)
            else:
                rho[i] = kickoff(self.n, dt0, g, dof=self.n + 1)
                r[i] = math.sqrt(rho[i] ** 2 + 2.0 * dt0 * g.chisquare(2))
        return PathState(t=np.full(m, dt0), r=r, rho=rho, pushed=np.zeros(m))

    def run(
        self,
        indices: Sequence[int],
        master_seed: int,
        observer: Optional[Callable[[PathState, np.ndarray], None]] = None,
    ) -> ChunkResult:
        """Advance the chunk to absorption; observer(state, live) sees every lockstep update"""
        cfg = self.cfg
        n = self.n
        indices = np.asarray(indices, dtype=np.int64)
        gens = [path_generator(master_seed, i) for i in indices]
        state = self._initial_state(gens)
        width = 2 if cfg.coupling == Coupling.REFLECTION else 1
        normals = _NormalBuffer(gens, cfg.normals_block, width)

        m = indices.size
        tau = np.full(m, np.nan)
        rho_at_tau = np.full(m, np.nan)
        steps = np.zeros(m, dtype=np.int64)
        violations = 0
        live = np.arange(m)
        step = 0

        while live.size:
            if step >= cfg.max_steps:
                failed = [int(indices[i]) for i in live]
                logger.error(f"{len(failed)} paths exceeded max_steps={cfg.max_steps} (n={n})")
                return ChunkResult(indices, tau, steps, rho_at_tau, state.pushed, violations, failed)

            Z = normals.row(step, live)
            r = state.r[live]
            t = state.t[live]

            if cfg.coupling == Coupling.DIRECT:
                drift = self.evaluator.b(r)
                dt = self._step_sizes(np.abs(drift))
                r_new = r + np.sqrt(2.0 * dt) * Z[:, 0] + drift * dt
                r_new = np.abs(r_new)
                rho_new = None
            else:
                rho = state.rho[live]
                cot_rho = 1.0 / np.tan(rho)
                cot_r = 1.0 / np.tan(r)
                drift_rho = n * cot_rho
                if cfg.coupling == Coupling.FULL_COUPLING:
                    drift_r = n * (2.0 * cot_rho - cot_r)
                else:
                    drift_r = -n * cot_r
                dt = self._step_sizes(np.maximum(np.abs(drift_rho), np.abs(drift_r)))
                noise = np.sqrt(2.0 * dt)
                rho_new = self._reflect_poles(rho + noise * Z[:, 0] + drift_rho * dt)
                if cfg.coupling == Coupling.FULL_COUPLING:
                    r_new = np.abs(r + noise * Z[:, 0] + drift_r * dt)
                    bad = rho_new > r_new + 10.0 * noise
                    violations += int(np.count_nonzero(bad))
                else:
                    r_star = r - noise * Z[:, 1] + drift_r * dt
                    push = np.maximum(0.0, rho_new - r_star)
                    state.pushed[live] += push
                    r_new = np.maximum(r_star, rho_new)

            steps[live] += 1
            hit = r_new >= PI
            if np.any(hit):
                frac = (PI - r[hit]) / (r_new[hit] - r[hit])
                done = live[hit]
                tau[done] = t[hit] + frac * dt[hit]
                if rho_new is not None:
                    rho_hit = state.rho[done]
                    rho_at_tau[done] = rho_hit + frac * (rho_new[hit] - rho_hit)

            keep = ~hit
            kept = live[keep]
            state.r[kept] = r_new[keep]
            state.t[kept] = t[keep] + dt[keep]
            if rho_new is not None:
                state.rho[kept] = rho_new[keep]
            live = kept
            if observer is not None:
                observer(state, live)
            step += 1

        logger.debug(f"chunk {indices[0]}..{indices[-1]} finished after {step} lockstep steps")
        return ChunkResult(indices, tau, steps, rho_at_tau, state.pushed.copy(), violations)


def _check_coupling(cfg: SimConfig, expected: Coupling) -> None:
    if cfg.coupling != expected:
        raise ValueError(f"config coupling is {cfg.coupling.value}, expected {expected.value}")


def _single(cfg: SimConfig, path_index: int, master_seed: int) -> ChunkResult:
    res = RadialPathEngine(cfg).run([path_index], master_seed)
    if res.failed:
        raise StepBudgetExceeded(f"path {path_index} exceeded max_steps", res.failed)
    return res


def simulate_direct(cfg: SimConfig, path_index: int, master_seed: int) -> float:
    """One draw of tau for the dual radius R"""
    _check_coupling(cfg, Coupling.DIRECT)
    return float(_single(cfg, path_index, master_seed).tau[0])


def simulate_full_coupling(cfg: SimConfig, path_index: int, master_seed: int):
    """One draw of (tau_1, rho at tau_1) for the fully coupled pair"""
    _check_coupling(cfg, Coupling.FULL_COUPLING)
    res = _single(cfg, path_index, master_seed)
    return float(res.tau[0]), float(res.rho_at_tau[0])


def simulate_reflection(cfg: SimConfig, path_index: int, master_seed: int) -> float:
    """One draw of tau_2 for the radius reflected on rho"""
    _check_coupling(cfg, Coupling.REFLECTION)
    return float(_single(cfg, path_index, master_seed).tau[0])


def sample_batch(
    cfg: SimConfig,
    N: int,
    master_seed: int,
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> TauSample:
    """N independent draws; identical output for any worker count.

    Raises:
        StepBudgetExceeded: listing every path index that ran out of steps.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    threads = threads or settings.THREADS
    chunk_size = chunk_size or settings.CHUNK_SIZE
    engine = RadialPathEngine(cfg)
    chunks = [np.arange(lo, min(lo + chunk_size, N)) for lo in range(0, N, chunk_size)]
    logger.info(
        f"Sampling {N} paths n={cfg.n} coupling={cfg.coupling.value} seed={master_seed} "
        f"({len(chunks)} chunks, {threads} workers)"
    )

    progress = tqdm(total=N, desc=f"n={cfg.n} {cfg.coupling.value}", unit="path",
                    disable=not settings.PROGRESS or None, leave=False)
    try:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(engine.run, idx, master_seed) for idx in chunks]
            results = []
            for fut in futures:
                res = fut.result()
                results.append(res)
                progress.update(res.indices.size)
    except Exception as e:
        logger.error(f"Batch n={cfg.n} failed: {e}")
        raise
    finally:
        progress.close()

    failed = [i for res in results for i in res.failed]
    if failed:
        raise StepBudgetExceeded(f"{len(failed)} paths exceeded max_steps={cfg.max_steps}", failed)

    tau = np.concatenate([res.tau for res in results])
    steps = np.concatenate([res.steps for res in results])
    violations = sum(res.violations for res in results)
    if violations:
        warnings.warn(f"{violations} steps with rho above R1 beyond tolerance (n={cfg.n})", OrderViolation)

    rho_at_tau = pushed = None
    if cfg.coupling == Coupling.FULL_COUPLING:
        rho_at_tau = np.concatenate([res.rho_at_tau for res in results]).tolist()
    if cfg.coupling == Coupling.REFLECTION:
        pushed = np.concatenate([res.pushed for res in results]).tolist()

    sample = TauSample(
        n=cfg.n,
        coupling=cfg.coupling,
        master_seed=master_seed,
        config=cfg,
        values=tau.tolist(),
        steps=steps.tolist(),
        rho_at_tau=rho_at_tau,
        pushed=pushed,
        order_violations=violations,
    )
    logger.info(f"Batch n={cfg.n} done: mean tau={sample.mean:.6g} (se {sample.std_error:.2g})")
    return sample
