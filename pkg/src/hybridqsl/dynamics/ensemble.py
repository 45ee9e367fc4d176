"""Trajectory propagation and Monte Carlo reduction over bath initial conditions."""

from __future__ import annotations

import logging
import multiprocessing as mp
from dataclasses import dataclass, field

import numpy as np

from ..errors import AllTrajectoriesFailed, NonFiniteDerivative, NumericalError
from ..numerics import TimeGrid, rk4_step_batched, trajectory_rng

log = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 1e-3
DEFAULT_CHUNK = 32


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    obs: np.ndarray
    dobs: np.ndarray
    states: np.ndarray | None = None


@dataclass
class ReducedSeries:
    """Ensemble means on a uniform grid, in projector form.

    ``proj[k, n, m]`` is ``<P_nm(t_k)>`` (so the density matrix is its
    transpose) and ``dproj`` holds the averaged equation-of-motion
    derivatives. ``*_se`` are standard errors of the mean (complex moduli).
    """

    grid: TimeGrid
    proj: np.ndarray
    dproj: np.ndarray
    proj_se: np.ndarray
    dproj_se: np.ndarray
    initial_index: int = 0
    n_traj: int = 1
    n_failed: int = 0
    bloch: np.ndarray | None = None
    dbloch: np.ndarray | None = None
    bloch_se: np.ndarray | None = None
    dbloch_se: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def L(self) -> int:
        return self.proj.shape[-1]

    def rho(self) -> np.ndarray:
        return np.swapaxes(self.proj, -1, -2)

    def drho(self) -> np.ndarray:
        return np.swapaxes(self.dproj, -1, -2)


def bloch_to_projectors(b):
    """Map Bloch components ``(..., 3)`` to ``<P_nm>`` matrices ``(..., 2, 2)``."""
    b = np.asarray(b)
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    out = np.empty(b.shape[:-1] + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = 0.5 * (1 + bz)
    out[..., 1, 1] = 0.5 * (1 - bz)
    out[..., 0, 1] = 0.5 * (bx + 1j * by)
    out[..., 1, 0] = 0.5 * (bx - 1j * by)
    return out


def _bloch_rates_to_projectors(db):
    out = bloch_to_projectors(db)
    out[..., 0, 0] -= 0.5
    out[..., 1, 1] -= 0.5
    return out


def _bloch_se_to_projectors(se):
    se = np.asarray(se)
    out = np.empty(se.shape[:-1] + (2, 2))
    out[..., 0, 0] = out[..., 1, 1] = 0.5 * se[..., 2]
    out[..., 0, 1] = out[..., 1, 0] = 0.5 * np.hypot(se[..., 0], se[..., 1])
    return out


def series_from_bloch(grid, bloch, dbloch, bloch_se=None, dbloch_se=None, n_traj=1, n_failed=0, meta=None):
    """Build a two-level ReducedSeries from Bloch-vector series ``(n_t, 3)``."""
    bloch = np.asarray(bloch, dtype=float)
    dbloch = np.asarray(dbloch, dtype=float)
    if bloch_se is None:
        bloch_se = np.zeros_like(bloch)
    if dbloch_se is None:
        dbloch_se = np.zeros_like(dbloch)
    return ReducedSeries(
        grid=grid,
        proj=bloch_to_projectors(bloch),
        dproj=_bloch_rates_to_projectors(dbloch),
        proj_se=_bloch_se_to_projectors(bloch_se),
        dproj_se=_bloch_se_to_projectors(dbloch_se),
        initial_index=0,
        n_traj=n_traj,
        n_failed=n_failed,
        bloch=bloch,
        dbloch=dbloch,
        bloch_se=np.asarray(bloch_se, dtype=float),
        dbloch_se=np.asarray(dbloch_se, dtype=float),
        meta=dict(meta or {}),
    )


def _propagate_batch(model, y0: np.ndarray, grid: TimeGrid, keep_states=False):
    """RK4 over the grid; returns observables, derivatives, failure mask."""
    if not keep_states and hasattr(model, "propagate"):
        out = model.propagate(y0, grid.n_steps, grid.dt)
        if out is not None:
            return out + (None,)
    n_t = grid.n_steps + 1
    b = y0.shape[0]
    y = y0
    k = model.deriv(grid.t0, y)
    obs0 = model.observe(y)
    obs = np.empty((b, n_t) + obs0.shape[1:], dtype=np.complex128)
    dobs = np.empty_like(obs)
    states = np.empty((n_t,) + y.shape, dtype=y.dtype) if keep_states else None
    failed = ~np.isfinite(k.reshape(b, -1)).all(axis=1)
    for i in range(n_t):
        t = grid.t0 + i * grid.dt
        obs[:, i] = model.observe(y)
        dobs[:, i] = model.observe(k, derivative=True)
        if keep_states:
            states[i] = y
        if i == n_t - 1:
            break
        y, bad = rk4_step_batched(model.deriv, y, t, grid.dt, k1=k)
        failed |= bad
        with np.errstate(over="ignore", invalid="ignore"):
            k = model.deriv(t + grid.dt, y)
        bad = ~np.isfinite(k.reshape(b, -1)).all(axis=1)
        if bad.any():
            k[bad] = 0
            y[bad] = 0
            failed |= bad
    return obs, dobs, failed, states


def propagate_trajectory(model, sample, grid: TimeGrid, keep_states: bool = False) -> TrajectoryRecord:
    """Propagate one trajectory from a bath sample; derivatives come from the EOM.

    Raises NonFiniteDerivative if the trajectory leaves the finite range.
    """
    y0 = model.initial_state([sample])
    obs, dobs, failed, states = _propagate_batch(model, y0, grid, keep_states)
    if failed[0]:
        raise NonFiniteDerivative("trajectory produced non-finite values")
    return TrajectoryRecord(
        grid.times, obs[0], dobs[0], None if states is None else states[:, 0]
    )


@dataclass
class _Moments:
    """Running count, mean and sum of squared deviations (Chan et al. merge)."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, x: np.ndarray) -> "_Moments":
        n = x.shape[0]
        if n == 0:
            return cls(0, np.zeros(x.shape[1:], dtype=x.dtype), np.zeros(x.shape[1:]))
        mean = x.mean(axis=0)
        m2 = np.sum(np.abs(x - mean) ** 2, axis=0)
        return cls(n, mean, m2)

    def merge(self, other: "_Moments") -> "_Moments":
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + np.abs(delta) ** 2 * (self.n * other.n / n)
        return _Moments(n, mean, m2)

    def se(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros_like(self.m2)
        return np.sqrt(self.m2 / (self.n - 1) / self.n)


def _run_chunk(args):
    model, grid, master_seed, start, stop = args
    samples = [model.sample(trajectory_rng(master_seed, i)) for i in range(start, stop)]
    y0 = model.initial_state(samples)
    obs, dobs, failed, _ = _propagate_batch(model, y0, grid)
    ok = ~failed
    return start, _Moments.of(obs[ok]), _Moments.of(dobs[ok]), int(failed.sum())


def _chunks(n_traj, chunk):
    return [(s, min(s + chunk, n_traj)) for s in range(0, n_traj, chunk)]


def run_ensemble(
    model,
    grid: TimeGrid,
    n_traj: int,
    master_seed: int = 0,
    workers: int = 1,
    deterministic: bool = True,
    chunk_size: int = DEFAULT_CHUNK,
) -> ReducedSeries:
    """Average observables and their EOM derivatives over sampled trajectories.

    Trajectories are split into fixed chunks of consecutive indices; each
    chunk draws its own bath samples from per-trajectory streams. In
    deterministic mode chunk statistics are merged in index order, so the
    result is bitwise independent of ``workers``. Otherwise chunks are merged
    as they complete (rounding-level differences only).
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    tasks = [(model, grid, master_seed, a, b) for a, b in _chunks(n_traj, chunk_size)]
    if workers <= 1 or len(tasks) == 1:
        results = map(_run_chunk, tasks)
        results = list(results)
    else:
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
        with ctx.Pool(processes=workers) as pool:
            if deterministic:
                results = pool.map(_run_chunk, tasks, chunksize=1)
            else:
                results = list(pool.imap_unordered(_run_chunk, tasks))
    if deterministic:
        results.sort(key=lambda r: r[0])
    mom = dmom = None
    n_failed = 0
    for _, m, dm, nf in results:
        mom = m if mom is None else mom.merge(m)
        dmom = dm if dmom is None else dmom.merge(dm)
        n_failed += nf
    if mom.n == 0:
        raise AllTrajectoriesFailed(f"all {n_traj} trajectories failed")
    if n_failed > MAX_FAILURE_FRACTION * n_traj:
        raise NumericalError(
            f"{n_failed} of {n_traj} trajectories failed; reduce the time step"
        )
    if n_failed:
        log.warning("%d of %d trajectories failed and were excluded", n_failed, n_traj)
    meta = {"model": model.name, "n_requested": n_traj, "seed": master_seed}
    if model.name == "sbm":
        return series_from_bloch(
            grid, mom.mean.real, dmom.mean.real, mom.se(), dmom.se(),
            n_traj=mom.n, n_failed=n_failed, meta=meta,
        )
    return ReducedSeries(
        grid=grid,
        proj=mom.mean,
        dproj=dmom.mean,
        proj_se=mom.se(),
        dproj_se=dmom.se(),
        initial_index=model.initial_index,
        n_traj=mom.n,
        n_failed=n_failed,
        meta=meta,
    )
