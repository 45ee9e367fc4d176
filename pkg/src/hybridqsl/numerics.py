"""Small dense linear algebra, fixed-step integration and quadrature.

Everything here works on numpy arrays and is pure, so the same functions are
called from every trajectory worker. Matrix routines accept stacks of
matrices (shape ``(..., n, n)``) and process them in one vectorised pass.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFiniteDerivative, NonHermitianInput, TooFewSamples

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
_MAX_SWEEPS = 60


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t0, t0 + dt, ..., t0 + n_steps * dt``."""

    t0: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @classmethod
    def from_horizon(cls, t_end: float, dt: float, t0: float = 0.0) -> "TimeGrid":
        """Grid from ``t0`` to ``t_end``; the span must be a whole number of steps."""
        ratio = (t_end - t0) / dt
        n = int(round(ratio))
        if n < 1 or abs(ratio - n) > 1e-6 * max(1.0, ratio):
            raise ValueError(f"horizon {t_end - t0} is not a multiple of dt={dt}")
        return cls(t0, dt, n)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * self.n_steps

    def index_of(self, t: float) -> int:
        """Index of the grid point equal to ``t`` (within 1e-9 of a step)."""
        k = (t - self.t0) / self.dt
        i = int(round(k))
        if abs(k - i) > 1e-6 or not 0 <= i <= self.n_steps:
            raise ValueError(f"t={t} is not on the grid")
        return i


# ----------------------------------------------------------------------------
# Hermitian eigenvalues (cyclic Jacobi)
# ----------------------------------------------------------------------------

def _as_stack(a) -> tuple[np.ndarray, tuple]:
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    lead = a.shape[:-2]
    n = a.shape[-1]
    return a.reshape((-1, n, n)).astype(np.complex128, copy=True), lead


def hermiticity_residual(a) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2)))))


def _jacobi(a: np.ndarray, vectors: bool):
    """Diagonalise a stack of Hermitian matrices in place.

    Uses the cyclic-by-row pivot order; each rotation first removes the phase
    of the pivot element and then applies the real symmetric Jacobi rotation.
    """
    b, n, _ = a.shape
    v = np.broadcast_to(np.eye(n, dtype=np.complex128), (b, n, n)).copy() if vectors else None
    scale = np.maximum(np.sqrt(np.sum(np.abs(a) ** 2, axis=(1, 2))), np.finfo(float).tiny)
    for _ in range(_MAX_SWEEPS):
        total = np.sum(np.abs(a) ** 2, axis=(1, 2))
        diag = np.sum(np.abs(np.diagonal(a, axis1=1, axis2=2)) ** 2, axis=1)
        off = np.sqrt(np.clip(total - diag, 0.0, None))
        if np.all(off <= 1e-15 * scale):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                mag = np.abs(apq)
                active = mag > 1e-300
                if not active.any():
                    continue
                safe = np.where(active, mag, 1.0)
                phase = np.where(active, apq / safe, 1.0)
                app = a[:, p, p].real
                aqq = a[:, q, q].real
                zeta = (aqq - app) / (2.0 * safe)
                t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                c = np.where(active, c, 1.0)
                s = np.where(active, s, 0.0)
                ph = np.conj(phase)
                # columns: A <- A U
                col_p = a[:, :, p].copy()
                col_q = a[:, :, q]
                a[:, :, p] = c[:, None] * col_p - (s * ph)[:, None] * col_q
                a[:, :, q] = s[:, None] * col_p + (c * ph)[:, None] * col_q
                # rows: A <- U^H A
                row_p = a[:, p, :].copy()
                row_q = a[:, q, :]
                a[:, p, :] = c[:, None] * row_p - (s * phase)[:, None] * row_q
                a[:, q, :] = s[:, None] * row_p + (c * phase)[:, None] * row_q
                a[:, p, q] = 0.0
                a[:, q, p] = 0.0
                if vectors:
                    vp = v[:, :, p].copy()
                    vq = v[:, :, q]
                    v[:, :, p] = c[:, None] * vp - (s * ph)[:, None] * vq
                    v[:, :, q] = s[:, None] * vp + (c * ph)[:, None] * vq
    w = np.diagonal(a, axis1=1, axis2=2).real.copy()
    return w, v


def hermitian_eigh(a, tol: float = HERMITIAN_TOL):
    """Eigenvalues (ascending) and eigenvectors of Hermitian matrices."""
    stack, lead = _as_stack(a)
    if hermiticity_residual(stack) > tol:
        raise NonHermitianInput(f"matrix not Hermitian within {tol:g}")
    stack = 0.5 * (stack + np.conj(np.swapaxes(stack, -1, -2)))
    w, v = _jacobi(stack, vectors=True)
    order = np.argsort(w, axis=1)
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    n = stack.shape[-1]
    return w.reshape(lead + (n,)), v.reshape(lead + (n, n))


def hermitian_eigenvalues(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian matrix (or stack of them).

    Raises
    ------
    NonHermitianInput
        If ``max |A - A^H|`` exceeds ``tol``.
    """
    stack, lead = _as_stack(a)
    if hermiticity_residual(stack) > tol:
        raise NonHermitianInput(f"matrix not Hermitian within {tol:g}")
    stack = 0.5 * (stack + np.conj(np.swapaxes(stack, -1, -2)))
    w, _ = _jacobi(stack, vectors=False)
    w.sort(axis=1)
    return w.reshape(lead + (stack.shape[-1],))


def singular_values(a) -> np.ndarray:
    """Singular values, descending. Hermitian input uses |eigenvalues| directly."""
    stack, lead = _as_stack(a)
    if not np.all(np.isfinite(stack)):
        raise ValueError("matrix has non-finite entries")
    n = stack.shape[-1]
    if hermiticity_residual(stack) <= HERMITIAN_TOL:
        sv = np.abs(hermitian_eigenvalues(stack))
    else:
        gram = np.conj(np.swapaxes(stack, -1, -2)) @ stack
        gram = 0.5 * (gram + np.conj(np.swapaxes(gram, -1, -2)))
        sv = np.sqrt(np.clip(hermitian_eigenvalues(gram, tol=np.inf), 0.0, None))
    sv = -np.sort(-sv, axis=-1)
    return sv.reshape(lead + (n,))


def schatten_norm(a, p) -> np.ndarray | float:
    """Schatten p-norm for ``p`` in {1, 2, inf}; works on matrix stacks."""
    sv = singular_values(a)
    if p == 1:
        out = sv.sum(axis=-1)
    elif p == 2:
        out = np.sqrt(np.sum(sv * sv, axis=-1))
    elif p in (np.inf, math.inf, "inf", "infinity"):
        out = sv.max(axis=-1)
    else:
        raise ValueError(f"unsupported Schatten index p={p!r}")
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------------------------
# Integration
# ----------------------------------------------------------------------------

Deriv = Callable[[float, np.ndarray], np.ndarray]


def _rk4(deriv: Deriv, y: np.ndarray, t: float, dt: float, k1=None) -> np.ndarray:
    half = 0.5 * dt
    if k1 is None:
        k1 = deriv(t, y)
    k2 = deriv(t + half, y + half * k1)
    k3 = deriv(t + half, y + half * k2)
    k4 = deriv(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(deriv: Deriv, y, t: float, dt: float, k1=None):
    """One classical fourth-order Runge-Kutta step of ``dy/dt = deriv(t, y)``.

    ``k1`` may carry an already evaluated ``deriv(t, y)``. Raises
    NonFiniteDerivative if a NaN/Inf enters at any stage (a non-finite stage
    always leaves a non-finite entry in the update).
    """
    y = np.asarray(y)
    y_new = _rk4(deriv, y, t, dt, k1)
    if not np.all(np.isfinite(y_new)):
        raise NonFiniteDerivative(f"non-finite RK4 stage at t={t}")
    return y_new


def rk4_step_batched(deriv: Deriv, y: np.ndarray, t: float, dt: float, k1=None):
    """RK4 step on a stack of independent states (leading axis).

    Rows that go non-finite are reset to zero so they cannot poison the
    others; their indices are reported in the returned boolean mask.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        y_new = _rk4(deriv, y, t, dt, k1)
    bad = ~np.isfinite(y_new.reshape(y_new.shape[0], -1)).all(axis=1)
    if bad.any():
        y_new[bad] = 0
    return y_new, bad


# ----------------------------------------------------------------------------
# Quadrature
# ----------------------------------------------------------------------------

def simpson_weights(n_samples: int, dt: float) -> np.ndarray:
    """Weights ``w`` such that ``w @ f`` is the composite Simpson integral.

    For an odd number of intervals the last interval uses the trapezoid rule.
    """
    if n_samples < 3:
        raise TooFewSamples(f"Simpson's rule needs >= 3 samples, got {n_samples}")
    n_int = n_samples - 1
    w = np.zeros(n_samples)
    m = n_int if n_int % 2 == 0 else n_int - 1
    if m > 0:
        w[0 : m + 1 : 2] = 2.0
        w[1:m:2] = 4.0
        w[0] = w[m] = 1.0
        w[: m + 1] *= dt / 3.0
    if m != n_int:
        log.debug("odd interval count %d: trapezoid on final interval", n_int)
        w[-2] += 0.5 * dt
        w[-1] += 0.5 * dt
    return w


def simpson_integrate(samples, dt: float) -> float:
    """Composite Simpson integral of uniformly spaced ``samples``."""
    f = np.asarray(samples, dtype=float)
    return float(simpson_weights(f.shape[0], dt) @ f)


def cumulative_trapezoid(f: np.ndarray, dx: float, axis: int = -1) -> np.ndarray:
    """Running trapezoid integral with a leading zero (same length as ``f``)."""
    f = np.moveaxis(np.asarray(f), axis, -1)
    out = np.zeros_like(f, dtype=np.result_type(f, float))
    out[..., 1:] = np.cumsum(0.5 * dx * (f[..., 1:] + f[..., :-1]), axis=-1)
    return np.moveaxis(out, -1, axis)


# ----------------------------------------------------------------------------
# Random streams
# ----------------------------------------------------------------------------

def trajectory_rng(master_seed: int, traj_index: int) -> np.random.Generator:
    """Independent generator for one trajectory.

    The stream depends only on ``(master_seed, traj_index)``, never on which
    worker draws it, so ensembles reproduce at any worker count.
    """
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(traj_index),))
    return np.random.Generator(np.random.PCG64(seq))
