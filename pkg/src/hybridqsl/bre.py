"""Second-order Bloch-Redfield propagators for the spin-boson Bloch vector.

Both solvers share the bath kernels ``M1(t) + i M2(t)`` tabulated on a grid
of half the propagation step, which lets every RK4 stage read kernel values
without interpolation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .bath import OhmicExponential
from .dynamics.ensemble import ReducedSeries, series_from_bloch
from .errors import InvalidParameter, KernelRangeExceeded, QuadratureNotConverged
from .numerics import TimeGrid, cumulative_trapezoid, simpson_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelTable:
    dt: float
    m1: np.ndarray
    m2: np.ndarray
    omega_max: float
    n_omega: int

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.m1.shape[0])

    @property
    def t_max(self) -> float:
        return self.dt * (self.m1.shape[0] - 1)


def _kernel_quadrature(j: OhmicExponential, beta, times, omega_max, n_int, block=256):
    omega = np.linspace(0.0, omega_max, n_int + 1)
    w = simpson_weights(n_int + 1, omega[1] - omega[0]) * (4.0 / math.pi)
    wc = w * j.coth_weighted(omega, beta)
    ws = w * j(omega)
    m1 = np.empty(times.shape[0])
    m2 = np.empty(times.shape[0])
    for a in range(0, times.shape[0], block):
        phase = np.outer(times[a : a + block], omega)
        m1[a : a + block] = np.cos(phase) @ wc
        m2[a : a + block] = np.sin(phase) @ ws
    m2[times == 0.0] = 0.0
    return m1, m2


def compute_kernels(
    j: OhmicExponential,
    beta: float,
    grid: TimeGrid,
    omega_max: float | None = None,
    tol: float = 1e-6,
    n_start: int = 1024,
    n_limit: int = 2**17,
) -> KernelTable:
    """Tabulate ``M1``, ``M2`` on ``[0, grid.t_end]`` at spacing ``grid.dt / 2``.

    The frequency integral uses composite Simpson on ``[0, omega_max]``
    (default ``40 omega_c``) and doubles the node count until successive
    tables differ by less than ``tol`` (relative to ``max(1, |M|)``).
    """
    if not isinstance(j, OhmicExponential):
        raise InvalidParameter("kernels are implemented for the Ohmic-exponential law")
    if not beta > 0:
        raise InvalidParameter(f"beta must be positive, got {beta}")
    if omega_max is None:
        omega_max = 40.0 * j.omega_c
    h = 0.5 * grid.dt
    n_t = 2 * grid.n_steps + 1
    times = h * np.arange(n_t)
    # start from a grid that resolves the fastest cos(w t) at t_max
    n = n_start
    while omega_max / n * times[-1] > 0.5 and n < n_limit:
        n *= 2
    m1, m2 = _kernel_quadrature(j, beta, times, omega_max, n)
    while True:
        if 2 * n > n_limit:
            raise QuadratureNotConverged(f"no convergence with {n} frequency nodes")
        m1b, m2b = _kernel_quadrature(j, beta, times, omega_max, 2 * n)
        scale = max(1.0, np.abs(m1b).max(), np.abs(m2b).max())
        err = max(np.abs(m1b - m1).max(), np.abs(m2b - m2).max())
        n *= 2
        m1, m2 = m1b, m2b
        if err < tol * scale:
            break
    log.debug("kernel quadrature converged with %d nodes (change %.2e)", n, err)
    return KernelTable(h, m1, m2, float(omega_max), n)


def ohmic_m2_exact(xi, omega_c, t):
    """Closed form of ``M2`` for the Ohmic-exponential law."""
    t = np.asarray(t, dtype=float)
    return 4.0 * xi * omega_c**3 * t / (1.0 + (omega_c * t) ** 2) ** 2


def _check_range(kernels: KernelTable, grid: TimeGrid):
    if not math.isclose(kernels.dt, 0.5 * grid.dt, rel_tol=1e-9):
        raise KernelRangeExceeded(
            f"kernel spacing {kernels.dt} must be half the step {grid.dt}"
        )
    if kernels.t_max < grid.t_end - 1e-9 * grid.dt:
        raise KernelRangeExceeded(
            f"kernels cover t <= {kernels.t_max}, propagation needs {grid.t_end}"
        )
    if grid.t0 != 0.0:
        raise KernelRangeExceeded("propagation must start at t = 0")


def _default_b0(b0):
    return np.array([0.0, 0.0, 1.0]) if b0 is None else np.asarray(b0, dtype=float)


def nm_bre_propagate(delta, kernels: KernelTable, grid: TimeGrid, b0=None) -> ReducedSeries:
    """Non-Markovian Bloch-Redfield equation (memory kernels, Born approximation).

    History integrals are trapezoid sums on the half-step kernel grid. Points
    of ``B`` between stored steps are linearly interpolated, and the current
    stage estimate stands in for ``B`` at the stage time itself.
    """
    _check_range(kernels, grid)
    h = kernels.dt
    n_steps = grid.n_steps
    n_half = 2 * n_steps + 1
    s = h * np.arange(n_half)
    m1 = kernels.m1[:n_half]
    m2 = kernels.m2[:n_half]
    g_x = -np.sin(2 * delta * s) * m2
    g_xx = np.cos(2 * delta * s) * m1
    g_yy = m1
    drive_x = cumulative_trapezoid(g_x, h)

    hist = np.zeros((n_half, 3))
    b = np.zeros((n_steps + 1, 3))
    db = np.zeros((n_steps + 1, 3))
    b[0] = hist[0] = _default_b0(b0)

    def rhs(idx, y):
        # trapezoid weights h/2, h, ..., h, h/2 over s = 0 .. idx*h
        if idx == 0:
            conv_x = conv_y = 0.0
        else:
            past = hist[idx::-1]
            conv_x = h * (g_xx[: idx + 1] @ past[:, 0] - 0.5 * (g_xx[0] * past[0, 0] + g_xx[idx] * past[idx, 0]))
            conv_y = h * (g_yy[: idx + 1] @ past[:, 1] - 0.5 * (g_yy[0] * past[0, 1] + g_yy[idx] * past[idx, 1]))
        return np.array([
            -drive_x[idx] - conv_x,
            2 * delta * y[2] - conv_y,
            -2 * delta * y[1],
        ])

    dt = grid.dt
    for k in range(n_steps):
        i0 = 2 * k
        y = b[k]
        hist[i0] = y
        k1 = rhs(i0, y)
        db[k] = k1
        y2 = y + 0.5 * dt * k1
        hist[i0 + 1] = y2
        k2 = rhs(i0 + 1, y2)
        y3 = y + 0.5 * dt * k2
        hist[i0 + 1] = y3
        k3 = rhs(i0 + 1, y3)
        y4 = y + dt * k3
        hist[i0 + 2] = y4
        hist[i0 + 1] = 0.5 * (y + y4)
        k4 = rhs(i0 + 2, y4)
        b[k + 1] = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        hist[i0 + 2] = b[k + 1]
        hist[i0 + 1] = 0.5 * (y + b[k + 1])
    db[n_steps] = rhs(2 * n_steps, b[n_steps])
    return _finish(grid, b, db, "nm_bre")


def m_bre_coefficients(delta, kernels: KernelTable, n_half: int):
    """Cumulative-trapezoid coefficients ``G_x, G_xx (= G_yy), G_yz`` on the half grid."""
    h = kernels.dt
    s = h * np.arange(n_half)
    m1 = kernels.m1[:n_half]
    m2 = kernels.m2[:n_half]
    sin2 = np.sin(2 * delta * s)
    g_x = -cumulative_trapezoid(sin2 * m2, h)
    g_xx = cumulative_trapezoid(np.cos(2 * delta * s) * m1, h)
    g_yz = -cumulative_trapezoid(sin2 * m1, h)
    return g_x, g_xx, g_yz


def m_bre_propagate(delta, kernels: KernelTable, grid: TimeGrid, b0=None) -> ReducedSeries:
    """Markovian (time-local) Bloch-Redfield equation."""
    _check_range(kernels, grid)
    n_steps = grid.n_steps
    g_x, g_xx, g_yz = m_bre_coefficients(delta, kernels, 2 * n_steps + 1)

    def rhs(idx, y):
        return np.array([
            -g_x[idx] - g_xx[idx] * y[0],
            2 * delta * y[2] - g_xx[idx] * y[1] - g_yz[idx] * y[2],
            -2 * delta * y[1],
        ])

    b = np.zeros((n_steps + 1, 3))
    db = np.zeros((n_steps + 1, 3))
    b[0] = _default_b0(b0)
    dt = grid.dt
    for k in range(n_steps):
        i0 = 2 * k
        y = b[k]
        k1 = rhs(i0, y)
        db[k] = k1
        k2 = rhs(i0 + 1, y + 0.5 * dt * k1)
        k3 = rhs(i0 + 1, y + 0.5 * dt * k2)
        k4 = rhs(i0 + 2, y + dt * k3)
        b[k + 1] = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    db[n_steps] = rhs(2 * n_steps, b[n_steps])
    return _finish(grid, b, db, "m_bre")


def _finish(grid, b, db, method) -> ReducedSeries:
    norm = float(np.sqrt((b**2).sum(axis=1)).max())
    if norm > 1 + 1e-6:
        log.warning("%s Bloch vector left the unit ball (|B| = %.6f)", method, norm)
    return series_from_bloch(grid, b, db, meta={"method": method, "max_bloch_norm": norm})
