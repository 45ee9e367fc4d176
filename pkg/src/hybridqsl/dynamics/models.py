"""Equations of motion for the matrix-valued coordinates.

Both models evolve every coordinate as an ``L x L`` matrix of c-numbers.
Products such as ``R_j sigma_m`` are matrix products over the inner basis
index, and the Weyl-symmetrised couplings appear as anticommutators.
"""

from __future__ import annotations

import numpy as np

from ..bath import CM_TO_RAD_PER_FS, DiscretizedBath, WignerSample, sample_wigner
from ..errors import AsymmetricTable, InvalidParameter
from .layout import CoordinateLayout, fmo_layout, sbm_layout

try:
    from . import _jit
except ImportError:  # pragma: no cover - numba missing
    _jit = None

BACKENDS = ("numba", "numpy")


def _resolve_backend(backend):
    if backend is None:
        return "numba" if _jit is not None else "numpy"
    if backend not in BACKENDS:
        raise InvalidParameter(f"unknown backend {backend!r}")
    if backend == "numba" and _jit is None:
        raise InvalidParameter("numba backend requested but numba is not installed")
    return backend

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def sbm_initial_elements() -> np.ndarray:
    """Pauli matrices in the ``{|+>, |->}`` basis, shape ``(3, 2, 2)``.

    Index 0 is ``|+>`` (spin up), so ``[2, 0, 0]`` is ``sigma_z^{++} = 1``.
    """
    return np.stack([PAULI_X, PAULI_Y, PAULI_Z])


def fmo_initial_elements(n_sites: int = 7) -> np.ndarray:
    """Site projectors ``|n><m|``, shape ``(L*L, L, L)`` indexed by ``n*L + m``."""
    L = n_sites
    out = np.zeros((L * L, L, L), dtype=np.complex128)
    for n in range(L):
        for m in range(L):
            out[n * L + m, n, m] = 1.0
    return out


class SpinBosonModel:
    """Two-level spin, ``H = -Delta sigma_x`` plus Ohmic oscillators coupled to ``sigma_z``.

    Observables are ``sigma_m^{++}`` for ``m = x, y, z`` (the spin-up column).
    """

    name = "sbm"
    initial_index = 0

    def __init__(self, delta: float, bath: DiscretizedBath, backend: str | None = None):
        if not delta > 0:
            raise InvalidParameter(f"Delta must be positive, got {delta}")
        self.delta = float(delta)
        self.backend = _resolve_backend(backend)
        self.bath = bath
        self.layout: CoordinateLayout = sbm_layout(bath.n_osc)
        self.L = 2
        self._c = np.ascontiguousarray(bath.couplings, dtype=float)
        self._w2 = np.ascontiguousarray(bath.omegas**2, dtype=float)[:, None, None]
        self._c3 = self._c[:, None, None]

    def sample(self, rng: np.random.Generator) -> WignerSample:
        return sample_wigner(self.bath, rng)

    def initial_state(self, samples) -> np.ndarray:
        b = len(samples)
        n = self.bath.n_osc
        y = np.zeros((b,) + self.layout.shape, dtype=np.complex128)
        y[:, :3] = sbm_initial_elements()
        r = np.array([s.R for s in samples])
        p = np.array([s.P for s in samples])
        y[:, 3 : 3 + n, 0, 0] = r
        y[:, 3 : 3 + n, 1, 1] = r
        y[:, 3 + n :, 0, 0] = p
        y[:, 3 + n :, 1, 1] = p
        return y

    def deriv(self, t, y: np.ndarray) -> np.ndarray:
        self.layout.check(y)
        b = y.shape[0]
        n = self.bath.n_osc
        sx, sy, sz = y[:, 0], y[:, 1], y[:, 2]
        r = y[:, 3 : 3 + n]
        dy = np.empty_like(y)
        # Q = sum_j C_j R_j  (one 2x2 matrix per trajectory)
        q = np.matmul(self._c, r.reshape(b, n, 4)).reshape(b, 2, 2)
        dy[:, 0] = q @ sy + sy @ q
        dy[:, 1] = 2.0 * self.delta * sz - (q @ sx + sx @ q)
        dy[:, 2] = -2.0 * self.delta * sy
        dy[:, 3 : 3 + n] = y[:, 3 + n :]
        np.multiply(-self._w2, r, out=dy[:, 3 + n :])
        dy[:, 3 + n :] += self._c3 * sz[:, None]
        return dy

    def observe(self, y: np.ndarray, derivative: bool = False) -> np.ndarray:
        """``sigma_m^{++}`` for each state in the batch, shape ``(batch, 3)``."""
        return y[:, :3, 0, 0].copy()

    def propagate(self, y0: np.ndarray, n_steps: int, dt: float):
        """Compiled RK4 loop; ``(obs, dobs, failed)`` or None for the numpy path."""
        if self.backend != "numba":
            return None
        self.layout.check(y0)
        w2 = np.ascontiguousarray(self.bath.omegas**2, dtype=float)
        return _jit.sbm_propagate(np.ascontiguousarray(y0), n_steps, dt, self.delta, self._c, w2)


def build_fmo_hamiltonian(table_cm, bath: DiscretizedBath | None = None, offset="min") -> np.ndarray:
    """Subsystem matrix ``V`` in rad/fs from a site table in cm^-1.

    The diagonal receives the reorganisation shift ``sum_j C_j^2 / (2 w_j^2)``
    of the site bath. ``offset`` ("min", "mean", a number in cm^-1, or None)
    is subtracted from every diagonal entry; a uniform shift leaves the
    dynamics unchanged but keeps the fixed-step integrator far from the
    ~2.3 rad/fs optical frequency.
    """
    table = np.asarray(table_cm, dtype=float)
    if table.ndim != 2 or table.shape[0] != table.shape[1]:
        raise AsymmetricTable(f"site table must be square, got {table.shape}")
    if not np.allclose(table, table.T, rtol=0, atol=1e-12):
        raise AsymmetricTable("site table is not symmetric")
    diag = np.diag(table).copy()
    if offset is None:
        shift = 0.0
    elif offset == "min":
        shift = diag.min()
    elif offset == "mean":
        shift = diag.mean()
    else:
        shift = float(offset)
    v = table * CM_TO_RAD_PER_FS
    np.fill_diagonal(v, (diag - shift) * CM_TO_RAD_PER_FS)
    if bath is not None:
        v[np.diag_indices_from(v)] += bath.reorganization
    return v


class FmoModel:
    """Multi-site exciton model; every site has its own copy of one bath law.

    Observables are ``P_nm^{11}`` (column of the initially excited site),
    shape ``(batch, L, L)`` with entry ``[n, m]``.
    """

    name = "fmo"

    def __init__(
        self,
        v: np.ndarray,
        bath: DiscretizedBath,
        initial_site: int = 0,
        redundant: bool = False,
        backend: str | None = None,
    ):
        self.backend = _resolve_backend(backend)
        v = np.asarray(v, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or not np.allclose(v, v.T):
            raise AsymmetricTable("coupling matrix must be real symmetric")
        self.v = v
        self.L = v.shape[0]
        if not 0 <= initial_site < self.L:
            raise InvalidParameter(f"initial site {initial_site} outside 0..{self.L - 1}")
        self.initial_index = initial_site
        self.bath = bath
        self.redundant = redundant
        self.layout: CoordinateLayout = fmo_layout(self.L, bath.n_osc, redundant=redundant)
        L, M = self.L, bath.n_osc
        self._m = M
        self._c = np.broadcast_to(bath.couplings, (L, M)).astype(float)
        self._cmat = np.ascontiguousarray(self._c[:, None, :])
        self._w2 = np.broadcast_to(bath.omegas**2, (L, M))[None, :, :, None, None].copy()
        self._c5 = self._c[None, :, :, None, None].copy()
        self._vt = np.ascontiguousarray(v.T).astype(np.complex128)
        self._v = np.ascontiguousarray(v).astype(np.complex128)
        self._diag = np.arange(L) * (L + 1)
        self._eye = np.eye(L, dtype=np.complex128)

    def sample(self, rng: np.random.Generator) -> WignerSample:
        return sample_wigner(self.bath, rng, size=self.L)

    def initial_state(self, samples) -> np.ndarray:
        b = len(samples)
        L, M = self.L, self._m
        lay = self.layout
        y = np.zeros((b,) + lay.shape, dtype=np.complex128)
        y[:, : lay.n_subsystem_coords] = fmo_initial_elements(L)[: lay.n_subsystem_coords]
        r = np.array([s.R for s in samples]).reshape(b, L * M)
        p = np.array([s.P for s in samples]).reshape(b, L * M)
        idx = np.arange(L)
        y[:, lay.r_slice][:, :, idx, idx] = r[:, :, None]
        y[:, lay.p_slice][:, :, idx, idx] = p[:, :, None]
        return y

    def _projectors(self, sub: np.ndarray, identity: float) -> np.ndarray:
        """All ``L*L`` projector matrices, restoring the eliminated one if needed."""
        if self.redundant:
            return sub
        b = sub.shape[0]
        last = identity * self._eye - sub[:, self._diag[:-1]].sum(axis=1)
        return np.concatenate([sub, last.reshape(b, 1, self.L, self.L)], axis=1)

    def deriv(self, t, y: np.ndarray) -> np.ndarray:
        lay = self.layout
        lay.check(y)
        b = y.shape[0]
        L, M = self.L, self._m
        L2 = L * L
        proj = self._projectors(y[:, : lay.n_subsystem_coords], 1.0)
        # sum_l V_ln P_lm - sum_k V_mk P_nk
        t1 = np.matmul(self._vt, proj.reshape(b, L, L * L2))
        t2 = np.matmul(self._v, proj.reshape(b * L, L, L2))
        dproj = (t1.reshape(b, L, L, L, L) - t2.reshape(b, L, L, L, L)) * 1j
        r = y[:, lay.r_slice].reshape(b, L, M, L, L)
        pb = y[:, lay.p_slice]
        q = np.matmul(self._cmat, r.reshape(b, L, M, L2)).reshape(b, L, L, L)
        d = q[:, :, None] - q[:, None, :]
        p5 = proj.reshape(b, L, L, L, L)
        dproj -= 0.5j * (np.matmul(d, p5) + np.matmul(p5, d))
        dy = np.empty_like(y)
        dy[:, : lay.n_subsystem_coords] = dproj.reshape(b, L2, L, L)[:, : lay.n_subsystem_coords]
        dy[:, lay.r_slice] = pb
        pnn = p5[:, np.arange(L), np.arange(L)]
        dpb = dy[:, lay.p_slice].reshape(b, L, M, L, L)
        np.multiply(-self._w2, r, out=dpb)
        dpb += self._c5 * pnn[:, :, None]
        return dy

    def observe(self, y: np.ndarray, derivative: bool = False) -> np.ndarray:
        """``P_nm^{aa}`` for the initial site ``a``; derivatives drop the identity part."""
        a = self.initial_index
        sub = y[:, : self.layout.n_subsystem_coords, a, a]
        b = y.shape[0]
        if self.redundant:
            return sub.reshape(b, self.L, self.L).copy()
        last = (0.0 if derivative else 1.0) - sub[:, self._diag[:-1]].sum(axis=1)
        return np.concatenate([sub, last[:, None]], axis=1).reshape(b, self.L, self.L)

    def propagate(self, y0: np.ndarray, n_steps: int, dt: float):
        """Compiled RK4 loop; ``(obs, dobs, failed)`` or None for the numpy path."""
        if self.backend != "numba":
            return None
        self.layout.check(y0)
        w2 = np.ascontiguousarray(self._w2[0, :, :, 0, 0])
        return _jit.fmo_propagate(
            np.ascontiguousarray(y0), n_steps, dt, np.ascontiguousarray(self.v), np.ascontiguousarray(self._c),
            w2, self.layout.n_subsystem_coords, self.initial_index,
        )
