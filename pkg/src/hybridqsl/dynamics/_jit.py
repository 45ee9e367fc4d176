"""Compiled per-trajectory propagation loops.

These mirror ``SpinBosonModel.deriv`` / ``FmoModel.deriv`` element by
element and run the same classic RK4 step, one trajectory at a time, so
that no batch-sized temporaries are created. The numpy implementations in
``models`` remain the reference; the test suite compares the two.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _sbm_deriv(y, out, delta, c, w2):
    n = c.shape[0]
    q00 = 0j
    q01 = 0j
    q10 = 0j
    q11 = 0j
    for j in range(n):
        r = y[3 + j]
        q00 += c[j] * r[0, 0]
        q01 += c[j] * r[0, 1]
        q10 += c[j] * r[1, 0]
        q11 += c[j] * r[1, 1]
    for a in range(2):
        for b in range(2):
            # {Q, S}[a, b] for S = sigma_y and sigma_x
            qa0 = q00 if a == 0 else q10
            qa1 = q01 if a == 0 else q11
            q0b = q00 if b == 0 else q01
            q1b = q10 if b == 0 else q11
            ay = qa0 * y[1, 0, b] + qa1 * y[1, 1, b] + y[1, a, 0] * q0b + y[1, a, 1] * q1b
            ax = qa0 * y[0, 0, b] + qa1 * y[0, 1, b] + y[0, a, 0] * q0b + y[0, a, 1] * q1b
            out[0, a, b] = ay
            out[1, a, b] = 2.0 * delta * y[2, a, b] - ax
            out[2, a, b] = -2.0 * delta * y[1, a, b]
    for j in range(n):
        for a in range(2):
            for b in range(2):
                out[3 + j, a, b] = y[3 + n + j, a, b]
                out[3 + n + j, a, b] = -w2[j] * y[3 + j, a, b] + c[j] * y[2, a, b]


@njit(cache=True)
def _fmo_deriv(y, out, v, c, w2, n_sub, proj, q):
    L = v.shape[0]
    d = np.empty((L, L), dtype=np.complex128)
    acc = np.empty(L, dtype=np.complex128)
    m = c.shape[1]
    L2 = L * L
    for k in range(n_sub):
        proj[k] = y[k]
    if n_sub < L2:
        # completeness: P_LL = 1 - sum of the other diagonal projectors
        for a in range(L):
            for b in range(L):
                s = 1.0 + 0j if a == b else 0j
                for n in range(L - 1):
                    s -= y[n * L + n, a, b]
                proj[L2 - 1, a, b] = s
    for n in range(L):
        for a in range(L):
            for b in range(L):
                s = 0j
                base = n_sub + n * m
                for j in range(m):
                    s += c[n, j] * y[base + j, a, b]
                q[n, a, b] = s
    for n in range(L):
        for mm in range(L):
            k = n * L + mm
            if k >= n_sub:
                continue
            for a in range(L):
                for g in range(L):
                    d[a, g] = q[n, a, g] - q[mm, a, g]
            for a in range(L):
                for b in range(L):
                    acc[b] = 0j
                # i (sum_l V_ln P_lm - sum_l V_ml P_nl)
                for l in range(L):
                    vl = v[l, n]
                    vm = v[mm, l]
                    for b in range(L):
                        acc[b] += 1j * (vl * proj[l * L + mm, a, b] - vm * proj[n * L + l, a, b])
                # -i/2 (D P + P D)
                for g in range(L):
                    dag = -0.5j * d[a, g]
                    pag = -0.5j * proj[k, a, g]
                    for b in range(L):
                        acc[b] += dag * proj[k, g, b] + pag * d[g, b]
                for b in range(L):
                    out[k, a, b] = acc[b]
    n_osc = L * m
    for n in range(L):
        for j in range(m):
            i = n * m + j
            for a in range(L):
                for b in range(L):
                    out[n_sub + i, a, b] = y[n_sub + n_osc + i, a, b]
                    out[n_sub + n_osc + i, a, b] = -w2[n, j] * y[n_sub + i, a, b] + c[n, j] * proj[n * L + n, a, b]


@njit(cache=True)
def _all_finite(x):
    # a non-finite state always shows up in the next derivative, so
    # checking k1 once per step is enough
    # any inf or nan poisons the sum
    acc = 0.0
    for v in x.ravel():
        acc += v.real + v.imag
    return np.isfinite(acc)


@njit(cache=True)
def _axpy(out, y, h, k):
    of = out.ravel()
    yf = y.ravel()
    kf = k.ravel()
    for e in range(yf.shape[0]):
        of[e] = yf[e] + h * kf[e]


@njit(cache=True)
def _rk4_combine(y, dt, k1, k2, k3, k4):
    yf = y.ravel()
    f1 = k1.ravel()
    f2 = k2.ravel()
    f3 = k3.ravel()
    f4 = k4.ravel()
    w = dt / 6.0
    for e in range(yf.shape[0]):
        yf[e] += w * (f1[e] + 2.0 * f2[e] + 2.0 * f3[e] + f4[e])


@njit(cache=True)
def _sbm_observe(y, dy, obs, dobs, i):
    for m in range(3):
        obs[i, m] = y[m, 0, 0]
        dobs[i, m] = dy[m, 0, 0]


@njit(cache=True)
def sbm_propagate(y0, n_steps, dt, delta, c, w2):
    """RK4 over ``n_steps`` for each trajectory in ``y0``; returns obs, dobs, failed."""
    nb = y0.shape[0]
    obs = np.zeros((nb, n_steps + 1, 3), dtype=np.complex128)
    dobs = np.zeros_like(obs)
    failed = np.zeros(nb, dtype=np.bool_)
    shape = y0.shape[1:]
    k1 = np.empty(shape, dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    tmp = np.empty_like(k1)
    for t in range(nb):
        y = y0[t].copy()
        _sbm_deriv(y, k1, delta, c, w2)
        for i in range(n_steps + 1):
            if not _all_finite(k1):
                failed[t] = True
                break
            _sbm_observe(y, k1, obs[t], dobs[t], i)
            if i == n_steps:
                break
            _axpy(tmp, y, 0.5 * dt, k1)
            _sbm_deriv(tmp, k2, delta, c, w2)
            _axpy(tmp, y, 0.5 * dt, k2)
            _sbm_deriv(tmp, k3, delta, c, w2)
            _axpy(tmp, y, dt, k3)
            _sbm_deriv(tmp, k4, delta, c, w2)
            _rk4_combine(y, dt, k1, k2, k3, k4)
            _sbm_deriv(y, k1, delta, c, w2)
        if failed[t]:
            obs[t] = 0
            dobs[t] = 0
    return obs, dobs, failed


@njit(cache=True)
def _fmo_observe(y, dy, obs, dobs, i, n_sub, site):
    L = obs.shape[-1]
    L2 = L * L
    for k in range(n_sub):
        obs[i, k // L, k % L] = y[k, site, site]
        dobs[i, k // L, k % L] = dy[k, site, site]
    if n_sub < L2:
        s = 1.0 + 0j
        ds = 0j
        for n in range(L - 1):
            s -= y[n * L + n, site, site]
            ds -= dy[n * L + n, site, site]
        obs[i, L - 1, L - 1] = s
        dobs[i, L - 1, L - 1] = ds


@njit(cache=True)
def fmo_propagate(y0, n_steps, dt, v, c, w2, n_sub, site):
    """RK4 over ``n_steps`` for each trajectory in ``y0``; returns obs, dobs, failed."""
    nb = y0.shape[0]
    L = v.shape[0]
    obs = np.zeros((nb, n_steps + 1, L, L), dtype=np.complex128)
    dobs = np.zeros_like(obs)
    failed = np.zeros(nb, dtype=np.bool_)
    shape = y0.shape[1:]
    k1 = np.empty(shape, dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    tmp = np.empty_like(k1)
    proj = np.empty((L * L, L, L), dtype=np.complex128)
    q = np.empty((L, L, L), dtype=np.complex128)
    for t in range(nb):
        y = y0[t].copy()
        _fmo_deriv(y, k1, v, c, w2, n_sub, proj, q)
        for i in range(n_steps + 1):
            if not _all_finite(k1):
                failed[t] = True
                break
            _fmo_observe(y, k1, obs[t], dobs[t], i, n_sub, site)
            if i == n_steps:
                break
            _axpy(tmp, y, 0.5 * dt, k1)
            _fmo_deriv(tmp, k2, v, c, w2, n_sub, proj, q)
            _axpy(tmp, y, 0.5 * dt, k2)
            _fmo_deriv(tmp, k3, v, c, w2, n_sub, proj, q)
            _axpy(tmp, y, dt, k3)
            _fmo_deriv(tmp, k4, v, c, w2, n_sub, proj, q)
            _rk4_combine(y, dt, k1, k2, k3, k4)
            _fmo_deriv(y, k1, v, c, w2, n_sub, proj, q)
        if failed[t]:
            obs[t] = 0
            dobs[t] = 0
    return obs, dobs, failed
