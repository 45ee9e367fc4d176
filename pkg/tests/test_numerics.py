import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hybridqsl.errors import NonFiniteDerivative, NonHermitianInput, TooFewSamples
from hybridqsl.numerics import (
    TimeGrid,
    cumulative_trapezoid,
    hermitian_eigenvalues,
    hermitian_eigh,
    rk4_step,
    rk4_step_batched,
    schatten_norm,
    simpson_integrate,
    simpson_weights,
    singular_values,
    trajectory_rng,
)


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def mp_eigenvalues(a):
    """High-precision reference eigenvalues (independent of the Jacobi code)."""
    mpmath.mp.dps = 40
    m = mpmath.matrix(a.tolist())
    e, _ = mpmath.eighe(m)
    return np.sort(np.array([float(x) for x in e]))


def charpoly_eigenvalues(a):
    """Roots of det(x - A) from Faddeev-LeVerrier coefficients, in mpmath."""
    mpmath.mp.dps = 50
    n = a.shape[0]
    m = mpmath.matrix(a.tolist())
    coeffs = [mpmath.mpf(1)]
    mk = mpmath.zeros(n, n)
    eye = mpmath.eye(n)
    for k in range(1, n + 1):
        mk = m * mk + coeffs[-1] * eye
        coeffs.append(-sum((m * mk)[i, i] for i in range(n)) / k)
    roots = mpmath.polyroots(coeffs, maxsteps=200, extraprec=200)
    return np.sort(np.array([float(mpmath.re(r)) for r in roots]))


# --- time grid ----------------------------------------------------------------

def test_grid_from_horizon():
    g = TimeGrid.from_horizon(20.0, 0.005)
    assert g.n_steps == 4000
    assert g.times[-1] == pytest.approx(20.0, abs=1e-12)
    assert g.index_of(1.0) == 200


def test_grid_rejects_off_grid():
    with pytest.raises(ValueError):
        TimeGrid.from_horizon(1.0, 0.3)
    with pytest.raises(ValueError):
        TimeGrid.from_horizon(1.0, 0.005).index_of(0.0025)


# --- Hermitian eigenvalues ----------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 7])
def test_eigenvalues_match_high_precision_reference(rng, n):
    for _ in range(5):
        a = random_hermitian(rng, n)
        np.testing.assert_allclose(hermitian_eigenvalues(a), mp_eigenvalues(a), atol=1e-12)


def test_eigenvalues_match_characteristic_polynomial(rng):
    for _ in range(3):
        a = random_hermitian(rng, 7)
        np.testing.assert_allclose(hermitian_eigenvalues(a), charpoly_eigenvalues(a), atol=1e-8)


def test_eigenvalues_of_known_matrices():
    np.testing.assert_allclose(hermitian_eigenvalues(np.diag([3.0, -1.0, 2.0])), [-1, 2, 3])
    sy = np.array([[0, -1j], [1j, 0]])
    np.testing.assert_allclose(hermitian_eigenvalues(sy), [-1, 1], atol=1e-15)


def test_eigenvalues_degenerate():
    a = np.eye(4) * 2.5
    a[0, 0] = -1.0
    np.testing.assert_allclose(hermitian_eigenvalues(a), [-1, 2.5, 2.5, 2.5])


def test_eigenvectors_diagonalise(rng):
    a = random_hermitian(rng, 7)
    w, v = hermitian_eigh(a)
    np.testing.assert_allclose(a @ v, v * w, atol=1e-11)
    np.testing.assert_allclose(v.conj().T @ v, np.eye(7), atol=1e-12)


def test_eigenvalues_batched(rng):
    stack = np.stack([random_hermitian(rng, 7) for _ in range(20)])
    out = hermitian_eigenvalues(stack)
    assert out.shape == (20, 7)
    for a, e in zip(stack, out):
        np.testing.assert_allclose(e, mp_eigenvalues(a), atol=1e-12)


def test_non_hermitian_rejected():
    with pytest.raises(NonHermitianInput):
        hermitian_eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))


@given(arrays(np.float64, (5, 5), elements=st.floats(-10, 10)))
def test_eigenvalue_sum_is_trace(a):
    h = (a + a.T) / 2
    e = hermitian_eigenvalues(h)
    assert np.all(np.diff(e) >= -1e-12)
    assert e.sum() == pytest.approx(np.trace(h), abs=1e-9)


# --- singular values and Schatten norms ---------------------------------------

def test_singular_values_non_hermitian(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    ref = np.sort(np.linalg.svd(a, compute_uv=False))
    np.testing.assert_allclose(np.sort(singular_values(a)), ref, atol=1e-10)


def test_schatten_known_values():
    a = np.diag([3.0, -4.0])
    assert schatten_norm(a, 1) == pytest.approx(7.0)
    assert schatten_norm(a, 2) == pytest.approx(5.0)
    assert schatten_norm(a, math.inf) == pytest.approx(4.0)


def test_schatten_two_is_frobenius(rng):
    a = random_hermitian(rng, 7)
    assert schatten_norm(a, 2) == pytest.approx(np.linalg.norm(a), rel=1e-12)


def test_traceless_two_level_ratio(rng):
    # singular values {a, a}: ||.||_1 = sqrt2 ||.||_2 = 2 ||.||_inf
    for _ in range(10):
        x, y, z = rng.normal(size=3)
        a = np.array([[z, x - 1j * y], [x + 1j * y, -z]])
        n1, n2, ninf = (schatten_norm(a, p) for p in (1, 2, math.inf))
        assert n1 == pytest.approx(math.sqrt(2) * n2, rel=1e-12)
        assert n2 == pytest.approx(math.sqrt(2) * ninf, rel=1e-12)


@given(arrays(np.float64, (2, 4, 4), elements=st.floats(-5, 5)))
def test_schatten_ordering(parts):
    a = parts[0] + 1j * parts[1]
    a = a + a.conj().T
    n1, n2, ninf = (schatten_norm(a, p) for p in (1, 2, math.inf))
    assert n1 >= n2 - 1e-9
    assert n2 >= ninf - 1e-9


def test_schatten_rejects_other_p(rng):
    with pytest.raises(ValueError):
        schatten_norm(np.eye(2), 3)


# --- RK4 ----------------------------------------------------------------------

def _rk4_error(dt):
    # y' = y cos t, y(0) = 1: exact y = exp(sin t)
    f = lambda t, y: y * np.cos(t)
    y = np.array([1.0])
    n = int(round(3.0 / dt))
    for k in range(n):
        y = rk4_step(f, y, k * dt, dt)
    return abs(y[0] - math.exp(math.sin(3.0)))


def test_rk4_fourth_order():
    e1, e2 = _rk4_error(0.05), _rk4_error(0.025)
    assert math.log2(e1 / e2) >= 3.9


def test_rk4_harmonic_oscillator_phase():
    f = lambda t, y: np.array([y[1], -y[0]])
    y = np.array([1.0, 0.0])
    dt = 0.01
    for k in range(628):
        y = rk4_step(f, y, k * dt, dt)
    assert y[0] == pytest.approx(math.cos(6.28), abs=1e-9)


def test_rk4_non_finite_raises():
    with pytest.raises(NonFiniteDerivative):
        rk4_step(lambda t, y: y * np.inf, np.array([1.0]), 0.0, 0.1)


def test_rk4_batched_flags_bad_rows():
    f = lambda t, y: np.where(y > 1.5, np.inf, -y)
    y = np.array([[1.0], [2.0]])
    out, bad = rk4_step_batched(f, y, 0.0, 0.1)
    assert list(bad) == [False, True]
    assert np.isfinite(out).all()


# --- Simpson ------------------------------------------------------------------

@pytest.mark.parametrize("n", [3, 5, 11, 101])
def test_simpson_exact_for_cubics(n):
    x = np.linspace(0.0, 2.0, n)
    dt = x[1] - x[0]
    assert simpson_integrate(x**3 - x**2 + 1, dt) == pytest.approx(4 - 8 / 3 + 2, abs=1e-12)


def test_simpson_x_squared():
    x = np.linspace(0.0, 2.0, 21)
    assert simpson_integrate(x**2, 0.1) == pytest.approx(8 / 3, abs=1e-13)


def test_simpson_order():
    def err(n):
        x = np.linspace(0, math.pi, n + 1)
        return abs(simpson_integrate(np.sin(x), x[1] - x[0]) - 2.0)

    assert math.log2(err(16) / err(32)) >= 3.9


def test_simpson_even_sample_count_uses_closing_interval():
    x = np.linspace(0.0, 1.0, 6)
    w = simpson_weights(6, 0.2)
    assert w.sum() == pytest.approx(1.0)
    assert simpson_integrate(x, 0.2) == pytest.approx(0.5, abs=1e-14)


def test_simpson_too_few_samples():
    with pytest.raises(TooFewSamples):
        simpson_integrate(np.array([1.0, 2.0]), 0.1)


def test_cumulative_trapezoid():
    x = np.linspace(0, 1, 11)
    c = cumulative_trapezoid(2 * x, 0.1)
    assert c[0] == 0.0
    np.testing.assert_allclose(c, x**2, atol=1e-14)


# --- RNG streams --------------------------------------------------------------

def test_trajectory_streams_reproducible_and_distinct():
    a = trajectory_rng(5, 3).standard_normal(4)
    b = trajectory_rng(5, 3).standard_normal(4)
    c = trajectory_rng(5, 4).standard_normal(4)
    d = trajectory_rng(6, 3).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)
