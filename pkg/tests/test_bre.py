import numpy as np
import pytest

from hybridqsl.bath import OhmicExponential
from hybridqsl.bre import (
    compute_kernels,
    m_bre_coefficients,
    m_bre_propagate,
    nm_bre_propagate,
    ohmic_m2_exact,
)
from hybridqsl.errors import InvalidParameter, KernelRangeExceeded
from hybridqsl.numerics import TimeGrid

# M1(t) for xi = 0.1, omega_c = 1 from a 30-digit mpmath quadrature over [0, inf)
M1_REF = {
    1.0: {0.0: 0.457973626739291, 0.5: 0.331279156380025, 2.0: 0.0739724648563778},
    0.5: {0.0: 0.831894506957162, 0.5: 0.644800154596422, 2.0: 0.157044982314867},
}


@pytest.fixture(scope="module")
def grid2():
    return TimeGrid.from_horizon(2.0, 0.01)


@pytest.mark.parametrize("beta", [1.0, 0.5])
def test_m1_matches_reference(grid2, beta):
    k = compute_kernels(OhmicExponential(0.1, 1.0), beta, grid2)
    for t, ref in M1_REF[beta].items():
        i = int(round(t / k.dt))
        assert k.m1[i] == pytest.approx(ref, abs=2e-6)


def test_m2_matches_closed_form(grid2):
    k = compute_kernels(OhmicExponential(0.1, 1.0), 1.0, grid2)
    np.testing.assert_allclose(k.m2, ohmic_m2_exact(0.1, 1.0, k.times), atol=2e-6)
    assert ohmic_m2_exact(0.1, 1.0, 0.5) == pytest.approx(0.128)
    assert ohmic_m2_exact(0.1, 1.0, 2.0) == pytest.approx(0.032)
    assert k.m2[0] == 0.0


def test_m1_high_temperature_limit():
    grid = TimeGrid.from_horizon(0.1, 0.01)
    xi, T = 0.1, 20.0
    k = compute_kernels(OhmicExponential(xi, 1.0), 1 / T, grid)
    # leading behaviour 4 xi T omega_c with relative correction ~ 1/(6 T^2)
    assert k.m1[0] == pytest.approx(4 * xi * T * (1 + 1 / (6 * T**2)), rel=1e-4)


def test_kernel_table_geometry(grid2):
    k = compute_kernels(OhmicExponential(0.1, 1.0), 1.0, grid2)
    assert k.dt == pytest.approx(0.005)
    assert k.m1.shape == (401,)
    assert k.t_max == pytest.approx(2.0)


def test_quadrature_refinement_is_stable(grid2):
    j = OhmicExponential(0.3, 1.0)
    a = compute_kernels(j, 1.0, grid2)
    b = compute_kernels(j, 1.0, grid2, tol=1e-9)
    np.testing.assert_allclose(a.m1, b.m1, atol=1e-6)
    np.testing.assert_allclose(a.m2, b.m2, atol=1e-6)
    # widening the frequency window changes nothing at this tolerance
    c = compute_kernels(j, 1.0, grid2, omega_max=60.0)
    np.testing.assert_allclose(a.m1, c.m1, atol=1e-6)


def test_kernel_errors(grid2):
    with pytest.raises(InvalidParameter):
        compute_kernels(OhmicExponential(0.1, 1.0), 0.0, grid2)
    k = compute_kernels(OhmicExponential(0.1, 1.0), 1.0, TimeGrid.from_horizon(1.0, 0.01))
    with pytest.raises(KernelRangeExceeded):
        nm_bre_propagate(0.2, k, grid2)
    with pytest.raises(KernelRangeExceeded):
        m_bre_propagate(0.2, k, TimeGrid.from_horizon(1.0, 0.02))


@pytest.mark.parametrize("solver", [nm_bre_propagate, m_bre_propagate])
def test_uncoupled_bloch_rotation_is_exact(solver):
    delta = 0.2
    grid = TimeGrid.from_horizon(5.0, 0.005)
    k = compute_kernels(OhmicExponential(0.0, 1.0), 1.0, grid)
    s = solver(delta, k, grid)
    t = grid.times
    np.testing.assert_allclose(s.bloch[:, 0], 0, atol=1e-14)
    np.testing.assert_allclose(s.bloch[:, 1], np.sin(2 * delta * t), atol=1e-10)
    np.testing.assert_allclose(s.bloch[:, 2], np.cos(2 * delta * t), atol=1e-10)


@pytest.mark.parametrize("solver", [nm_bre_propagate, m_bre_propagate])
def test_bloch_vector_stays_in_unit_ball(solver):
    grid = TimeGrid.from_horizon(2.0, 0.01)
    k = compute_kernels(OhmicExponential(0.5, 1.0), 0.5, grid)
    s = solver(0.2, k, grid)
    assert np.all(np.linalg.norm(s.bloch, axis=1) <= 1 + 1e-9)
    assert s.meta["max_bloch_norm"] <= 1 + 1e-9


def test_markov_coefficients_start_at_zero():
    grid = TimeGrid.from_horizon(1.0, 0.01)
    k = compute_kernels(OhmicExponential(0.1, 1.0), 1.0, grid)
    g_x, g_xx, g_yz = m_bre_coefficients(0.2, k, 201)
    assert g_x[0] == g_xx[0] == g_yz[0] == 0.0
    # short-time growth of G_xx is ~ M1(0) t
    assert g_xx[2] == pytest.approx(k.m1[0] * 2 * k.dt, rel=1e-3)


@pytest.mark.parametrize("solver", [nm_bre_propagate, m_bre_propagate])
def test_reported_derivative_matches_finite_difference(solver):
    grid = TimeGrid.from_horizon(1.0, 0.005)
    k = compute_kernels(OhmicExponential(0.3, 1.0), 1.0, grid)
    s = solver(0.2, k, grid)
    fd = (s.bloch[2:] - s.bloch[:-2]) / (2 * grid.dt)
    np.testing.assert_allclose(fd, s.dbloch[1:-1], atol=1e-5)


def test_nm_and_m_agree_to_second_order_in_coupling():
    grid = TimeGrid.from_horizon(1.0, 0.005)
    diffs = []
    for xi in (0.01, 0.02):
        k = compute_kernels(OhmicExponential(xi, 1.0), 1.0, grid)
        nm = nm_bre_propagate(0.2, k, grid)
        m = m_bre_propagate(0.2, k, grid)
        free = np.cos(0.4 * grid.times)
        # both leave the free rotation at first order in xi
        assert np.abs(nm.bloch[:, 2] - free).max() < 20 * xi
        diffs.append(np.abs(nm.bloch - m.bloch).max())
    assert diffs[1] / diffs[0] == pytest.approx(4.0, rel=0.05)


def test_nm_and_m_agree_at_short_times():
    # the two propagators share the same second-order expansion, so their
    # difference grows at least as t^3 (here it is ~t^5)
    grid = TimeGrid.from_horizon(0.16, 0.002)
    k = compute_kernels(OhmicExponential(0.1, 1.0), 1.0, grid)
    d = np.abs(nm_bre_propagate(0.2, k, grid).bloch - m_bre_propagate(0.2, k, grid).bloch).max(axis=1)
    for t in (0.02, 0.04, 0.08):
        ratio = d[grid.index_of(2 * t)] / d[grid.index_of(t)]
        assert np.log2(ratio) >= 3.0


def test_m2_example_value():
    assert ohmic_m2_exact(0.1, 1.0, 1.0) == pytest.approx(0.1, abs=1e-15)


@pytest.mark.parametrize("solver", [nm_bre_propagate, m_bre_propagate])
def test_shared_third_equation(solver):
    grid = TimeGrid.from_horizon(1.0, 0.005)
    k = compute_kernels(OhmicExponential(0.7, 1.0), 0.5, grid)
    s = solver(0.2, k, grid)
    np.testing.assert_array_equal(s.dbloch[:, 2], -0.4 * s.bloch[:, 1])
    assert s.dbloch[0, 2] == 0.0
