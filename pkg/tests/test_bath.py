import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybridqsl.bath import (
    CM_TO_RAD_PER_FS,
    DebyeDrude,
    OhmicExponential,
    beta_from_kelvin,
    discretize_debye,
    discretize_ohmic,
    ohmic_omega0,
    sample_wigner,
    wigner_variances,
)
from hybridqsl.errors import InvalidParameter

# reference values evaluated with mpmath at 30 digits
OMEGA0_REF = 0.00496631026500457
CM_REF = 1.88365156730885e-4
REORG_35_REF = 0.00617446174115876  # 2 lambda atan(10) / pi for 35 cm^-1, rad/fs
BETA_77K_REF = 99.1978258129888  # fs


def test_ohmic_omega0_reference():
    assert ohmic_omega0(1.0, 5.0, 200) == pytest.approx(OMEGA0_REF, rel=1e-13)


def test_ohmic_last_mode_is_cutoff():
    bath = discretize_ohmic(0.3, 1.0, 5.0, 200)
    assert bath.omegas[-1] == 5.0
    assert np.all(np.diff(bath.omegas) > 0)


def test_ohmic_couplings():
    bath = discretize_ohmic(0.3, 1.0, 5.0, 200)
    np.testing.assert_allclose(bath.couplings, math.sqrt(0.3 * OMEGA0_REF) * bath.omegas, rtol=1e-12)


def test_ohmic_reproduces_spectral_weight():
    # equal-weight modes: sum over modes of J/w density reproduces int J/w
    xi, wc, wmax = 0.5, 1.0, 5.0
    bath = discretize_ohmic(xi, wc, wmax, 4000)
    lhs = np.sum(bath.couplings**2 / bath.omegas**2) * math.pi / 2
    rhs = 0.5 * math.pi * xi * wc * -math.expm1(-wmax / wc)
    assert lhs == pytest.approx(rhs, rel=1e-12)


@given(st.floats(0.05, 20.0), st.integers(1, 400))
def test_debye_last_mode_is_cutoff(wmax_tau, m):
    tau_c = 50.0
    bath = discretize_debye(0.01, tau_c, wmax_tau / tau_c, m)
    assert bath.omegas[-1] == pytest.approx(wmax_tau / tau_c, rel=1e-12)


def test_debye_reorganization():
    bath = discretize_debye(35 * CM_TO_RAD_PER_FS, 50.0, 0.2, 40)
    assert bath.reorganization == pytest.approx(REORG_35_REF, rel=1e-12)


def test_debye_reorganization_limit():
    lam = 0.01
    bath = discretize_debye(lam, 50.0, 1e6 / 50.0, 40)
    assert bath.reorganization == pytest.approx(lam, rel=1e-5)


def test_unit_conversions():
    assert CM_TO_RAD_PER_FS == pytest.approx(CM_REF, rel=1e-13)
    assert beta_from_kelvin(77.0) == pytest.approx(BETA_77K_REF, rel=1e-12)


def test_spectral_densities():
    j = OhmicExponential(0.2, 1.0)
    assert j(1.0) == pytest.approx(0.5 * math.pi * 0.2 * math.exp(-1.0))
    assert j.coth_weighted(np.array([0.0]), 2.0)[0] == pytest.approx(0.2 * math.pi / 2.0)
    d = DebyeDrude(35.0, 50.0)
    assert d(1 / 50.0) == pytest.approx(35.0)


def test_invalid_parameters():
    with pytest.raises(InvalidParameter):
        discretize_ohmic(-0.1, 1.0, 5.0, 10)
    with pytest.raises(InvalidParameter):
        discretize_ohmic(0.1, 1.0, 5.0, 0)
    with pytest.raises(InvalidParameter):
        discretize_debye(0.1, 0.0, 5.0, 10)
    with pytest.raises(InvalidParameter):
        discretize_ohmic(0.1, 1.0, 5.0, 10).with_beta(0.0)


def test_wigner_variances_limits():
    w = np.array([0.5, 2.0])
    # high temperature: classical equipartition
    vr, vp = wigner_variances(w, 1e-6)
    np.testing.assert_allclose(vr * w**2 * 1e-6, 1.0, rtol=1e-6)
    np.testing.assert_allclose(vp * 1e-6, 1.0, rtol=1e-6)
    # zero temperature: ground-state widths
    vr, vp = wigner_variances(w, 1e6)
    np.testing.assert_allclose(vr, 1 / (2 * w))
    np.testing.assert_allclose(vp, w / 2)


def test_wigner_sample_moments():
    bath = discretize_ohmic(0.1, 1.0, 5.0, 20, beta=0.7)
    rng = np.random.default_rng(3)
    n = 200_000
    s = sample_wigner(bath, rng, size=n)
    vr, vp = wigner_variances(bath.omegas, 0.7)
    # mean within 5 standard errors, variance within 5 standard errors of a chi^2
    assert np.all(np.abs(s.R.mean(0)) < 5 * np.sqrt(vr / n))
    assert np.all(np.abs(s.P.mean(0)) < 5 * np.sqrt(vp / n))
    assert np.all(np.abs(s.R.var(0) / vr - 1) < 5 * math.sqrt(2 / n))
    assert np.all(np.abs(s.P.var(0) / vp - 1) < 5 * math.sqrt(2 / n))
    # positions and momenta uncorrelated
    corr = np.mean(s.R * s.P, axis=0) / np.sqrt(vr * vp)
    assert np.all(np.abs(corr) < 5 / math.sqrt(n))


def test_wigner_sample_shape_and_reproducibility():
    bath = discretize_debye(0.01, 50.0, 0.2, 40)
    a = sample_wigner(bath, np.random.default_rng(1), size=7)
    b = sample_wigner(bath, np.random.default_rng(1), size=7)
    assert a.R.shape == (7, 40)
    np.testing.assert_array_equal(a.R, b.R)
    np.testing.assert_array_equal(a.P, b.P)
