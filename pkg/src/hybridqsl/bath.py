"""Harmonic baths: spectral densities, finite-mode discretisations, Wigner sampling.

Conventions: mass-weighted oscillators ``H_B = sum_j (P_j**2 + w_j**2 R_j**2) / 2``
with bilinear coupling ``-C_j R_j x``; a discretisation reproduces
``J(w) = (pi/2) sum_j C_j**2 / w_j * delta(w - w_j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter

# 2*pi*c in rad fs^-1 per cm^-1, and Boltzmann's constant in cm^-1 / K
CM_TO_RAD_PER_FS = 2.0 * math.pi * 2.99792458e10 * 1e-15
KB_CM_PER_K = 0.6950348


def beta_from_kelvin(temperature: float) -> float:
    """Inverse temperature in fs (per rad/fs) for a temperature in kelvin."""
    _positive("temperature", temperature)
    return 1.0 / (KB_CM_PER_K * temperature * CM_TO_RAD_PER_FS)


def _positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise InvalidParameter(f"{name} must be positive, got {value}")


def _nonneg(name, value):
    if not (np.isfinite(value) and value >= 0):
        raise InvalidParameter(f"{name} must be non-negative, got {value}")


@dataclass(frozen=True)
class OhmicExponential:
    """``J(w) = (pi/2) * xi * w * exp(-w / omega_c)``."""

    xi: float
    omega_c: float

    def __post_init__(self):
        _nonneg("xi", self.xi)
        _positive("omega_c", self.omega_c)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return 0.5 * math.pi * self.xi * omega * np.exp(-omega / self.omega_c)

    def coth_weighted(self, omega, beta):
        """``J(w) coth(beta w / 2)``, with its finite limit ``xi pi / beta`` at w = 0."""
        omega = np.asarray(omega, dtype=float)
        out = np.empty_like(omega)
        zero = omega == 0.0
        w = omega[~zero]
        out[~zero] = self(w) / np.tanh(0.5 * beta * w)
        out[zero] = self.xi * math.pi / beta
        return out


@dataclass(frozen=True)
class DebyeDrude:
    """``J(w) = 2 lambda_D w tau_c / (1 + (w tau_c)**2)``."""

    lambda_d: float
    tau_c: float

    def __post_init__(self):
        _nonneg("lambda_d", self.lambda_d)
        _positive("tau_c", self.tau_c)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        x = omega * self.tau_c
        return 2.0 * self.lambda_d * x / (1.0 + x * x)


@dataclass(frozen=True)
class DiscretizedBath:
    omegas: np.ndarray
    couplings: np.ndarray
    omega_max: float
    beta: float

    def __post_init__(self):
        if self.omegas.shape != self.couplings.shape:
            raise InvalidParameter("omegas and couplings differ in length")
        if np.any(np.diff(self.omegas) <= 0):
            raise InvalidParameter("bath frequencies must be strictly increasing")

    @property
    def n_osc(self) -> int:
        return int(self.omegas.shape[0])

    @property
    def reorganization(self) -> float:
        """``sum_j C_j**2 / (2 w_j**2)``."""
        return float(np.sum(self.couplings**2 / (2.0 * self.omegas**2)))

    def with_beta(self, beta: float) -> "DiscretizedBath":
        _positive("beta", beta)
        return DiscretizedBath(self.omegas, self.couplings, self.omega_max, beta)


def discretize_ohmic(xi, omega_c, omega_max, n, beta=1.0) -> DiscretizedBath:
    """Logarithmic mode placement for the Ohmic bath with exponential cutoff.

    Every mode carries equal spectral weight; the last mode sits exactly at
    ``omega_max``.
    """
    _nonneg("xi", xi)
    _positive("omega_c", omega_c)
    _positive("omega_max", omega_max)
    _positive("beta", beta)
    if int(n) != n or n < 1:
        raise InvalidParameter(f"oscillator count must be >= 1, got {n}")
    n = int(n)
    omega0 = omega_c / n * -math.expm1(-omega_max / omega_c)
    j = np.arange(1, n + 1)
    omegas = -omega_c * np.log1p(-j * omega0 / omega_c)
    # log1p(-1 + e^{-x}) loses a few ulp at j = n; pin the cutoff mode exactly
    omegas[-1] = omega_max
    couplings = math.sqrt(xi * omega0) * omegas
    return DiscretizedBath(omegas, couplings, float(omega_max), float(beta))


def ohmic_omega0(omega_c, omega_max, n) -> float:
    return omega_c / n * -math.expm1(-omega_max / omega_c)


def discretize_debye(lambda_d, tau_c, omega_max, m, beta=1.0) -> DiscretizedBath:
    """Equal-reorganisation mode placement for the Debye-Drude bath."""
    _nonneg("lambda_d", lambda_d)
    _positive("tau_c", tau_c)
    _positive("omega_max", omega_max)
    _positive("beta", beta)
    if int(m) != m or m < 1:
        raise InvalidParameter(f"oscillator count must be >= 1, got {m}")
    m = int(m)
    a = math.atan(omega_max * tau_c)
    j = np.arange(1, m + 1)
    omegas = np.tan(j * a / m) / tau_c
    omegas[-1] = omega_max
    couplings = 2.0 * math.sqrt(lambda_d * a / (math.pi * m)) * omegas
    return DiscretizedBath(omegas, couplings, float(omega_max), float(beta))


def wigner_variances(omegas, beta):
    """Position and momentum variances of the thermal Wigner Gaussian."""
    omegas = np.asarray(omegas, dtype=float)
    th = np.tanh(0.5 * beta * omegas)
    return 1.0 / (2.0 * omegas * th), omegas / (2.0 * th)


@dataclass(frozen=True)
class WignerSample:
    R: np.ndarray
    P: np.ndarray


def sample_wigner(bath: DiscretizedBath, rng: np.random.Generator, size=None) -> WignerSample:
    """Draw bath phase-space points from the thermal Wigner distribution.

    ``size`` prepends extra axes (e.g. several baths of identical modes).
    Positions are drawn before momenta so streams stay aligned across calls.
    """
    _positive("beta", bath.beta)
    var_r, var_p = wigner_variances(bath.omegas, bath.beta)
    shape = (bath.n_osc,) if size is None else tuple(np.atleast_1d(size)) + (bath.n_osc,)
    r = rng.standard_normal(shape) * np.sqrt(var_r)
    p = rng.standard_normal(shape) * np.sqrt(var_p)
    return WignerSample(r, p)
