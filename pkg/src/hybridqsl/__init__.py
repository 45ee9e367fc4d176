"""Quantum speed limits of open quantum systems from hybrid trajectory ensembles.

Submodules
----------
numerics
    Time grids, Hermitian eigenvalues and Schatten norms, RK4, Simpson.
bath
    Spectral densities, mode discretisations and thermal Wigner sampling.
dynamics
    Matrix-valued trajectory equations for the spin-boson and FMO models
    and their ensemble averages.
bre
    Non-Markovian and Markovian Bloch-Redfield comparators.
qsl
    QSL times from a reduced-dynamics series.
config, runner, cli
    Run configuration, sweep driver and command-line interface.
"""

from .errors import ConfigError, HybridQslError, NumericalError
from .qsl import QslReport, fidelity_pure, hs_norm_rate, iso_qsl, qsl_report, qsl_tau2, qsl_taup

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "HybridQslError",
    "NumericalError",
    "QslReport",
    "fidelity_pure",
    "hs_norm_rate",
    "iso_qsl",
    "qsl_report",
    "qsl_tau2",
    "qsl_taup",
]
