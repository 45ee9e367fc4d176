"""Sweep orchestration and plain-text result files.

``run`` evaluates one configuration (optionally swept along one axis) and
writes ``summary.tsv`` plus, on request, one time-series file per sweep
point under ``series/``. Every file opens with a ``#`` comment block holding
the resolved configuration, so the data carries its own provenance.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bath import (
    CM_TO_RAD_PER_FS,
    OhmicExponential,
    beta_from_kelvin,
    discretize_debye,
    discretize_ohmic,
)
from .bre import compute_kernels, m_bre_propagate, nm_bre_propagate
from .config import RunConfig, serialize_config
from .dynamics import FmoModel, ReducedSeries, SpinBosonModel, build_fmo_hamiltonian, run_ensemble
from .dynamics.ensemble import series_from_bloch
from .errors import ConfigError, HybridQslError, NumericalError
from .fmo_table import fmo_table
from .numerics import TimeGrid
from .qsl import hs_norm_rate, iso_qsl, qsl_report

log = logging.getLogger(__name__)


@dataclass
class ResultRow:
    """One line of ``summary.tsv``.

    ``coupling`` is xi (SBM) or lambda_D in cm^-1 (FMO); ``temperature`` is
    in units of omega_c (SBM) or kelvin (FMO); times are in 1/omega_c (SBM)
    or fs (FMO). ``tau_iso`` is the closed-form isolated-spin value (NaN for
    FMO). ``wall_time`` is left blank in deterministic runs so that their
    output files are reproducible byte for byte.
    """

    axis: str
    value: float
    model: str
    method: str
    coupling: float
    temperature: float
    delta: float
    tau: float
    fidelity: float
    fidelity_se: float
    tau1: float
    tau2: float
    tau_inf: float
    tau_qsl: float
    tau2_se: float
    tau_iso: float
    bound_ok: bool
    noise_flag: bool
    n_traj: int
    n_failed: int
    wall_time: float | None


COLUMNS = tuple(f.name for f in dataclasses.fields(ResultRow))


class PointError(HybridQslError):
    """Failure at one sweep point; wraps the original error."""

    def __init__(self, axis, value, cause: HybridQslError):
        self.axis = axis
        self.value = value
        self.cause = cause
        super().__init__(f"at {axis}={value}: {type(cause).__name__}: {cause}")

    @property
    def is_config_error(self) -> bool:
        return isinstance(self.cause, ConfigError)


# ----------------------------------------------------------------------------
# point evaluation
# ----------------------------------------------------------------------------

def point_config(cfg: RunConfig, value: float | None) -> RunConfig:
    """Configuration of one sweep point (coupling and temperature axes)."""
    axis = cfg.sweep.axis
    if axis is None or axis == "tau" or value is None:
        return cfg
    field = {"coupling": "xi" if cfg.model == "sbm" else "lambda_d", "temperature": "temperature"}[axis]
    return cfg.replace(parameters=dataclasses.replace(cfg.parameters, **{field: float(value)}))


def _grid(cfg: RunConfig) -> TimeGrid:
    return TimeGrid.from_horizon(cfg.grid.t_end, cfg.grid.dt)


def build_model(cfg: RunConfig):
    """DECIDE model for a resolved configuration."""
    p = cfg.parameters
    backend = cfg.ensemble.backend
    if cfg.model == "sbm":
        bath = discretize_ohmic(p.xi, p.omega_c, p.omega_max, p.n_osc, beta=1.0 / p.temperature)
        return SpinBosonModel(p.delta, bath, backend=backend)
    bath = discretize_debye(
        p.lambda_d * CM_TO_RAD_PER_FS, p.tau_c, p.omega_max, p.n_osc, beta=beta_from_kelvin(p.temperature)
    )
    v = build_fmo_hamiltonian(fmo_table(p.table), bath, offset=p.energy_offset)
    return FmoModel(v, bath, initial_site=p.initial_site - 1, backend=backend)


def compute_series(cfg: RunConfig) -> ReducedSeries:
    """Reduced dynamics of one point with the configured method."""
    grid = _grid(cfg)
    p = cfg.parameters
    if cfg.method == "decide":
        e = cfg.ensemble
        return run_ensemble(
            build_model(cfg), grid, e.n_traj, master_seed=e.seed, workers=e.workers,
            deterministic=e.deterministic,
        )
    if cfg.method in ("nm_bre", "m_bre"):
        kernels = compute_kernels(OhmicExponential(p.xi, p.omega_c), 1.0 / p.temperature, grid)
        solver = nm_bre_propagate if cfg.method == "nm_bre" else m_bre_propagate
        return solver(p.delta, kernels, grid)
    raise ConfigError(f"method {cfg.method} has no time series")


def _isolated_rows(cfg: RunConfig, axis, value) -> list[ResultRow]:
    p = cfg.parameters
    rows = []
    for tau in cfg.taus:
        t2 = float(iso_qsl(p.delta, tau))
        # traceless 2x2 rate: singular values {a, a}
        rows.append(ResultRow(
            axis, value, cfg.model, cfg.method, p.xi, p.temperature, p.delta, tau,
            0.5 * (1.0 + math.cos(2.0 * p.delta * tau)), 0.0,
            t2 / math.sqrt(2.0), t2, t2 * math.sqrt(2.0), t2 * math.sqrt(2.0), 0.0, t2,
            True, False, 0, 0, None,
        ))
    return rows


def rows_from_series(cfg: RunConfig, series: ReducedSeries, axis, value, wall=None) -> list[ResultRow]:
    p = cfg.parameters
    rows = []
    for tau in cfg.taus:
        r = qsl_report(series, tau)
        if cfg.model == "sbm":
            coupling, delta, t_iso = p.xi, p.delta, float(iso_qsl(p.delta, tau))
        else:
            coupling, delta, t_iso = p.lambda_d, math.nan, math.nan
        rows.append(ResultRow(
            axis, value, cfg.model, cfg.method, coupling, p.temperature, delta, tau,
            r.fidelity, r.fidelity_se, r.tau1, r.tau2, r.tau_inf, r.tau_qsl, r.tau2_se, t_iso,
            r.bound_ok, r.noise_flag, series.n_traj, series.n_failed, wall,
        ))
        if r.frozen:
            log.warning("state frozen on [0, %g] at %s=%s: QSL times undefined", tau, axis, value)
        elif not r.bound_ok:
            level = logging.INFO if r.noise_flag else logging.WARNING
            log.log(level, "tau_QSL = %.6g exceeds tau = %g at %s=%s%s", r.tau_qsl, tau, axis, value,
                    " (within statistical noise)" if r.noise_flag else "")
    return rows


def evaluate_point(cfg: RunConfig, axis=None, value=None):
    """Series (None for the closed form) and summary rows of one point."""
    if cfg.method == "isolated":
        return None, _isolated_rows(cfg, axis, value)
    start = time.perf_counter()
    series = compute_series(cfg)
    wall = None if cfg.ensemble.deterministic else time.perf_counter() - start
    return series, rows_from_series(cfg, series, axis, value, wall)


# ----------------------------------------------------------------------------
# text files
# ----------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _header(cfg: RunConfig, extra: dict | None = None) -> str:
    lines = ["# resolved configuration"]
    lines += ["#   " + ln for ln in serialize_config(cfg).rstrip("\n").splitlines()]
    for key, val in (extra or {}).items():
        lines.append(f"# {key}: {val}")
    return "\n".join(lines) + "\n"


def write_summary(path: Path, cfg: RunConfig, rows: list[ResultRow]) -> None:
    with open(path, "w") as fh:
        fh.write(_header(cfg))
        fh.write("\t".join(COLUMNS) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(getattr(row, c)) for c in COLUMNS) + "\n")


def read_summary(path) -> list[dict]:
    """Rows of a summary file as dicts of strings keyed by column name."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    head = lines[0].split("\t")
    return [dict(zip(head, ln.split("\t"))) for ln in lines[1:] if ln]


def _series_columns(L: int, bloch: bool) -> list[str]:
    cols = ["t"]
    for kind in ("P", "dP", "se_P", "se_dP"):
        for n in range(L):
            for m in range(L):
                if kind.startswith("se"):
                    cols.append(f"{kind}_{n + 1}{m + 1}")
                else:
                    cols += [f"re_{kind}_{n + 1}{m + 1}", f"im_{kind}_{n + 1}{m + 1}"]
    if bloch:
        cols += ["Bx", "By", "Bz", "dBx", "dBy", "dBz", "se_Bx", "se_By", "se_Bz", "se_dBx", "se_dBy", "se_dBz"]
    cols.append("hs_rate")
    return cols


def write_series(path: Path, cfg: RunConfig, series: ReducedSeries, axis=None, value=None) -> None:
    """Means, EOM derivatives, standard errors and the norm rate on the grid."""
    L = series.L
    bloch = series.bloch is not None
    n_t = series.times.shape[0]
    parts = [series.times[:, None]]
    for arr in (series.proj, series.dproj):
        flat = arr.reshape(n_t, L * L)
        parts.append(np.stack([flat.real, flat.imag], axis=-1).reshape(n_t, 2 * L * L))
    parts += [series.proj_se.reshape(n_t, L * L), series.dproj_se.reshape(n_t, L * L)]
    if bloch:
        parts += [series.bloch, series.dbloch, series.bloch_se, series.dbloch_se]
    parts.append(np.asarray(hs_norm_rate(series))[:, None])
    table = np.concatenate(parts, axis=1)
    extra = {
        "sweep_point": f"{axis}={value}",
        "initial_index": series.initial_index,
        "n_traj": series.n_traj,
        "n_failed": series.n_failed,
        "t0": repr(series.grid.t0),
        "dt": repr(series.grid.dt),
        "n_steps": series.grid.n_steps,
    }
    with open(path, "w") as fh:
        fh.write(_header(cfg, extra))
        fh.write("\t".join(_series_columns(L, bloch)) + "\n")
        for row in table:
            fh.write("\t".join(repr(float(x)) for x in row) + "\n")


def load_series(path) -> ReducedSeries:
    """Rebuild a ReducedSeries from a file written by ``write_series``."""
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                head = line.rstrip("\n").split("\t")
                break
            body = line[1:].strip()
            if ":" in body and not line.startswith("#   ") and not body.startswith("resolved"):
                key, val = body.split(":", 1)
                meta[key.strip()] = val.strip()
        data = np.loadtxt(fh, delimiter="\t", ndmin=2)
    col = {name: i for i, name in enumerate(head)}
    grid = TimeGrid(float(meta["t0"]), float(meta["dt"]), int(meta["n_steps"]))
    n_t = data.shape[0]
    L = int(round(math.sqrt(sum(1 for c in head if c.startswith("se_P_")))))
    n_traj, n_failed = int(meta["n_traj"]), int(meta["n_failed"])
    if "Bx" in col:
        pick = lambda names: data[:, [col[c] for c in names]]
        return series_from_bloch(
            grid, pick(["Bx", "By", "Bz"]), pick(["dBx", "dBy", "dBz"]),
            pick(["se_Bx", "se_By", "se_Bz"]), pick(["se_dBx", "se_dBy", "se_dBz"]),
            n_traj=n_traj, n_failed=n_failed,
        )

    def cplx(kind):
        out = np.empty((n_t, L, L), dtype=np.complex128)
        for n in range(L):
            for m in range(L):
                out[:, n, m] = data[:, col[f"re_{kind}_{n + 1}{m + 1}"]] + 1j * data[:, col[f"im_{kind}_{n + 1}{m + 1}"]]
        return out

    def real(kind):
        out = np.empty((n_t, L, L))
        for n in range(L):
            for m in range(L):
                out[:, n, m] = data[:, col[f"{kind}_{n + 1}{m + 1}"]]
        return out

    return ReducedSeries(
        grid=grid, proj=cplx("P"), dproj=cplx("dP"), proj_se=real("se_P"), dproj_se=real("se_dP"),
        initial_index=int(meta["initial_index"]), n_traj=n_traj, n_failed=n_failed,
    )


# ----------------------------------------------------------------------------
# driver
# ----------------------------------------------------------------------------

def sweep_points(cfg: RunConfig) -> list:
    """Sweep coordinates executed in order (one ``None`` point without a sweep)."""
    if cfg.sweep.axis in ("coupling", "temperature"):
        return list(cfg.sweep.values)
    return [None]


def run(cfg: RunConfig, out_dir: str | Path | None = None, emit_series: bool | None = None) -> list[ResultRow]:
    """Evaluate every sweep point, write the summary (and series) files.

    Errors from a point are re-raised as PointError naming the sweep
    coordinate; rows of the points already finished are written first.
    """
    out = Path(cfg.output.dir if out_dir is None else out_dir)
    emit = cfg.output.emit_series if emit_series is None else emit_series
    out.mkdir(parents=True, exist_ok=True)
    axis = cfg.sweep.axis or "none"
    rows: list[ResultRow] = []
    for k, value in enumerate(sweep_points(cfg)):
        pcfg = point_config(cfg, value)
        label = value if value is not None else (cfg.sweep.values if axis == "tau" else "-")
        log.info("point %d: %s=%s", k, axis, label)
        try:
            series, point_rows = evaluate_point(pcfg, axis, value)
        except HybridQslError as exc:
            write_summary(out / "summary.tsv", cfg, rows)
            raise PointError(axis, label, exc) from exc
        except ValueError as exc:
            write_summary(out / "summary.tsv", cfg, rows)
            raise PointError(axis, label, NumericalError(str(exc))) from exc
        rows += point_rows
        if emit:
            if series is None:
                log.info("closed-form method: no time series to emit")
            else:
                (out / "series").mkdir(exist_ok=True)
                write_series(out / "series" / f"point_{k:03d}.tsv", pcfg, series, axis, label)
    write_summary(out / "summary.tsv", cfg, rows)
    return rows
