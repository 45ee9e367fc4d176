"""Run configuration: YAML text in, validated frozen dataclasses out.

Every omitted field is filled with its documented default when the text is
parsed, and ``serialize`` writes the fully resolved form, so a parse /
serialize / parse round trip is the identity.

SBM quantities are dimensionless (``omega_c`` sets the scale). FMO takes
``lambda_d`` in cm^-1, ``tau_c``, ``dt`` and ``tau`` in fs, ``temperature``
in kelvin and ``omega_max`` in rad/fs.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import yaml

from .errors import ParseError, ValidationError

MODELS = ("sbm", "fmo")
METHODS = ("decide", "nm_bre", "m_bre", "isolated")
AXES = ("coupling", "tau", "temperature")
SBM_ONLY_METHODS = ("nm_bre", "m_bre", "isolated")

DEFAULT_SWEEP_VALUES = {
    ("sbm", "coupling"): (0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0),
    ("sbm", "tau"): tuple(round(0.1 * k, 10) for k in range(1, 11)),
    ("sbm", "temperature"): (1.0, 2.0),
    ("fmo", "coupling"): (17.5, 35.0, 70.0),
    ("fmo", "tau"): tuple(100.0 * k for k in range(1, 11)),
    ("fmo", "temperature"): (77.0, 300.0),
}


@dataclass(frozen=True)
class SbmParams:
    delta: float = 0.2
    xi: float = 0.1
    omega_c: float = 1.0
    omega_max: float | None = None  # 5 omega_c
    n_osc: int = 200
    temperature: float = 1.0


@dataclass(frozen=True)
class FmoParams:
    lambda_d: float = 35.0
    tau_c: float = 50.0
    n_osc: int = 40
    temperature: float = 77.0
    omega_max: float | None = None  # 10 / tau_c
    table: str | None = None
    initial_site: int = 1
    energy_offset: str | float | None = "min"


@dataclass(frozen=True)
class GridConfig:
    dt: float | None = None
    tau: float | None = None
    t_end: float | None = None


@dataclass(frozen=True)
class EnsembleConfig:
    n_traj: int = 10_000
    seed: int = 0
    deterministic: bool = True
    workers: int = 1
    backend: str | None = None


@dataclass(frozen=True)
class SweepConfig:
    axis: str | None = None
    values: tuple | None = None


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "results"
    emit_series: bool = False


@dataclass(frozen=True)
class RunConfig:
    model: str = "sbm"
    method: str = "decide"
    parameters: SbmParams | FmoParams = field(default_factory=SbmParams)
    grid: GridConfig = field(default_factory=GridConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def taus(self) -> tuple:
        """Evolution times evaluated per point (the sweep values on the tau axis)."""
        if self.sweep.axis == "tau":
            return tuple(self.sweep.values)
        return (self.grid.tau,)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["sweep"]["values"] is not None:
            d["sweep"]["values"] = list(d["sweep"]["values"])
        return d


_SECTIONS = {
    "grid": GridConfig,
    "ensemble": EnsembleConfig,
    "sweep": SweepConfig,
    "output": OutputConfig,
}


def _convert(section: str, name: str, value, kind):
    where = f"{section}.{name}"
    if value is None:
        return None
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind is str:
            return str(value)
        if kind is tuple:
            if not isinstance(value, (list, tuple)):
                raise TypeError
            return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ParseError(f"cannot read {value!r} as {kind.__name__}", field=where) from None
    return value


_KINDS = {
    "delta": float, "xi": float, "omega_c": float, "omega_max": float, "n_osc": int,
    "temperature": float, "lambda_d": float, "tau_c": float, "table": str,
    "initial_site": int, "dt": float, "tau": float, "t_end": float, "n_traj": int,
    "seed": int, "deterministic": bool, "workers": int, "backend": str, "axis": str,
    "values": tuple, "dir": str, "emit_series": bool,
}


def _build(cls, section: str, raw):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ParseError("expected a mapping", field=section)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in names:
            raise ParseError("unknown field", field=f"{section}.{key}")
        if key == "energy_offset":
            kwargs[key] = value if value is None or isinstance(value, str) else _convert(section, key, value, float)
        else:
            kwargs[key] = _convert(section, key, value, _KINDS[key])
    return cls(**kwargs)


def _positive(name, value):
    if value is None or not (math.isfinite(value) and value > 0):
        raise ValidationError(name, f"must be a positive number, got {value}")


def _on_grid(name, t, dt):
    k = t / dt
    if abs(k - round(k)) > 1e-6 * max(1.0, k):
        raise ValidationError(name, f"{t} is not a multiple of grid.dt={dt}")


def _resolve(cfg: RunConfig) -> RunConfig:
    """Check every constraint and fill model-dependent defaults."""
    if cfg.model not in MODELS:
        raise ValidationError("model", f"must be one of {MODELS}")
    if cfg.method not in METHODS:
        raise ValidationError("method", f"must be one of {METHODS}")
    if cfg.model == "fmo" and cfg.method in SBM_ONLY_METHODS:
        raise ValidationError("method", f"{cfg.method} is only available for model sbm")
    p = cfg.parameters
    if cfg.model == "sbm":
        for name in ("delta", "omega_c", "temperature"):
            _positive(f"parameters.{name}", getattr(p, name))
        if not (math.isfinite(p.xi) and p.xi >= 0):
            raise ValidationError("parameters.xi", f"must be non-negative, got {p.xi}")
        omega_max = 5.0 * p.omega_c if p.omega_max is None else p.omega_max
        p = dataclasses.replace(p, omega_max=float(omega_max))
        dt_default, tau_default = 0.005, 1.0
    else:
        for name in ("tau_c", "temperature"):
            _positive(f"parameters.{name}", getattr(p, name))
        if not (math.isfinite(p.lambda_d) and p.lambda_d >= 0):
            raise ValidationError("parameters.lambda_d", f"must be non-negative, got {p.lambda_d}")
        if not 1 <= p.initial_site <= 7:
            raise ValidationError("parameters.initial_site", "must be a BChl index 1..7")
        off = p.energy_offset
        if isinstance(off, str) and off not in ("min", "mean"):
            raise ValidationError("parameters.energy_offset", "must be 'min', 'mean', a number or null")
        omega_max = 10.0 / p.tau_c if p.omega_max is None else p.omega_max
        p = dataclasses.replace(p, omega_max=float(omega_max))
        dt_default, tau_default = 1.0, 1000.0
    _positive("parameters.omega_max", p.omega_max)
    if p.n_osc < 1:
        raise ValidationError("parameters.n_osc", "must be at least 1")

    sweep = cfg.sweep
    if sweep.axis is not None:
        if sweep.axis not in AXES:
            raise ValidationError("sweep.axis", f"must be one of {AXES}")
        values = sweep.values
        if values is None:
            values = DEFAULT_SWEEP_VALUES[(cfg.model, sweep.axis)]
        if len(values) == 0:
            raise ValidationError("sweep.values", "must not be empty")
        values = tuple(sorted(float(v) for v in values))
        if len(set(values)) != len(values):
            raise ValidationError("sweep.values", "must be distinct")
        for v in values:
            if sweep.axis == "coupling":
                if not (math.isfinite(v) and v >= 0):
                    raise ValidationError("sweep.values", f"couplings must be non-negative, got {v}")
            else:
                _positive("sweep.values", v)
        sweep = SweepConfig(sweep.axis, values)
    elif sweep.values is not None:
        raise ValidationError("sweep.values", "given without sweep.axis")

    g = cfg.grid
    dt = dt_default if g.dt is None else g.dt
    _positive("grid.dt", dt)
    tau = tau_default if g.tau is None else g.tau
    _positive("grid.tau", tau)
    _on_grid("grid.tau", tau, dt)
    horizon = max(sweep.values) if sweep.axis == "tau" else tau
    if sweep.axis == "tau":
        for v in sweep.values:
            _on_grid("sweep.values", v, dt)
    t_end = horizon if g.t_end is None else g.t_end
    _positive("grid.t_end", t_end)
    _on_grid("grid.t_end", t_end, dt)
    if t_end < horizon - 1e-9 * dt:
        raise ValidationError("grid.t_end", f"must cover the largest evolution time {horizon}")
    grid = GridConfig(float(dt), float(tau), float(t_end))

    e = cfg.ensemble
    if e.n_traj < 1:
        raise ValidationError("ensemble.n_traj", "must be at least 1")
    if e.workers < 1:
        raise ValidationError("ensemble.workers", "must be at least 1")
    if not 0 <= e.seed < 2**64:
        raise ValidationError("ensemble.seed", "must fit in an unsigned 64-bit integer")
    if e.backend not in (None, "numba", "numpy"):
        raise ValidationError("ensemble.backend", "must be numba, numpy or null")
    return cfg.replace(parameters=p, grid=grid, sweep=sweep)


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ParseError("top level must be a mapping")
    allowed = {"model", "method", "parameters", *_SECTIONS}
    for key in raw:
        if key not in allowed:
            raise ParseError("unknown field", field=str(key))
    model = raw.get("model", "sbm")
    method = raw.get("method", "decide")
    if not isinstance(model, str):
        raise ParseError("expected a string", field="model")
    if not isinstance(method, str):
        raise ParseError("expected a string", field="method")
    pcls = FmoParams if model == "fmo" else SbmParams
    kwargs = {
        "model": model,
        "method": method,
        "parameters": _build(pcls, "parameters", raw.get("parameters")),
    }
    for name, cls in _SECTIONS.items():
        kwargs[name] = _build(cls, name, raw.get(name))
    return _resolve(RunConfig(**kwargs))


def load_mapping(text: str) -> dict:
    """YAML text to a raw mapping (not yet validated)."""
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
        raise ParseError(f"malformed configuration: {exc.problem}", line=line) from None
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed configuration: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ParseError("top level must be a mapping", line=1)
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration.

    Raises
    ------
    ParseError
        Malformed YAML (with its line number), unknown fields or values of
        the wrong type (with the field name).
    ValidationError
        A value violates a constraint such as method-model compatibility.
    """
    return config_from_dict(load_mapping(text))


def serialize_config(cfg: RunConfig) -> str:
    """Resolved configuration as YAML text (accepted back by ``parse_config``)."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=False)
