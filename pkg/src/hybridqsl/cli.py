"""Command-line entry point: ``hybridqsl {simulate,sweep,table}``.

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures (the failing sweep coordinate is printed on stderr).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import AXES, RunConfig, config_from_dict, load_mapping
from .errors import ConfigError, HybridQslError, NumericalError
from .fmo_table import fmo_table
from .runner import PointError, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="YAML run configuration (defaults if omitted)")
    p.add_argument("--seed", type=int, help="master seed (overrides ensemble.seed)")
    p.add_argument("--workers", type=int, help="worker processes (overrides ensemble.workers)")
    p.add_argument("--deterministic", action="store_true",
                   help="merge trajectory statistics in index order (bitwise reproducible)")
    p.add_argument("--emit-series", action="store_true", help="write per-point time series")
    p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridqsl", description="Quantum speed limits from hybrid trajectory ensembles.")
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="evaluate a single point")
    _common(sim)
    sw = sub.add_parser("sweep", help="sweep one axis")
    sw.add_argument("axis", choices=AXES)
    sw.add_argument("--values", help="comma-separated sweep values (overrides sweep.values)")
    _common(sw)
    tab = sub.add_parser("table", help="print the FMO site table (cm^-1)")
    tab.add_argument("--file", type=Path, help="override table file")
    return parser


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name)
    if sec is None:
        sec = raw[name] = {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a mapping")
    return sec


def _load(args) -> RunConfig:
    """Configuration file plus command-line overrides, validated together."""
    raw = load_mapping(args.config.read_text()) if args.config else {}
    sweep = _section(raw, "sweep")
    if args.command == "sweep":
        if sweep.get("axis") != args.axis:
            sweep["values"] = None
        sweep["axis"] = args.axis
        if args.values is not None:
            try:
                sweep["values"] = [float(v) for v in args.values.split(",") if v.strip()]
            except ValueError:
                raise ConfigError(f"--values: cannot parse {args.values!r}") from None
    else:
        raw["sweep"] = {}
    ens = _section(raw, "ensemble")
    if args.seed is not None:
        ens["seed"] = args.seed
    if args.workers is not None:
        ens["workers"] = args.workers
    if args.deterministic:
        ens["deterministic"] = True
    return config_from_dict(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "table":
            table = fmo_table(args.file)
            for row in table:
                print("\t".join(f"{x:g}" for x in row))
            return EXIT_OK
        cfg = _load(args)
        rows = run(cfg, out_dir=args.out, emit_series=args.emit_series or None)
        out = args.out or Path(cfg.output.dir)
        print(f"wrote {len(rows)} rows to {out / 'summary.tsv'}")
        return EXIT_OK
    except PointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if exc.is_config_error else EXIT_NUMERICAL
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, HybridQslError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
