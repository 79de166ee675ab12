"""Command line entry point: ``psasec <subcommand> [options]``.

The four design subcommands run a built-in scenario family, optionally
overridden by ``--config``. ``sweep`` runs a config file as written. Results
are computed in full before anything is written, so a failed run never
leaves a partial output file.

Exit codes: 0 success, 1 configuration or usage error, 2 solver failure.
"""

import argparse
import dataclasses
import os
import sys
import tempfile
from pathlib import Path
from typing import List, Optional

from .config import Angles, ScenarioConfig, load_config
from .errors import ConfigError, PsaSecError
from .harness import rows_to_csv, rows_to_gnuplot, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2

PRESETS = {
    "simo-power": ScenarioConfig(network="simo", mode="power_min", jammer=Angles(35.0, 90.0, -30.0, 0.0),
                                 sweep_axis="r_sec_0", sweep_values=(0.5, 1.0, 1.5, 2.0, 2.5, 3.0)),
    "simo-rate": ScenarioConfig(network="simo", mode="rate_max", p_max_db=12.0,
                                jammer=Angles(40.0, 90.0, -30.0, 0.0), sweep_axis="theta_j",
                                sweep_values=tuple(float(t) for t in range(0, 91, 10))),
    "relay-rate": ScenarioConfig(network="relay", mode="rate_max", jammer=Angles(65.0, 90.0, 0.0, 0.0),
                                 sweep_axis="p_s_db", sweep_values=(0.0, 5.0, 10.0, 15.0, 20.0)),
    "relay-robust": ScenarioConfig(network="relay", mode="robust", n_antennas=4, trials=20,
                                   jammer=Angles(65.0, 90.0, 0.0, 0.0), sweep_axis="p_s_db",
                                   sweep_values=(0.0, 5.0, 10.0, 15.0, 20.0)),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="64-bit base seed (overrides the config)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per sweep value")
    p.add_argument("--out", type=Path, help="CSV output path (default: stdout)")
    p.add_argument("--gnuplot", type=Path, help="also write a gnuplot data file")
    p.add_argument("--array", choices=("psa", "csa", "both"), help="which array designs to run")
    p.add_argument("--trace", action="store_true", help="solver iteration log (TSV) on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="psasec", description="Secure beamforming with polarization sensitive arrays.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (("simo-power", "SIMO minimum total power vs secrecy target"),
                            ("simo-rate", "SIMO maximum secrecy rate vs jammer DOA"),
                            ("relay-rate", "relay secrecy rate vs source power"),
                            ("relay-robust", "relay rate under pointing errors vs source power")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="TOML file replacing the built-in scenario")
        _common(p)
    p = sub.add_parser("sweep", help="run a TOML scenario file")
    p.add_argument("config", type=Path)
    _common(p)
    return parser


def resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    if args.command == "sweep" or args.config is not None:
        config = load_config(args.config)
    else:
        config = PRESETS[args.command]
    overrides = {k: getattr(args, k) for k in ("seed", "trials", "array") if getattr(args, k) is not None}
    try:
        return dataclasses.replace(config, **overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _write_atomic(path: Path, text: str) -> None:
    path = path.resolve()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        for target in (args.out, args.gnuplot):
            if target is not None and not target.resolve().parent.is_dir():
                raise ConfigError(f"output directory does not exist: {target.parent}")
    except ConfigError as exc:
        print(f"psasec: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    def trace(line: str) -> None:
        print(line, file=sys.stderr)

    try:
        rows = run_sweep(config, trace if args.trace else None)
    except PsaSecError as exc:
        print(f"psasec: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    text = rows_to_csv(rows)
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write_atomic(args.out, text)
    if args.gnuplot is not None:
        _write_atomic(args.gnuplot, rows_to_gnuplot(rows))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
