"""Command-line entry point: ``tlsnoise --mode ... [options]``.

Options override values from ``--config``; the resolved configuration is
echoed to ``<out>/manifest.txt``.  Failures print a one-line JSON error
record on stderr and exit nonzero (2 for bad configuration, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import MODES, PRESETS, ConfigError, RunConfig, load_config, parse_omega
from .model import ParameterError
from .runner import run
from .sde import StepSizeError

EXIT_FAILED = 1
EXIT_CONFIG = 2

# Flags that map one-to-one onto RunConfig fields.
_FLOAT_FLAGS = ("gamma", "Gamma", "L", "Delta", "dt", "t_end", "sample_dt", "tau_max")
_INT_FLAGS = ("n_traj", "seed", "workers")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 on usage errors; keep the record format
        _emit_error("usage", message)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tlsnoise", description="Driven two-level atom with collisional "
                "dephasing and laser phase diffusion: spectra, stochastic Bloch "
                "ensembles and quantum trajectories.")
    p.add_argument("--config", help="key = value file; command-line options take precedence")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--omega", metavar="LO,HI,POINTS",
                   help="frequency grid in units of Omega (default -10,10,2001)")
    p.add_argument("--gamma", type=float, help="spontaneous decay gamma/Omega")
    p.add_argument("--Gamma", type=float, help="collisional noise strength Gamma/Omega")
    p.add_argument("--L", type=float, help="laser phase diffusion L/Omega")
    p.add_argument("--Delta", type=float, help="detuning Delta/Omega")
    p.add_argument("--n-traj", dest="n_traj", type=int,
                   help="trajectories (or noise paths for sde-validate)")
    p.add_argument("--dt", type=float, help="time step in 1/Omega (default 0.01/max rate)")
    p.add_argument("--t-end", dest="t_end", type=float, help="simulated time in 1/Omega")
    p.add_argument("--sample-dt", dest="sample_dt", type=float,
                   help="sampling interval of phase records in 1/Omega")
    p.add_argument("--tau-max", dest="tau_max", type=float,
                   help="largest correlation lag in 1/Omega")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int, help="worker threads (outputs do not depend on it)")
    p.add_argument("--out", help="output directory")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base = load_config(args.config) if args.config else RunConfig()
    changes = {}
    for name in _FLOAT_FLAGS + _INT_FLAGS + ("mode", "preset", "out"):
        value = getattr(args, name)
        if value is not None:
            changes[name] = value
    if args.omega is not None:
        changes["omega_min"], changes["omega_max"], changes["omega_points"] = \
            parse_omega(args.omega)
    if args.preset is not None and args.mode is None:
        changes["mode"] = "figure-preset"
    return base.with_(**changes)


def _emit_error(kind: str, message: str) -> None:
    print(json.dumps({"status": "error", "kind": kind, "message": message}), file=sys.stderr)


def _join_omega(argv: list[str]) -> list[str]:
    """Let ``--omega -2,2,401`` through; argparse would read ``-2,...`` as an option."""
    out = []
    it = iter(argv)
    for a in it:
        if a == "--omega":
            nxt = next(it, None)
            out.append(a if nxt is None else f"--omega={nxt}")
        else:
            out.append(a)
    return out


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_omega(argv))
    try:
        cfg = config_from_args(args)
    except (ConfigError, ParameterError, OSError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_CONFIG
    try:
        result = run(cfg)
    except (ConfigError, ParameterError, StepSizeError) as exc:
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_CONFIG
    except Exception as exc:  # report any module-level failure as a record
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_FAILED
    summary = {"status": "ok" if result.passed else "failed", "out": str(result.out_dir),
               "outputs": result.files}
    if result.report is not None:
        summary["report"] = result.report
    print(json.dumps(summary, default=float))
    return 0 if result.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
