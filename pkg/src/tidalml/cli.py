"""Simulate tidal breathing cohorts, train classifiers and screen measurements.

Exit codes: 0 success, 1 I/O failure, 2 invalid input or configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .features import extract_features
from .lung_model import (
    EquivalentParams,
    LungParams,
    bode,
    simulate_bi,
    split_equivalent,
    write_signal_csv,
)
from .pipeline import StageError, run_grid, run_pipeline, run_validity

EXIT_OK, EXIT_IO, EXIT_INVALID = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help="JSON or YAML run configuration")
    p.add_argument("--seed", type=int, help="override the config seed (u64)")
    p.add_argument("--preset", choices=["paper-stated", "reproduction", "spread-study"])
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-figures", action="store_true", help="skip matplotlib figures")


def _params(p):
    p.add_argument("--r-eq", type=float, default=3.0, help="equivalent resistance (cmH2O.s/L)")
    p.add_argument("--e-eq", type=float, default=10.0, help="equivalent elastance (cmH2O/L)")
    for name in ("r1", "r2", "rt", "e1", "e2"):
        p.add_argument(f"--{name}", type=float, help="explicit parallel-model parameter")


def build_parser():
    parser = _Parser(prog="tidalml", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate one subject and write its signal CSV")
    _common(p)
    _params(p)
    p.add_argument("--output", help="signal CSV path (default <out>/signal.csv)")

    p = sub.add_parser("pipeline", help="cohort, features, classifiers and metrics")
    _common(p)

    p = sub.add_parser("validity", help="physiological polygon and measurement verdicts")
    _common(p)
    p.add_argument("--measure", nargs=2, type=float, action="append", metavar=("MU", "SIGMA"),
                   default=[], help="a measurement to validate (repeatable)")
    p.add_argument("--features", help="feature CSV (id,...,mu,sigma) to validate")

    p = sub.add_parser("tf", help="Bode magnitude/phase of the transfer function")
    _common(p)
    _params(p)
    p.add_argument("--omega-min", type=float, default=1e-2)
    p.add_argument("--omega-max", type=float, default=1e2)
    p.add_argument("--points", type=int, default=200)

    p = sub.add_parser("grid", help="cross-validated gamma/C heat map for the RBF SVM")
    _common(p)
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    data = cfg.to_dict()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.preset is not None:
        data["preset"] = args.preset
    if args.out is not None:
        data["out"] = args.out
    if args.no_figures:
        data["figures"] = False
    return RunConfig.from_dict(data)


def _lung_params(args) -> LungParams:
    explicit = [getattr(args, n) for n in ("r1", "r2", "rt", "e1", "e2")]
    if any(v is not None for v in explicit):
        if any(v is None for v in explicit):
            raise ValueError("--r1 --r2 --rt --e1 --e2 must be given together")
        return LungParams(*explicit)
    return split_equivalent(EquivalentParams(args.r_eq, args.e_eq))


def cmd_simulate(args, cfg: RunConfig) -> int:
    params = _lung_params(args)
    sim = cfg.sim_config()
    sig = simulate_bi(params, sim.pressure, sim.grid)
    path = Path(args.output) if args.output else Path(cfg.out) / "signal.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_signal_csv(path, sig)
    fv = extract_features(sig)
    print(json.dumps({"mu": fv.mu, "sigma": fv.sigma, "rows": sim.grid.n_samples, "path": str(path)}))
    return EXIT_OK


def cmd_pipeline(args, cfg: RunConfig) -> int:
    result = run_pipeline(cfg)
    for name, m in result["metrics"]["classifiers"].items():
        print(f"{name:14s} accuracy={m['accuracy']:.4f} macro_auc={m['macro_auc']:.5f} "
              f"fit={result['timing'][name] * 1e3:.1f}ms")
    return EXIT_OK


def _read_measurements(path):
    with open(path, newline="") as fh:
        return [(row.get("id", str(i)), float(row["mu"]), float(row["sigma"]))
                for i, row in enumerate(csv.DictReader(fh))]


def cmd_validity(args, cfg: RunConfig) -> int:
    records = [(str(i), mu, sigma) for i, (mu, sigma) in enumerate(args.measure)]
    if not records:
        records = [(str(i), float(mu), float(s)) for i, (mu, s) in enumerate(cfg.validity.measurements)]
    if args.features:
        records += _read_measurements(args.features)
    _, lines = run_validity(cfg, measurements=records)
    for line in lines:
        print(line)
    return EXIT_OK


def cmd_tf(args, cfg: RunConfig) -> int:
    params = _lung_params(args)
    if not (0 < args.omega_min < args.omega_max) or args.points < 2:
        raise ValueError("need 0 < omega-min < omega-max and points >= 2")
    omegas = np.logspace(np.log10(args.omega_min), np.log10(args.omega_max), args.points)
    mag, phase = bode(params, omegas)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bode.csv", "w") as fh:
        fh.write("omega,magnitude,phase\n")
        for row in zip(omegas, mag, phase):
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
    if cfg.figures:
        from . import plotting

        (out / "figures").mkdir(exist_ok=True)
        plotting.bode_figure(omegas, {"H": (mag, phase)}, out / "figures" / "bode.png")
    print(out / "bode.csv")
    return EXIT_OK


def cmd_grid(args, cfg: RunConfig) -> int:
    result = run_grid(cfg)
    print(f"best gamma={result.best_gamma:g} C={result.best_C:g} "
          f"accuracy={result.accuracy[result.best_index]:.4f}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "pipeline": cmd_pipeline,
    "validity": cmd_validity,
    "tf": cmd_tf,
    "grid": cmd_grid,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except OSError as exc:
        print(f"tidalml: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StageError as exc:
        print(f"tidalml: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc.cause, OSError) else EXIT_INVALID
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"tidalml: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
