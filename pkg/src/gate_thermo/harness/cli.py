"""Command-line entry point: simulate, sweep, reproduce-fig2, selftest."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from ..qcore import HaarSampler, ValidationError
from .config import DEFAULTS, SweepConfig, config_from_flat, load_config, parse_angle
from .presets import GATES
from .selftest import run_selftest
from .sweep import CSV_COLUMNS, analyze_point, run_sweep

EXIT_VIOLATION = 3
FIG2_TAUS = [float(t) for t in range(10, 101, 10)]
FIG2_PANELS = {
    "a": {"gate.name": "xtheta", "gate.theta": [math.pi / 4, math.pi / 2, 3 * math.pi / 4],
          "sweep.tau_us": FIG2_TAUS, "output.csv": "fig2a.csv", "output.svg": "fig2a.svg"},
    "b": {"gate.name": "cz", "sweep.tau_us": FIG2_TAUS, "output.csv": "fig2b.csv", "output.svg": "fig2b.svg"},
}


def _apply_overrides(cfg: SweepConfig, args) -> SweepConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.samples is not None:
        changes["samples"] = args.samples
    if args.steps is not None:
        changes["steps"] = args.steps
    if args.out is not None:
        changes["out_dir"] = Path(args.out)
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    return cfg.replace(**changes) if changes else cfg


def _strict_violations(results) -> list[str]:
    """Margins below the numeric tolerance alone, ignoring the Monte-Carlo band."""
    out = []
    for i, r in enumerate(results):
        for b in r.bounds.values():
            if b.margin < -b.tolerance:
                out.append(f"row {i + 1}: {b.label} margin {b.margin:.3e} below -{b.tolerance:.1e} (strict)")
    return out


def _finish(report, strict: bool) -> int:
    lines = report.describe_violations()
    if strict:
        lines += [s for s in _strict_violations(report.results) if s not in lines]
    for line in lines:
        print(f"VIOLATION {line}", file=sys.stderr)
    return EXIT_VIOLATION if lines else 0


def cmd_simulate(args) -> int:
    flat = {}
    if args.config:
        cfg = load_config(args.config)
    else:
        if args.gate is not None:
            flat["gate.name"] = args.gate
        if args.theta is not None:
            flat["gate.theta"] = [args.theta]
        if args.tau is not None:
            flat["sweep.tau_us"] = [args.tau]
        if args.crosstalk is not None:
            flat["gate.crosstalk"] = args.crosstalk
        cfg = config_from_flat(flat)
    cfg = _apply_overrides(cfg, args)
    theta, tau = cfg.points()[0]
    res = analyze_point(cfg.gate, cfg.params.replace(theta=theta, tau_us=tau), cfg.steps, cfg.samples,
                        cfg.fidelity_samples, HaarSampler(cfg.seed).spawn(0), cfg.seed, cfg.relations)
    width = max(len(c) for c in CSV_COLUMNS)
    for c in CSV_COLUMNS:
        v = res.row[c]
        print(f"{c:<{width}}  {'' if v is None else (format(v, '.10g') if isinstance(v, float) else v)}")
    print(f"energy mode: {res.energy_mode}")
    for b in res.bounds.values():
        status = "holds" if b.holds else "VIOLATED"
        print(f"{b.label:<14} lhs={b.lhs:.10g} rhs={b.rhs:.10g} margin={b.margin:.3e} {status}")
    bad = res.violations if not args.strict else [b for b in res.bounds.values() if b.margin < -b.tolerance]
    return EXIT_VIOLATION if bad else 0


def cmd_sweep(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    report = run_sweep(cfg)
    print(f"wrote {report.csv_path}" + (f" and {report.svg_path}" if report.svg_path else ""))
    return _finish(report, args.strict)


def fig2_config(panel: str, seed: int = 0, out_dir=".") -> SweepConfig:
    return config_from_flat({**FIG2_PANELS[panel], "sweep.seed": seed, "output.dir": str(out_dir)})


def cmd_reproduce(args) -> int:
    status = 0
    panels = ("a", "b") if args.panel == "both" else (args.panel,)
    for panel in panels:
        cfg = fig2_config(panel, 0, args.out or DEFAULTS["output.dir"])
        cfg = _apply_overrides(cfg, args)
        title = "X_theta gate: F + sqrt(gamma Sigma / 2)" if panel == "a" else "CZ gate: relation left sides"
        report = run_sweep(cfg, svg_title=title)
        print(f"panel {panel}: wrote {report.csv_path} and {report.svg_path}")
        status = max(status, _finish(report, args.strict))
    return status


def cmd_selftest(args) -> int:
    return 1 if run_selftest() else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gate-thermo",
                                     description="Fidelity and entropy-production relations for noisy gates.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="YAML configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int, help="Haar samples for the dissipation estimate")
        p.add_argument("--steps", type=int, help="integrator steps per gate")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="worker processes (capped by GATE_THERMO_THREADS)")
        p.add_argument("--strict", action="store_true",
                       help="also fail on margins excused only by the Monte-Carlo error band")

    p = sub.add_parser("simulate", help="analyse one gate instance")
    common(p)
    p.add_argument("--gate", choices=GATES)
    p.add_argument("--theta", type=parse_angle, help="rotation angle, e.g. 1.57 or pi/2")
    p.add_argument("--tau", type=float, help="gate time in microseconds")
    p.add_argument("--crosstalk", type=float, help="extra term added to the implemented Hamiltonian")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="sweep gate time and write CSV/SVG")
    common(p, config_required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce-fig2", help="built-in X_theta and CZ sweeps with the reference parameters")
    common(p)
    p.add_argument("--panel", choices=("a", "b", "both"), default="both")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("selftest", help="run quick invariant checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "config", None) and args.command == "reproduce-fig2":
        print("reproduce-fig2 uses built-in parameters; --config is ignored", file=sys.stderr)
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
