"""Per-point analysis, the sweep runner and CSV emission."""
from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..bounds import BoundResult, RelationInputs, StateRecord, applicable_relations, evaluate_relation
from ..channel import average_dissipation_mc, average_fidelity, choi_of_model
from ..qcore import HaarSampler
from ..thermo import summarize
from .config import SweepConfig
from .presets import PhysicalParams, build_preset

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "gate", "theta_rad", "tau_us", "F_exact", "F_mc", "F_mc_se", "Sigma_mc", "Sigma_mc_se",
    "gamma", "upsilon", "Q", "bandwidth", "lhs_eq5", "margin_eq5", "rhs_eq6", "margin_eq6",
    "lhs_eq7", "margin_eq7", "lhs_eq8", "margin_eq8", "margin_activity", "seed",
)
THREADS_ENV = "GATE_THERMO_THREADS"


@dataclass(frozen=True)
class PointResult:
    row: dict
    bounds: dict  # relation -> BoundResult
    energy_mode: str

    @property
    def violations(self) -> list[BoundResult]:
        return [b for b in self.bounds.values() if not b.holds]


def analyze_model(model, gate: str, theta: float, samples: int, fidelity_samples: int,
                  sampler: HaarSampler, seed: int, relations=None) -> PointResult:
    """Fidelity, dissipation, coefficients and relation margins of one model."""
    channel = choi_of_model(model)
    target = model.target_unitary
    f_exact = average_fidelity(channel, target).value
    diss = average_dissipation_mc(model, samples, sampler, channel)
    f_mc = average_fidelity(channel, target, "monte_carlo", fidelity_samples, sampler)
    summ = summarize(model, channel)
    energy, g = summ.energy_terms()
    u_hat = model.implemented_unitary
    overlap_sq = float(abs(np.trace(u_hat.conj().T @ target)) ** 2)
    inputs = RelationInputs(
        dim=model.dim, fidelity=f_exact, sigma=diss.mean, sigma_se=diss.std_error,
        gamma=summ.gamma, upsilon=summ.upsilon, energy=energy, bandwidth=g,
        energy_mode=summ.energy_mode, overlap_sq=overlap_sq,
        thermal_relaxation=model.thermal_relaxation, time_independent=model.ideal.time_independent,
    )
    wanted = applicable_relations(inputs)
    if relations is not None:
        wanted = [r for r in wanted if r in relations]
    bounds = {r: evaluate_relation(r, inputs) for r in wanted}
    if relations is not None and "state_relax" in relations and model.thermal_relaxation:
        rec = diss.records
        worst = int(np.argmin(rec["F_phi"] * np.exp(rec["sigma_phi"])))
        bounds["state_relax"] = evaluate_relation(
            "state_relax", inputs, StateRecord(rec["F_phi"][worst], rec["sigma_phi"][worst]))

    def cell(rel, attr):
        b = bounds.get(rel)
        return None if b is None else getattr(b, attr)

    row = {
        "gate": gate, "theta_rad": theta, "tau_us": model.tau,
        "F_exact": f_exact, "F_mc": f_mc.value, "F_mc_se": f_mc.std_error,
        "Sigma_mc": diss.mean, "Sigma_mc_se": diss.std_error,
        "gamma": summ.gamma, "upsilon": summ.upsilon, "Q": energy, "bandwidth": g,
        "lhs_eq5": cell("eq5", "lhs"), "margin_eq5": cell("eq5", "margin"),
        "rhs_eq6": cell("eq6", "rhs"), "margin_eq6": cell("eq6", "margin"),
        "lhs_eq7": cell("eq7", "lhs"), "margin_eq7": cell("eq7", "margin"),
        "lhs_eq8": cell("eq8", "lhs"), "margin_eq8": cell("eq8", "margin"),
        "margin_activity": cell("activity", "margin"), "seed": seed,
    }
    return PointResult(row, bounds, summ.energy_mode)


def analyze_point(gate: str, params: PhysicalParams, steps: int, samples: int, fidelity_samples: int,
                  sampler: HaarSampler, seed: int, relations=None) -> PointResult:
    model = build_preset(gate, params, steps)
    return analyze_model(model, gate, params.theta, samples, fidelity_samples, sampler, seed, relations)


def _job(args) -> PointResult:
    gate, params, steps, samples, fsamples, seed, index, relations = args
    return analyze_point(gate, params, steps, samples, fsamples, HaarSampler(seed).spawn(index), seed, relations)


def worker_count(requested: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    if cap is None:
        return requested
    try:
        return max(1, min(requested, int(cap)))
    except ValueError:
        log.warning("ignoring non-integer %s=%r", THREADS_ENV, cap)
        return requested


def run_points(cfg: SweepConfig) -> list[PointResult]:
    """Analyse every (theta, tau) point; results come back in point order."""
    jobs = [(cfg.gate, cfg.params.replace(theta=th, tau_us=tau), cfg.steps, cfg.samples,
             cfg.fidelity_samples, cfg.seed, i, cfg.relations)
            for i, (th, tau) in enumerate(cfg.points())]
    width = worker_count(cfg.workers)
    if width <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=width) as pool:
        return list(pool.map(_job, jobs))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def csv_text(results: list[PointResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow([_fmt(r.row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


@dataclass(frozen=True)
class SweepReport:
    config: SweepConfig
    results: list
    csv_path: Path | None = None
    svg_path: Path | None = None

    @property
    def violations(self) -> list[tuple[int, BoundResult]]:
        return [(i, b) for i, r in enumerate(self.results) for b in r.violations]

    def describe_violations(self) -> list[str]:
        out = []
        for i, b in self.violations:
            row = self.results[i].row
            out.append(f"row {i + 1} (gate={row['gate']}, theta={row['theta_rad']:.6g}, tau={row['tau_us']:.6g}): "
                       f"{b.label} margin {b.margin:.3e} below -{max(b.tolerance, b.band):.1e}")
        return out


def run_sweep(cfg: SweepConfig, write: bool = True, svg_title: str | None = None) -> SweepReport:
    from .svg import sweep_svg

    results = run_points(cfg)
    csv_path = svg_path = None
    if write:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        csv_path = cfg.csv_path
        csv_path.write_text(csv_text(results))
        if cfg.svg_path is not None:
            svg_path = cfg.svg_path
            svg_path.write_text(sweep_svg(results, svg_title or f"{cfg.gate} sweep"))
    report = SweepReport(cfg, results, csv_path, svg_path)
    for line in report.describe_violations():
        log.error("violation: %s", line)
    return report
