"""Sweep configuration: a namespaced YAML tree, flattened to dotted keys."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..bounds import RELATIONS
from ..dynamics import DEFAULT_STEPS
from ..qcore import ValidationError
from .presets import GATES, PhysicalParams

DEFAULTS = {
    "gate.name": "xtheta",
    "gate.theta": [math.pi / 2],
    "gate.crosstalk": 0.0,
    "noise.omega_ghz": 5.0,
    "noise.temperature_mk": 20.0,
    "noise.coupling": 1e-6,
    "noise.dephasing": None,
    "noise.correlated_scale": 1.0,
    "units.omega_is_angular": False,
    "sweep.tau_us": [float(t) for t in range(10, 101, 10)],
    "sweep.steps": DEFAULT_STEPS,
    "sweep.samples": 200,
    "sweep.fidelity_samples": 10_000,
    "sweep.seed": 0,
    "sweep.relations": None,
    "sweep.workers": 1,
    "output.dir": ".",
    "output.csv": "sweep.csv",
    "output.svg": None,
}

_PI_EXPR = re.compile(r"^\s*([-+]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_angle(value) -> float:
    """A number, or a string such as ``"pi/4"``, ``"3*pi/4"``, ``"0.5pi"``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        m = _PI_EXPR.match(value)
        if m:
            coef = m.group(1)
            c = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
            den = float(m.group(2)) if m.group(2) else 1.0
            return c * math.pi / den
        try:
            return float(value)
        except ValueError:
            pass
    raise ValidationError(f"cannot read angle {value!r}")


def flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and not _is_range(v):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _is_range(v: dict) -> bool:
    return set(v) <= {"start", "stop", "num"} and {"start", "stop"} <= set(v)


def _as_list(v):
    if isinstance(v, dict):
        return list(np.linspace(float(v["start"]), float(v["stop"]), int(v.get("num", 10))))
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass(frozen=True)
class SweepConfig:
    gate: str
    thetas: tuple
    taus: tuple
    params: PhysicalParams
    steps: int = DEFAULT_STEPS
    samples: int = 200
    fidelity_samples: int = 10_000
    seed: int = 0
    relations: tuple | None = None
    workers: int = 1
    out_dir: Path = field(default_factory=lambda: Path("."))
    csv_name: str = "sweep.csv"
    svg_name: str | None = None

    def __post_init__(self):
        if self.gate not in GATES:
            raise ValidationError(f"unknown gate {self.gate!r}; choose from {GATES}")
        if not self.taus:
            raise ValidationError("tau grid is empty")
        if any(not b > a for a, b in zip(self.taus, self.taus[1:])):
            raise ValidationError("tau grid must be strictly increasing")
        if self.taus[0] <= 0:
            raise ValidationError("tau values must be positive")
        if self.samples < 2:
            raise ValidationError("sweep.samples must be >= 2")
        if self.fidelity_samples < 2:
            raise ValidationError("sweep.fidelity_samples must be >= 2")
        if self.steps < 1:
            raise ValidationError("sweep.steps must be >= 1")
        if self.workers < 1:
            raise ValidationError("sweep.workers must be >= 1")
        if self.relations is not None:
            bad = [r for r in self.relations if r not in RELATIONS]
            if bad:
                raise ValidationError(f"unknown relations {bad}; choose from {RELATIONS}")
        if not self.thetas:
            raise ValidationError("theta list is empty")

    @property
    def csv_path(self) -> Path:
        return Path(self.out_dir) / self.csv_name

    @property
    def svg_path(self) -> Path | None:
        return None if self.svg_name is None else Path(self.out_dir) / self.svg_name

    def points(self):
        """(theta, tau) pairs in report order."""
        thetas = self.thetas if self.gate == "xtheta" else (0.0,)
        return [(th, tau) for th in thetas for tau in self.taus]

    def replace(self, **changes) -> "SweepConfig":
        import dataclasses
        return dataclasses.replace(self, **changes)


def config_from_flat(flat: dict) -> SweepConfig:
    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    v = {**DEFAULTS, **flat}
    thetas = tuple(parse_angle(t) for t in _as_list(v["gate.theta"]))
    taus = tuple(float(t) for t in _as_list(v["sweep.tau_us"]))
    params = PhysicalParams(
        omega_ghz=float(v["noise.omega_ghz"]),
        temperature_mk=float(v["noise.temperature_mk"]),
        coupling=float(v["noise.coupling"]),
        dephasing=None if v["noise.dephasing"] is None else float(v["noise.dephasing"]),
        tau_us=taus[0] if taus else 1.0,
        theta=thetas[0] if thetas else 0.0,
        omega_is_angular=bool(v["units.omega_is_angular"]),
        crosstalk=float(v["gate.crosstalk"]),
        correlated_scale=float(v["noise.correlated_scale"]),
    )
    rel = v["sweep.relations"]
    return SweepConfig(
        gate=str(v["gate.name"]),
        thetas=thetas,
        taus=taus,
        params=params,
        steps=int(v["sweep.steps"]),
        samples=int(v["sweep.samples"]),
        fidelity_samples=int(v["sweep.fidelity_samples"]),
        seed=int(v["sweep.seed"]),
        relations=None if rel is None else tuple(_as_list(rel)),
        workers=int(v["sweep.workers"]),
        out_dir=Path(v["output.dir"]),
        csv_name=str(v["output.csv"]),
        svg_name=None if v["output.svg"] is None else str(v["output.svg"]),
    )


def load_config(path) -> SweepConfig:
    text = Path(path).read_text()
    tree = yaml.safe_load(text) or {}
    if not isinstance(tree, dict):
        raise ValidationError("config root must be a mapping")
    return config_from_flat(flatten(tree))


def dump_config(cfg: SweepConfig) -> str:
    """YAML text that loads back to an equivalent config."""
    p = cfg.params
    tree = {
        "gate": {"name": cfg.gate, "theta": list(cfg.thetas), "crosstalk": p.crosstalk},
        "noise": {"omega_ghz": p.omega_ghz, "temperature_mk": p.temperature_mk, "coupling": p.coupling,
                  "dephasing": p.dephasing, "correlated_scale": p.correlated_scale},
        "units": {"omega_is_angular": p.omega_is_angular},
        "sweep": {"tau_us": list(cfg.taus), "steps": cfg.steps, "samples": cfg.samples,
                  "fidelity_samples": cfg.fidelity_samples, "seed": cfg.seed,
                  "relations": None if cfg.relations is None else list(cfg.relations),
                  "workers": cfg.workers},
        "output": {"dir": str(cfg.out_dir), "csv": cfg.csv_name, "svg": cfg.svg_name},
    }
    return yaml.safe_dump(tree, sort_keys=False)
