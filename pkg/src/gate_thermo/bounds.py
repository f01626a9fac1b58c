"""Fidelity-dissipation relations: evaluated sides, margins, violation flags."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

RELATIONS = ("eq5", "eq6", "eq7", "eq8", "activity", "state_relax")
NUMERIC_TOL = 1e-6
MC_SIGMAS = 3.0


class PreconditionError(ValueError):
    """A relation was requested for a model it does not apply to."""


@dataclass(frozen=True)
class RelationInputs:
    """Everything a relation may consume.

    ``sigma_se`` / ``fidelity_se`` are Monte-Carlo standard errors (0 for
    exact inputs). ``energy`` and ``bandwidth`` are Q and g, or Q-bar and
    g-bar when ``energy_mode == "effective"``.
    """

    dim: int
    fidelity: float
    fidelity_se: float = 0.0
    sigma: float | None = None
    sigma_se: float = 0.0
    gamma: float | None = None
    upsilon: float | None = None
    energy: float | None = None
    bandwidth: float | None = None
    energy_mode: str = "bare"
    overlap_sq: float | None = None
    thermal_relaxation: bool = False
    time_independent: bool = True


@dataclass(frozen=True)
class StateRecord:
    F_phi: float
    sigma_phi: float
    gamma_phi: float | None = None


@dataclass(frozen=True)
class BoundResult:
    relation: str
    lhs: float
    rhs: float
    margin: float
    band: float = 0.0
    tolerance: float = NUMERIC_TOL
    label: str = ""
    inputs_digest: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.margin >= -max(self.tolerance, self.band)


def kappa(dim: int, g: float) -> float:
    return dim / ((dim + 1) * g)


def _eq5_lhs(f: float, gamma: float, sigma: float) -> float:
    return f + math.sqrt(max(gamma * max(sigma, 0.0), 0.0) / 2)


def _band(fun, value: float, se: float) -> float:
    """Half-width of fun over value +/- 3 SE (linearized error band)."""
    if se <= 0:
        return 0.0
    lo = fun(value - MC_SIGMAS * se)
    hi = fun(value + MC_SIGMAS * se)
    return abs(hi - lo) / 2


def _require(value, name: str, relation: str):
    if value is None:
        raise PreconditionError(f"{relation} needs {name}")
    return value


def evaluate_relation(relation: str, inputs: RelationInputs, state: StateRecord | None = None,
                      tolerance: float = NUMERIC_TOL) -> BoundResult:
    if relation not in RELATIONS:
        raise ValueError(f"unknown relation {relation!r}")
    x = inputs
    d = x.dim
    f_band = MC_SIGMAS * x.fidelity_se
    digest = {k: v for k, v in asdict(x).items() if v is not None}

    if relation in ("eq5", "eq6"):
        gamma = _require(x.gamma, "gamma", relation)
        sigma = _require(x.sigma, "sigma", relation)
        lhs = _eq5_lhs(x.fidelity, gamma, sigma)
        rhs = 1.0
        if relation == "eq6":
            ov = _require(x.overlap_sq, "|tr(U_hat^dag U_g)|^2", relation)
            rhs = (ov + d) / (d * (d + 1))
        band = f_band + _band(lambda s: _eq5_lhs(x.fidelity, gamma, s), sigma, x.sigma_se)
        return BoundResult(relation, lhs, rhs, lhs - rhs, band, tolerance, relation, digest)

    if relation == "eq7":
        if not x.thermal_relaxation:
            raise PreconditionError("eq7 applies only to thermal-relaxation gates")
        sigma = _require(x.sigma, "sigma", relation)
        lhs = x.fidelity * math.exp(sigma)
        band = f_band * math.exp(sigma) + _band(lambda s: x.fidelity * math.exp(s), sigma, x.sigma_se)
        return BoundResult(relation, lhs, 1.0, lhs - 1.0, band, tolerance, relation, digest)

    if relation == "eq8":
        q = _require(x.energy, "energy change", relation)
        g = _require(x.bandwidth, "bandwidth", relation)
        if x.energy_mode == "bare" and not x.time_independent:
            raise PreconditionError("eq8 with the bare Hamiltonian needs a time-independent gate; "
                                    "use the effective-Hamiltonian mode")
        if g > 0:
            term = kappa(d, g) * abs(q)
        else:
            term = 0.0 if abs(q) < 1e-15 else math.inf
        lhs = x.fidelity + term
        label = "eq8" if x.energy_mode == "bare" else "eq8_effective"
        return BoundResult(relation, lhs, 1.0, 1.0 - lhs, f_band, tolerance, label, digest)

    if relation == "activity":
        ups = _require(x.upsilon, "upsilon", relation)
        lhs = x.fidelity + ups
        return BoundResult(relation, lhs, 1.0, lhs - 1.0, f_band, tolerance, relation, digest)

    # state_relax: F_phi e^{Sigma_phi} >= 1
    if not x.thermal_relaxation:
        raise PreconditionError("state_relax applies only to thermal-relaxation gates")
    if state is None:
        raise PreconditionError("state_relax needs a per-state record")
    lhs = state.F_phi * math.exp(state.sigma_phi)
    digest.update(F_phi=state.F_phi, sigma_phi=state.sigma_phi)
    return BoundResult(relation, lhs, 1.0, lhs - 1.0, 0.0, tolerance, relation, digest)


def applicable_relations(inputs: RelationInputs) -> list[str]:
    out = ["eq5", "activity"]
    if inputs.overlap_sq is not None:
        out.append("eq6")
    if inputs.thermal_relaxation:
        out.append("eq7")
    if inputs.energy is not None and (inputs.energy_mode == "effective" or inputs.time_independent):
        out.append("eq8")
    return [r for r in RELATIONS if r in out]
