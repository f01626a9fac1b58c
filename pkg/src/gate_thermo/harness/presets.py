"""Gate and noise presets in physical units.

Internal units: hbar = k_B = 1, time in microseconds, energies and rates in
inverse microseconds.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import constants

from ..dynamics import DEFAULT_STEPS, GateModel, HamiltonianProtocol, JumpProcess, lindblad_evolve
from ..qcore import I2, SM, SP, SX, SZ, ValidationError, kron, pauli_string

GATES = ("xtheta", "cz")


@dataclass(frozen=True)
class PhysicalParams:
    """Physical parameters of one gate instance.

    ``omega_ghz`` is the qubit gap quoted in GHz. With ``omega_is_angular``
    false (default) it is read as an ordinary frequency and Omega = 2 pi f;
    with it true the quoted number already is Omega / (1e9 rad/s).
    ``dephasing`` (1/us) of ``None`` selects Gamma_p from T1 = sqrt(2) T2.
    """

    omega_ghz: float = 5.0
    temperature_mk: float = 20.0
    coupling: float = 1e-6
    dephasing: float | None = None
    tau_us: float = 10.0
    theta: float = math.pi / 2
    omega_is_angular: bool = False
    crosstalk: float = 0.0
    correlated_scale: float = 1.0

    def __post_init__(self):
        if not self.temperature_mk > 0:
            raise ValidationError("temperature must be positive")
        if self.coupling < 0 or (self.dephasing is not None and self.dephasing < 0):
            raise ValidationError("rates must be non-negative")
        if not self.tau_us > 0:
            raise ValidationError("tau must be positive")
        if not self.omega_ghz > 0 or self.correlated_scale < 0:
            raise ValidationError("omega must be positive and correlated_scale non-negative")

    @property
    def omega(self) -> float:
        """Qubit angular frequency in rad/us."""
        f = self.omega_ghz * 1e3
        return f if self.omega_is_angular else 2 * math.pi * f

    @property
    def beta(self) -> float:
        """hbar / (k_B T) in microseconds."""
        return constants.hbar / (constants.k * self.temperature_mk * 1e-3) * 1e6

    @property
    def nbar(self) -> float:
        return bose(self.beta * self.omega)

    @property
    def gamma_1(self) -> float:
        """Longitudinal relaxation rate Gamma_a Omega (2 nbar + 1)."""
        return self.coupling * self.omega * (2 * self.nbar + 1)

    @property
    def gamma_p(self) -> float:
        if self.dephasing is not None:
            return self.dephasing
        # 1/T2 = Gamma_1/2 + Gamma_p and T1 = sqrt(2) T2
        return (math.sqrt(2) - 0.5) * self.gamma_1

    def rates(self) -> dict:
        return {"omega": self.omega, "beta": self.beta, "nbar": self.nbar,
                "gamma_1": self.gamma_1, "gamma_p": self.gamma_p}

    def to_config(self) -> dict:
        return {
            "noise.omega_ghz": self.omega_ghz,
            "noise.temperature_mk": self.temperature_mk,
            "noise.coupling": self.coupling,
            "noise.dephasing": self.dephasing,
            "noise.correlated_scale": self.correlated_scale,
            "units.omega_is_angular": self.omega_is_angular,
            "gate.crosstalk": self.crosstalk,
            "gate.theta": self.theta,
            "sweep.tau_us": self.tau_us,
        }

    @classmethod
    def from_config(cls, flat: dict) -> "PhysicalParams":
        keys = {"noise.omega_ghz": "omega_ghz", "noise.temperature_mk": "temperature_mk",
                "noise.coupling": "coupling", "noise.dephasing": "dephasing",
                "noise.correlated_scale": "correlated_scale", "units.omega_is_angular": "omega_is_angular",
                "gate.crosstalk": "crosstalk", "gate.theta": "theta", "sweep.tau_us": "tau_us"}
        kw = {keys[k]: v for k, v in flat.items() if k in keys}
        return cls(**kw)

    def replace(self, **changes) -> "PhysicalParams":
        return dataclasses.replace(self, **changes)


def bose(x: float) -> float:
    return 1.0 / math.expm1(x)


def thermal_pair(rate: float, nbar: float, beta_gap: float, lower: np.ndarray, raise_: np.ndarray,
                 first_index: int, labels=("relax", "excite")) -> list[JumpProcess]:
    """Detailed-balance pair sqrt(rate (nbar+1)) lower, sqrt(rate nbar) raise."""
    return [
        JumpProcess(math.sqrt(rate * (nbar + 1)) * lower, beta_gap, first_index + 1, "dissipative", labels[0]),
        JumpProcess(math.sqrt(rate * nbar) * raise_, -beta_gap, first_index, "dissipative", labels[1]),
    ]


def xtheta_drive(theta: float, tau: float):
    """omega_t = (theta / 2 tau)[1 + 2 sin^2(pi t / 2 tau)]; integrates to theta."""
    def omega_t(t):
        return theta / (2 * tau) * (1 + 2 * np.sin(np.pi * t / (2 * tau)) ** 2)
    return omega_t


def xtheta_model(params: PhysicalParams, steps: int = DEFAULT_STEPS) -> GateModel:
    tau = params.tau_us
    omega_t = xtheta_drive(params.theta, tau)
    ideal = HamiltonianProtocol(((lambda t: 0.5 * omega_t(t), SX),), 2)
    implemented = ideal.plus(params.crosstalk, SZ, "implemented") if params.crosstalk else None
    rate = params.coupling * params.omega
    jumps = thermal_pair(rate, params.nbar, params.beta * params.omega, SM, SP, 0)
    jumps.append(JumpProcess(math.sqrt(params.gamma_p / 2) * SZ, label="dephasing"))
    return GateModel(ideal, tuple(jumps), tau, steps, implemented, name="xtheta")


def cz_hamiltonian(tau: float) -> np.ndarray:
    omega = math.pi / (2 * tau)
    return 0.5 * omega * (pauli_string("ZI") + pauli_string("IZ") - pauli_string("ZZ"))


def cz_model(params: PhysicalParams, steps: int = DEFAULT_STEPS) -> GateModel:
    """CZ from a constant Hamiltonian, local dephasing and correlated noise.

    |00> lies 2 omega above |11>, so sigma_+ x sigma_+ (|00> -> |11>) is the
    relaxation direction.
    """
    tau = params.tau_us
    h = cz_hamiltonian(tau)
    ideal = HamiltonianProtocol.constant(h)
    implemented = ideal.plus(params.crosstalk, pauli_string("ZZ"), "implemented") if params.crosstalk else None
    gap = 2 * (math.pi / (2 * tau))
    rate = params.correlated_scale * params.coupling * gap
    jumps = thermal_pair(rate, bose(params.beta * gap), params.beta * gap, kron(SP, SP), kron(SM, SM), 0,
                         ("correlated_relax", "correlated_excite"))
    amp = math.sqrt(params.gamma_p / 2)
    jumps.append(JumpProcess(amp * pauli_string("ZI"), label="dephasing_1"))
    jumps.append(JumpProcess(amp * pauli_string("IZ"), label="dephasing_2"))
    return GateModel(ideal, tuple(jumps), tau, steps, implemented,
                     thermal_relaxation=not params.crosstalk, name="cz")


def build_preset(gate: str, params: PhysicalParams, steps: int = DEFAULT_STEPS) -> GateModel:
    if gate == "xtheta":
        return xtheta_model(params, steps)
    if gate == "cz":
        return cz_model(params, steps)
    raise ValidationError(f"unknown gate {gate!r}; choose from {GATES}")


def pauli_noise_model(rates: dict, tau: float, steps: int = DEFAULT_STEPS, h=None) -> GateModel:
    """Jumps sqrt(Gamma_c) P_c for Pauli strings P_c, e.g. ``{"X": 1e-4}``."""
    labels = list(rates)
    n = len(labels[0])
    d = 2 ** n
    jumps = tuple(JumpProcess(math.sqrt(r) * pauli_string(lab), label=lab) for lab, r in rates.items())
    ideal = HamiltonianProtocol.zero(d) if h is None else HamiltonianProtocol.constant(h)
    return GateModel(ideal, jumps, tau, steps, name="pauli")


def amplitude_damping_model(rate: float, tau: float, entropy_weight: float = 0.0,
                            steps: int = DEFAULT_STEPS) -> GateModel:
    """H = 0 and a single unpaired decay jump sqrt(rate) sigma_-."""
    jumps = (JumpProcess(math.sqrt(rate) * SM, entropy_weight, None, "dissipative", "decay"),)
    return GateModel(HamiltonianProtocol.zero(2), jumps, tau, steps, name="amplitude_damping")


def measure_t1_t2(params: PhysicalParams, steps: int = 4000) -> tuple[float, float]:
    """Fit T1 and T2 of the single-qubit noise with the drive switched off."""
    base = xtheta_model(params.replace(tau_us=1.0), steps)
    tau = 3.0 / params.gamma_1
    model = base.replace(ideal=HamiltonianProtocol.zero(2), implemented=None, tau=tau)
    times = model.grid()
    pop = lindblad_evolve(model, np.array([0, 1], dtype=complex)).states[:, 1, 1].real
    coh = np.abs(lindblad_evolve(model, np.array([1, 1], dtype=complex) / math.sqrt(2)).states[:, 0, 1])
    p_eq = params.nbar / (2 * params.nbar + 1)
    t1 = -1.0 / np.polyfit(times, np.log(pop - p_eq), 1)[0]
    t2 = -1.0 / np.polyfit(times, np.log(coh), 1)[0]
    return float(t1), float(t2)


__all__ = ["PhysicalParams", "build_preset", "xtheta_model", "cz_model", "pauli_noise_model",
           "amplitude_damping_model", "measure_t1_t2", "GATES", "I2"]
