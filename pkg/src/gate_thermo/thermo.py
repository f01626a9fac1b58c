"""Entropy production, its spectral rate, and the jump-operator coefficients.

All entropies are in nats.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .dynamics import GateModel, Trajectory, frame_jumps, gamma_phi_integrand, jump_weights
from .qcore import dag, hermitize, principal_log_unitary, spectral_norm, variance_sq, von_neumann_entropy

EIG_FLOOR = 1e-14


class ModeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class EntropyBreakdown:
    sigma_sys: float
    sigma_env: float

    @property
    def sigma_total(self) -> float:
        return self.sigma_sys + self.sigma_env


def entropy_production(traj: Trajectory) -> EntropyBreakdown:
    s0 = float(von_neumann_entropy(traj.states[0], EIG_FLOOR))
    s1 = float(von_neumann_entropy(traj.states[-1], EIG_FLOOR))
    return EntropyBreakdown(s1 - s0, float(traj.env_entropy_acc[-1]))


def entropy_production_curve(traj: Trajectory) -> np.ndarray:
    """Sigma_sys(t) + Sigma_env(t) at every grid time."""
    s = von_neumann_entropy(traj.states, EIG_FLOOR)
    return s - s[0] + traj.env_entropy_acc


# --------------------------------------------------------------------------
# spectral entropy-production rate
# --------------------------------------------------------------------------


def logmean(x, y):
    """Logarithmic mean (x - y) / ln(x / y), with Phi(x, x) = x, Phi(x, 0) = 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pos = (x > 0) & (y > 0)
    xs = np.where(pos, x, 1.0)
    ys = np.where(pos, y, 1.0)
    close = np.isclose(xs, ys, rtol=1e-12, atol=0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(close, 0.5 * (xs + ys), (xs - ys) / np.log(xs / np.where(close, 2 * xs, ys)))
    return np.where(pos, val, 0.0)


@dataclass(frozen=True)
class SpectralRateTerms:
    """Transition rates, currents and forces in the eigenbasis of rho.

    Arrays are indexed ``[c, m, n]`` for the transition n -> m through jump c.
    ``forces`` is NaN where a rate vanishes.
    """

    eigenvalues: np.ndarray
    transition_rates: np.ndarray
    currents: np.ndarray
    forces: np.ndarray
    weights: np.ndarray

    def rate(self) -> float:
        p = np.clip(self.eigenvalues, EIG_FLOOR, None)
        s = self.weights[:, None, None]
        x = np.exp(s / 2) * p[None, None, :]
        y = np.exp(-s / 2) * p[None, :, None]
        f = np.log(x / y)
        terms = np.exp(-s / 2) * self.transition_rates * f ** 2 * logmean(x, y)
        return float(max(0.5 * np.sum(terms), 0.0))


def spectral_rate_terms(rho: np.ndarray, ops: np.ndarray, weights, partners) -> SpectralRateTerms:
    """Decompose the entropy-production rate of ``rho`` under jumps ``ops`` (C, d, d)."""
    ops = np.asarray(ops, dtype=complex)
    weights = np.asarray(weights, dtype=float)
    p, v = np.linalg.eigh(hermitize(rho))
    lm = dag(v)[None] @ ops @ v[None]
    w = np.abs(lm) ** 2
    wp = w[list(partners)]
    w_rev = np.swapaxes(wp, -1, -2)  # w^{c'}_{nm}
    currents = w * p[None, None, :] - w_rev * p[None, :, None]
    ps = np.clip(p, EIG_FLOOR, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        forces = np.log((w * ps[None, None, :]) / (w_rev * ps[None, :, None]))
    forces = np.where((w > 0) & (w_rev > 0), forces, np.nan)
    return SpectralRateTerms(p, w, currents, forces, weights)


def entropy_rate_spectral(rho: np.ndarray, ops: np.ndarray, weights, partners=None) -> float:
    """Entropy-production rate from the spectral decomposition of rho.

    ``rho`` and ``ops`` must be in the same frame (the interaction frame in
    the derivation; the expression is invariant under a common rotation).
    """
    ops = np.asarray(ops, dtype=complex)
    if ops.shape[0] == 0:
        return 0.0
    partners = range(ops.shape[0]) if partners is None else partners
    return spectral_rate_terms(rho, ops, weights, partners).rate()


def spectral_rate_along(model: GateModel, traj: Trajectory) -> np.ndarray:
    """Spectral entropy-production rate at every grid time of a trajectory."""
    times = traj.times
    ls = frame_jumps(model, times, "interaction")
    s = jump_weights(model, times)
    rho = traj.states
    if traj.frame == "lab" and not model.implemented.is_zero:
        u = model.unitaries_at(times, "implemented")
        rho = dag(u) @ rho @ u
    if not model.detailed_balance:
        raise ValueError("spectral rate needs every dissipative jump to have a detailed-balance partner")
    partners = [model.partner_of(c) for c in range(len(model.jumps))]
    return np.array([entropy_rate_spectral(rho[k], ls[:, k], s[:, k], partners) for k in range(len(times))])


# --------------------------------------------------------------------------
# gamma, activity, energy change
# --------------------------------------------------------------------------


def gamma_coefficients(model: GateModel, phi: np.ndarray | None = None, frame: str = "lab"):
    """(gamma, gamma_phi). ``gamma_phi`` is ``None`` unless a state is given."""
    times = model.grid()
    ls = frame_jumps(model, times, frame)
    if ls.shape[0] == 0:
        gamma = 0.0
    else:
        gamma = float(trapezoid(variance_sq(ls).sum(axis=0), times))
    gamma_phi = None
    if phi is not None:
        gamma_phi = float(trapezoid(gamma_phi_integrand(model, np.asarray(phi, dtype=complex), times), times))
    return gamma, gamma_phi


def activity(model: GateModel) -> float:
    """upsilon = int sum_c ||L_c||_inf Delta L_c dt."""
    times = model.grid()
    ls = frame_jumps(model, times, "lab")
    if ls.shape[0] == 0:
        return 0.0
    integrand = (spectral_norm(ls) * np.sqrt(variance_sq(ls))).sum(axis=0)
    return float(trapezoid(integrand, times))


@dataclass(frozen=True)
class EnergyChange:
    value: float
    bandwidth: float
    hamiltonian: np.ndarray
    mode: str


def bandwidth(h: np.ndarray) -> float:
    w = np.linalg.eigvalsh(hermitize(h))
    return float(w[-1] - w[0])


def effective_hamiltonian(model: GateModel) -> np.ndarray:
    """Time-independent H-bar with exp(-i H-bar tau) = U_g (principal branch)."""
    return principal_log_unitary(model.target_unitary) / model.tau


def energy_change(model: GateModel, channel, mode: str = "bare") -> EnergyChange:
    """Haar-averaged energy change, exact via the channel acting on 1/d."""
    if mode == "bare":
        if not model.ideal.time_independent:
            raise ModeMismatch("bare energy change needs a time-independent Hamiltonian; use mode='effective'")
        h = model.ideal.evaluate(0.0)
    elif mode == "effective":
        h = effective_hamiltonian(model)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    d = model.dim
    mixed = np.eye(d, dtype=complex) / d
    q = float(np.trace(h @ (channel.apply(mixed) - mixed)).real)
    return EnergyChange(q, bandwidth(h), h, mode)


@dataclass(frozen=True)
class ThermoSummary:
    gamma: float
    upsilon: float
    Q: float | None
    bandwidth_g: float | None
    gamma_phi: float | None = None
    effective_H: np.ndarray | None = None
    Qbar: float | None = None
    bandwidth_gbar: float | None = None

    @property
    def energy_mode(self) -> str:
        return "bare" if self.Q is not None else "effective"

    def energy_terms(self) -> tuple[float, float]:
        """(Q, g) for the bare mode when available, else (Q-bar, g-bar)."""
        if self.Q is not None:
            return self.Q, self.bandwidth_g
        return self.Qbar, self.bandwidth_gbar


def summarize(model: GateModel, channel, phi: np.ndarray | None = None) -> ThermoSummary:
    gamma, gamma_phi = gamma_coefficients(model, phi)
    eff = energy_change(model, channel, "effective")
    q = g = None
    if model.ideal.time_independent:
        bare = energy_change(model, channel, "bare")
        q, g = bare.value, bare.bandwidth
    return ThermoSummary(gamma, activity(model), q, g, gamma_phi, eff.hamiltonian, eff.value, eff.bandwidth)
