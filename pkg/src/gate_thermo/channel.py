"""Channel representations of a gate model and fidelity estimates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .dynamics import GateModel, gamma_phi_integrand, integrate, lindblad_evolve
from .qcore import HaarSampler, check_unitary, hermitize, von_neumann_entropy
from .thermo import EIG_FLOOR, entropy_production

CHOI_NEG_TOL = 1e-8
COMPLETENESS_ATOL = 1e-7
KRAUS_DROP = 1e-13


class NumericalAccuracyError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ChannelRep:
    """A CPTP map as a Choi matrix plus Kraus operators.

    The Choi matrix is ``J = sum_ij E(|i><j|) kron |i><j|`` (output first),
    so tracing out the output factor gives the identity and ``tr J = d``.
    ``env_functional`` holds e_ij with Sigma_env(rho0) = sum_ij rho0_ij e_ij,
    when the channel was built from a model.
    """

    dim: int
    choi: np.ndarray
    kraus: np.ndarray
    source_model: GateModel | None = None
    env_functional: np.ndarray | None = None

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """E(rho) for one matrix or a stack ``(n, d, d)``."""
        k = self.kraus
        return np.einsum("kab,...bc,kdc->...ad", k, rho, k.conj())

    def apply_pure(self, psis: np.ndarray) -> np.ndarray:
        """E(|phi><phi|) for a batch of vectors ``(n, d)``."""
        kpsi = np.einsum("kab,nb->nka", self.kraus, psis)
        return np.einsum("nka,nkb->nab", kpsi, kpsi.conj())

    def completeness_error(self) -> float:
        s = np.einsum("kba,kbc->ac", self.kraus.conj(), self.kraus)
        return float(np.max(np.abs(s - np.eye(self.dim))))

    def rotated(self, u: np.ndarray) -> "ChannelRep":
        """The channel followed by rho -> U rho U^dag."""
        return from_kraus(u[None] @ self.kraus, self.source_model, self.env_functional)


def choi_from_kraus(kraus: np.ndarray) -> np.ndarray:
    kraus = np.asarray(kraus, dtype=complex)
    d_out, d_in = kraus.shape[-2:]
    v = kraus.reshape(kraus.shape[0], d_out * d_in)
    return v.T @ v.conj()


def from_kraus(kraus, source_model=None, env_functional=None) -> ChannelRep:
    kraus = np.asarray(kraus, dtype=complex)
    return ChannelRep(kraus.shape[-1], choi_from_kraus(kraus), kraus, source_model, env_functional)


def kraus_from_choi(choi: np.ndarray, dim: int) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(choi))
    if w[0] < -CHOI_NEG_TOL:
        raise NumericalAccuracyError(
            f"Choi matrix has eigenvalue {w[0]:.2e} < -{CHOI_NEG_TOL:g}; raise the step count")
    w = np.clip(w, 0.0, None)
    # round-off eigenvalues give negligible Kraus operators; drop them
    keep = w > KRAUS_DROP * w[-1]
    k = np.sqrt(w[keep])[:, None] * v[:, keep].T
    return k.reshape(-1, dim, dim)


def from_choi(choi: np.ndarray, source_model=None, env_functional=None) -> ChannelRep:
    choi = hermitize(np.asarray(choi, dtype=complex))
    d = int(round(np.sqrt(choi.shape[0])))
    if choi.shape != (d * d, d * d):
        raise ValueError(f"Choi matrix must be d^2 x d^2, got {choi.shape}")
    kraus = kraus_from_choi(choi, d)
    rep = ChannelRep(d, choi, kraus, source_model, env_functional)
    err = rep.completeness_error()
    if err > COMPLETENESS_ATOL:
        raise NumericalAccuracyError(f"Kraus completeness violated by {err:.2e}")
    return rep


def choi_of_model(model: GateModel, frame: str = "lab") -> ChannelRep:
    """Propagate the d^2 matrix units |i><j| through the GKSL dynamics."""
    d = model.dim
    units = np.eye(d * d, dtype=complex).reshape(d * d, d, d)
    raw = integrate(model, units, frame)
    final = raw.states[:, -1].reshape(d, d, d, d)  # [i, j, a, b] = E(|i><j|)[a, b]
    choi = np.transpose(final, (2, 0, 3, 1)).reshape(d * d, d * d)
    env = trapezoid(raw.env_rate, model.grid(), axis=1).reshape(d, d)
    return from_choi(choi, model, env)


@dataclass(frozen=True)
class FidelityEstimate:
    value: float
    std_error: float = 0.0
    method: str = "exact"
    samples: int = 0


def average_fidelity(channel: ChannelRep, target: np.ndarray, method: str = "exact",
                     samples: int = 10_000, sampler: HaarSampler | None = None) -> FidelityEstimate:
    target = check_unitary(target, "U_g")
    d = channel.dim
    if method == "exact":
        overlaps = np.einsum("ab,kab->k", target.conj(), channel.kraus)
        value = (d + np.sum(np.abs(overlaps) ** 2)) / (d * (d + 1))
        return FidelityEstimate(float(value), 0.0, "exact", 0)
    if method != "monte_carlo":
        raise ValueError(f"unknown method {method!r}")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    sampler = sampler or HaarSampler(0)
    psis = sampler.states(d, samples)
    vals = pure_state_fidelities(channel, target, psis)
    se = float(np.std(vals, ddof=1) / np.sqrt(samples)) if samples > 1 else float("inf")
    return FidelityEstimate(float(np.mean(vals)), se, "monte_carlo", samples)


def pure_state_fidelities(channel: ChannelRep, target: np.ndarray, psis: np.ndarray) -> np.ndarray:
    """<phi|U_g^dag E(phi) U_g|phi> = sum_k |<U_g phi|K_k|phi>|^2 per state."""
    kpsi = np.einsum("kab,nb->nka", channel.kraus, psis)
    ideal = psis @ target.T
    amp = np.einsum("na,nka->nk", ideal.conj(), kpsi)
    return np.sum(np.abs(amp) ** 2, axis=1)


def state_fidelity(model: GateModel, phi: np.ndarray) -> float:
    phi = np.asarray(phi, dtype=complex)
    traj = lindblad_evolve(model, phi)
    out = model.target_unitary @ phi
    return float(np.vdot(out, traj.final_state @ out).real)


@dataclass(frozen=True)
class DissipationEstimate:
    mean: float
    std_error: float
    samples: int
    records: np.ndarray  # structured: F_phi, sigma_phi, gamma_phi, sigma_sys, sigma_env

    @property
    def std_dev(self) -> float:
        return float(np.std(self.records["sigma_phi"], ddof=1))


RECORD_DTYPE = np.dtype([("F_phi", float), ("sigma_phi", float), ("gamma_phi", float),
                         ("sigma_sys", float), ("sigma_env", float)])


def state_records(model: GateModel, psis: np.ndarray, channel: ChannelRep | None = None,
                  method: str = "linear") -> np.ndarray:
    """Per-state (F_phi, Sigma_phi, gamma_phi) for pure initial states.

    ``linear`` superposes the propagated matrix units; ``direct`` integrates
    one trajectory per state.
    """
    psis = np.atleast_2d(np.asarray(psis, dtype=complex))
    n = psis.shape[0]
    rec = np.zeros(n, dtype=RECORD_DTYPE)
    target = model.target_unitary
    if method == "direct":
        for i, psi in enumerate(psis):
            traj = lindblad_evolve(model, psi)
            ent = entropy_production(traj)
            out = target @ psi
            rec[i] = (np.vdot(out, traj.final_state @ out).real, ent.sigma_total,
                      traj.gamma_phi_acc[-1], ent.sigma_sys, ent.sigma_env)
        return rec
    if method != "linear":
        raise ValueError(f"unknown method {method!r}")
    channel = channel if channel is not None else choi_of_model(model)
    rho = channel.apply_pure(psis)
    rec["sigma_sys"] = von_neumann_entropy(rho, EIG_FLOOR)
    rec["sigma_env"] = np.einsum("ni,ij,nj->n", psis, channel.env_functional, psis.conj()).real
    rec["sigma_phi"] = rec["sigma_sys"] + rec["sigma_env"]
    rec["F_phi"] = pure_state_fidelities(channel, target, psis)
    times = model.grid()
    for start in range(0, n, 32):
        chunk = psis[start:start + 32]
        rec["gamma_phi"][start:start + 32] = trapezoid(gamma_phi_integrand(model, chunk, times), times, axis=1)
    return rec


def average_dissipation_mc(model: GateModel, samples: int, sampler: HaarSampler,
                           channel: ChannelRep | None = None, method: str = "linear") -> DissipationEstimate:
    if samples < 2:
        raise ValueError("samples must be >= 2")
    psis = sampler.states(model.dim, samples)
    rec = state_records(model, psis, channel, method)
    sig = rec["sigma_phi"]
    return DissipationEstimate(float(np.mean(sig)), float(np.std(sig, ddof=1) / np.sqrt(samples)), samples, rec)
