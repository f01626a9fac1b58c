"""Hamiltonian protocols, jump processes and GKSL time evolution.

The master equation

    d rho/dt = -i[H_t, rho] + sum_c D[L_c(t)] rho,
    D[L] rho = L rho L^dag - {L^dag L, rho}/2

is integrated with fixed-step RK4. Because the equation is linear, each RK4
step is assembled once as a ``d^2 x d^2`` superoperator polynomial and then
applied to any number of initial states. Vectors use row-major
vectorization, ``vec(A X B) = (A kron B^T) vec(X)``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .qcore import (
    ValidationError,
    check_density_matrix,
    check_hermitian,
    check_square,
    dag,
    expm_hermitian,
    fluctuation_sq_batch,
)

Coefficient = Union[float, Callable[[np.ndarray], np.ndarray]]
OperatorSpec = Union[np.ndarray, Callable[[float], np.ndarray]]

DEFAULT_STEPS = 2000
# Snapshot tolerances for stored density matrices.
TRAJ_ATOL = 1e-9
PAIRING_ATOL = 1e-10
_CHUNK = 256


class IntegrationDiverged(RuntimeError):
    pass


def _is_constant(c) -> bool:
    return isinstance(c, (int, float, np.floating, np.integer))


def _eval_coefficient(c: Coefficient, t: np.ndarray) -> np.ndarray:
    if _is_constant(c):
        return np.full(t.shape, float(c))
    val = np.asarray(c(t))
    if np.iscomplexobj(val):
        if np.max(np.abs(val.imag), initial=0.0) > 1e-12:
            raise ValidationError("Hamiltonian coefficient is not real: H_t would be non-Hermitian")
        val = val.real
    return np.broadcast_to(val, t.shape).astype(float)


@dataclass(frozen=True, eq=False)
class HamiltonianProtocol:
    """H_t = sum_k f_k(t) A_k with Hermitian A_k and real coefficients.

    Coefficients are floats or vectorized callables of time.
    """

    terms: tuple
    dim: int
    tag: str = "ideal"

    def __post_init__(self):
        terms = []
        for coef, op in self.terms:
            op = check_hermitian(op, "Hamiltonian term")
            if op.shape != (self.dim, self.dim):
                raise ValidationError(f"Hamiltonian term has shape {op.shape}, expected dim {self.dim}")
            terms.append((coef, op))
        object.__setattr__(self, "terms", tuple(terms))

    @classmethod
    def constant(cls, h, tag: str = "ideal") -> "HamiltonianProtocol":
        h = check_hermitian(h, "H")
        return cls(((1.0, h),), h.shape[0], tag)

    @classmethod
    def zero(cls, dim: int, tag: str = "ideal") -> "HamiltonianProtocol":
        return cls((), dim, tag)

    def same_as(self, other: "HamiltonianProtocol") -> bool:
        if len(self.terms) != len(other.terms):
            return False
        for (c1, a1), (c2, a2) in zip(self.terms, other.terms):
            same_coef = c1 is c2 or (_is_constant(c1) and _is_constant(c2) and c1 == c2)
            if not same_coef or not np.array_equal(a1, a2):
                return False
        return True

    @property
    def time_independent(self) -> bool:
        return all(_is_constant(c) for c, _ in self.terms)

    @property
    def is_zero(self) -> bool:
        return len(self.terms) == 0

    def plus(self, coef: Coefficient, op, tag: str | None = None) -> "HamiltonianProtocol":
        return HamiltonianProtocol(self.terms + ((coef, np.asarray(op, dtype=complex)),),
                                   self.dim, tag or self.tag)

    def evaluate(self, t) -> np.ndarray:
        """H at a scalar time ``(d, d)`` or at an array of times ``(T, d, d)``."""
        t_arr = np.asarray(t, dtype=float)
        out = np.zeros(t_arr.shape + (self.dim, self.dim), dtype=complex)
        for coef, op in self.terms:
            out += _eval_coefficient(coef, t_arr)[..., None, None] * op
        return out


@dataclass(frozen=True, eq=False)
class JumpProcess:
    """One jump operator L_c(t) with entropy weight s_c(t).

    ``partner`` is the index of the detailed-balance partner c' inside the
    owning model's jump list. ``None`` means self-paired for nondissipative
    jumps and unpaired (no detailed balance) for dissipative ones.
    """

    operator: OperatorSpec
    entropy_weight: Coefficient = 0.0
    partner: int | None = None
    kind: str = "nondissipative"
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("dissipative", "nondissipative"):
            raise ValidationError(f"unknown jump kind {self.kind!r}")
        if not callable(self.operator):
            object.__setattr__(self, "operator", check_square(self.operator, "jump operator"))

    @property
    def time_independent(self) -> bool:
        return not callable(self.operator) and _is_constant(self.entropy_weight)

    def at(self, t: float) -> np.ndarray:
        if callable(self.operator):
            return np.asarray(self.operator(float(t)), dtype=complex)
        return self.operator

    def sample(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if not callable(self.operator):
            return np.broadcast_to(self.operator, times.shape + self.operator.shape)
        sampler = getattr(self.operator, "sample", None)
        if sampler is not None:
            return sampler(times)
        return np.stack([np.asarray(self.operator(float(t)), dtype=complex) for t in times])

    def sample_nodes(self, model: "GateModel", sl: slice) -> np.ndarray:
        """Sample at ``model.nodes()[sl]``, reusing cached frame unitaries when possible."""
        op = self.operator
        if isinstance(op, _RotatedOperator) and op.model.tau == model.tau and op.model.steps == model.steps:
            return op.sample_nodes(sl)
        return self.sample(model.nodes()[sl])

    def weight(self, times) -> np.ndarray:
        return _eval_coefficient(self.entropy_weight, np.asarray(times, dtype=float))

    def scaled(self, c: float) -> "JumpProcess":
        op = self.operator
        new = (lambda t: c * op(t)) if callable(op) else c * op
        return dataclasses.replace(self, operator=new)


@dataclass(frozen=True, eq=False)
class GateModel:
    """A gate instance: ideal/implemented protocols, jumps and duration.

    ``implemented`` defaults to ``ideal``. The state evolves under the
    implemented Hamiltonian; the target gate U_g comes from the ideal one.
    """

    ideal: HamiltonianProtocol
    jumps: tuple = ()
    tau: float = 1.0
    steps: int = DEFAULT_STEPS
    implemented: HamiltonianProtocol | None = None
    thermal_relaxation: bool = False
    frame_substeps: int = 4
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "jumps", tuple(self.jumps))
        if self.implemented is None:
            object.__setattr__(self, "implemented", dataclasses.replace(self.ideal, tag="implemented"))
        if not self.tau > 0:
            raise ValidationError("tau must be positive")
        if self.steps < 1 or self.frame_substeps < 1:
            raise ValidationError("steps and frame_substeps must be >= 1")
        if self.implemented.dim != self.ideal.dim:
            raise ValidationError("ideal and implemented protocols differ in dimension")
        validate_pairing(self)
        if self.thermal_relaxation:
            ok, why = thermal_relaxation_check(self)
            if not ok:
                raise ValidationError(f"thermal-relaxation flag refused: {why}")

    @property
    def dim(self) -> int:
        return self.ideal.dim

    @property
    def num_qubits(self) -> int | None:
        n = int(round(math.log2(self.dim)))
        return n if 2 ** n == self.dim else None

    def partner_of(self, c: int) -> int | None:
        j = self.jumps[c]
        if j.partner is None:
            return c if j.kind == "nondissipative" else None
        return j.partner

    @property
    def detailed_balance(self) -> bool:
        return all(self.partner_of(c) is not None for c in range(len(self.jumps)))

    def replace(self, **changes) -> "GateModel":
        return dataclasses.replace(self, **changes)

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.tau, self.steps + 1)

    def nodes(self) -> np.ndarray:
        """RK4 evaluation nodes: every grid point and every half step."""
        return np.linspace(0.0, self.tau, 2 * self.steps + 1)

    @cached_property
    def _node_unitaries_implemented(self) -> np.ndarray:
        return unitary_grid(self.implemented, self.nodes(), self.frame_substeps)

    @cached_property
    def _node_unitaries_ideal(self) -> np.ndarray:
        if self.ideal.same_as(self.implemented):
            return self._node_unitaries_implemented
        return unitary_grid(self.ideal, self.nodes(), self.frame_substeps)

    def node_unitaries(self, which: str = "implemented") -> np.ndarray:
        if which == "implemented":
            return self._node_unitaries_implemented
        if which == "ideal":
            return self._node_unitaries_ideal
        raise ValueError(f"which must be 'ideal' or 'implemented', got {which!r}")

    def unitaries_at(self, times: np.ndarray, which: str = "implemented") -> np.ndarray:
        times = np.asarray(times, dtype=float)
        nodes = self.nodes()
        if times.shape == nodes.shape and np.array_equal(times, nodes):
            return self.node_unitaries(which)
        grid = self.grid()
        if times.shape == grid.shape and np.array_equal(times, grid):
            return self.node_unitaries(which)[::2]
        protocol = self.ideal if which == "ideal" else self.implemented
        h_ref = self.tau / (2 * self.steps * self.frame_substeps)
        return unitary_grid(protocol, times, 1, max_dt=h_ref)

    @property
    def target_unitary(self) -> np.ndarray:
        """U_g, the ideal gate."""
        return self._node_unitaries_ideal[-1]

    @property
    def implemented_unitary(self) -> np.ndarray:
        """U-hat_tau from the implemented protocol."""
        return self._node_unitaries_implemented[-1]


def validate_pairing(model: GateModel, n_random: int = 10) -> None:
    """Check local detailed balance L_c = e^{s_c/2} L_{c'}^dag at sample times."""
    d = model.dim
    rng = np.random.default_rng(12345)
    times = np.concatenate([[0.0, model.tau], model.tau * rng.random(n_random)])
    for c, jump in enumerate(model.jumps):
        if jump.at(0.0).shape != (d, d):
            raise ValidationError(f"jump {c} has wrong dimension")
        p = model.partner_of(c)
        if p is None:
            continue
        if not 0 <= p < len(model.jumps):
            raise ValidationError(f"jump {c} has invalid partner {p}")
        other = model.jumps[p]
        if jump.kind != other.kind:
            raise ValidationError(f"jump {c} and partner {p} differ in kind")
        if _rotated_pair(jump, other):
            continue  # pairing survives the unitary rotation; source model already validated
        for t in times:
            s_c = jump.weight(t)
            s_p = other.weight(t)
            lc, lp = jump.at(t), other.at(t)
            scale = max(1.0, float(np.max(np.abs(lc))))
            if jump.kind == "nondissipative":
                if p != c:
                    raise ValidationError(f"nondissipative jump {c} must be self-paired")
                if abs(s_c) > 0:
                    raise ValidationError(f"nondissipative jump {c} needs zero entropy weight")
                if np.max(np.abs(lc - lc.conj().T)) > PAIRING_ATOL * scale:
                    raise ValidationError(f"nondissipative jump {c} is not Hermitian")
                continue
            if abs(s_c + s_p) > PAIRING_ATOL * max(1.0, abs(s_c)):
                raise ValidationError(f"entropy weights of pair ({c},{p}) are not antisymmetric")
            err = np.max(np.abs(lc - np.exp(s_c / 2) * lp.conj().T))
            if err > PAIRING_ATOL * scale:
                raise ValidationError(
                    f"jumps ({c},{p}) violate local detailed balance at t={t:.4g} (error {err:.2e})")


def _rotated_pair(a: JumpProcess, b: JumpProcess) -> bool:
    ra, rb = a.operator, b.operator
    return (isinstance(ra, _RotatedOperator) and isinstance(rb, _RotatedOperator)
            and ra.model is rb.model and ra.which == rb.which)


def bohr_frequency(h: np.ndarray, op: np.ndarray, atol: float = 1e-9) -> float | None:
    """omega with [H, L] = -omega L, or ``None`` if L is not an eigenoperator."""
    w, v = np.linalg.eigh(h)
    lh = v.conj().T @ op @ v
    gaps = w[:, None] - w[None, :]
    mask = np.abs(lh) > atol * max(1.0, np.max(np.abs(lh)))
    if not mask.any():
        return 0.0
    freqs = -gaps[mask]
    scale = max(1.0, float(np.max(np.abs(w))))
    if np.ptp(freqs) > 1e-7 * scale:
        return None
    return float(np.mean(freqs))


def thermal_relaxation_check(model: GateModel) -> tuple[bool, str]:
    """Structural check for thermal relaxation.

    Requires a time-independent Hamiltonian and jumps; every dissipative jump
    must be an eigenoperator of [H, .] (so it maps energy eigenspaces into
    energy eigenspaces) with one common inverse temperature s_c / omega_c;
    nondissipative jumps must commute with H.
    """
    if not model.implemented.time_independent:
        return False, "Hamiltonian is time dependent"
    if any(not j.time_independent for j in model.jumps):
        return False, "jump operators are time dependent"
    h = model.implemented.evaluate(0.0)
    betas = []
    for c, jump in enumerate(model.jumps):
        omega = bohr_frequency(h, jump.operator)
        if omega is None:
            return False, f"jump {c} does not connect energy eigenstates"
        s = float(jump.weight(0.0))
        if jump.kind == "nondissipative":
            if abs(omega) > 1e-9:
                return False, f"nondissipative jump {c} does not commute with H"
            continue
        if abs(omega) < 1e-12:
            if abs(s) > 1e-12:
                return False, f"jump {c} carries entropy without energy exchange"
            continue
        betas.append(s / omega)
    if betas and np.ptp(betas) > 1e-6 * max(1.0, max(abs(b) for b in betas)):
        return False, "entropy weights are not consistent with a single temperature"
    return True, ""


# --------------------------------------------------------------------------
# unitary propagation
# --------------------------------------------------------------------------


def propagator(protocol: HamiltonianProtocol, t0: float, t1: float, substeps: int = 1000) -> np.ndarray:
    """Time-ordered product of midpoint exponentials exp(-i H_mid dt)."""
    if t1 < t0:
        raise ValueError("propagator requires t0 <= t1")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    d = protocol.dim
    if protocol.is_zero or t1 == t0:
        return np.eye(d, dtype=complex)
    if protocol.time_independent:
        return expm_hermitian(protocol.evaluate(t0), t1 - t0)
    dt = (t1 - t0) / substeps
    mids = t0 + dt * (np.arange(substeps) + 0.5)
    _check_hermitian_stack(protocol.evaluate(mids[[0, -1]]))
    return ordered_product(expm_hermitian(protocol.evaluate(mids), dt))


def ordered_product(factors: np.ndarray) -> np.ndarray:
    """f[n-1] @ ... @ f[1] @ f[0], by pairwise reduction."""
    f = np.asarray(factors)
    while f.shape[0] > 1:
        odd = f[-1:] if f.shape[0] % 2 else None
        f = f[1::2] @ f[0:-1:2] if odd is None else f[1:-1:2] @ f[0:-1:2]
        if odd is not None:
            f = np.concatenate([f, odd])
    return f[0]


def unitary_grid(protocol: HamiltonianProtocol, times: np.ndarray, substeps: int = 4,
                 max_dt: float | None = None) -> np.ndarray:
    """U_t from time 0 at every entry of an ascending time array.

    Each interval between consecutive times (and the lead-in from 0) is split
    into ``substeps`` midpoint exponentials, or more if that leaves a
    substep longer than ``max_dt``.
    """
    times = np.asarray(times, dtype=float)
    d = protocol.dim
    n = times.shape[0]
    if protocol.is_zero:
        return np.broadcast_to(np.eye(d, dtype=complex), (n, d, d)).copy()
    if protocol.time_independent:
        return expm_hermitian(protocol.evaluate(0.0), times)
    edges = np.concatenate([[0.0], times])
    dts = np.diff(edges)
    if np.any(dts < 0):
        raise ValueError("times must be ascending and non-negative")
    counts = np.full(n, substeps)
    if max_dt is not None:
        counts = np.maximum(counts, np.ceil(dts / max_dt).astype(int))
    counts[dts == 0] = 0
    owner = np.repeat(np.arange(n), counts)
    offset = np.arange(owner.size) - np.repeat(np.cumsum(counts) - counts, counts)
    sub_dt = np.where(counts > 0, dts / np.maximum(counts, 1), 0.0)
    mids = edges[owner] + sub_dt[owner] * (offset + 0.5)
    factors = expm_hermitian(protocol.evaluate(mids), sub_dt[owner])
    out = np.empty((n, d, d), dtype=complex)
    u = np.eye(d, dtype=complex)
    pos = 0
    for k in range(n):
        for f in factors[pos:pos + counts[k]]:
            u = f @ u
        pos += counts[k]
        out[k] = u
    # project back onto the unitary group; long products drift by ~1e-12
    w, _, vh = np.linalg.svd(out)
    return w @ vh


def _check_hermitian_stack(h: np.ndarray) -> None:
    if np.max(np.abs(h - dag(h)), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(h), initial=0.0)):
        raise ValidationError("Hamiltonian is not Hermitian at a sample point")


# --------------------------------------------------------------------------
# interaction picture
# --------------------------------------------------------------------------


class _RotatedOperator:
    """t -> U_t^dag L(t) U_t for a model's protocol."""

    def __init__(self, model: GateModel, jump: JumpProcess, which: str):
        self.model = model
        self.jump = jump
        self.which = which

    def __call__(self, t: float) -> np.ndarray:
        m = self.model
        protocol = m.ideal if self.which == "ideal" else m.implemented
        n = max(1, math.ceil(2 * m.steps * m.frame_substeps * t / m.tau))
        u = propagator(protocol, 0.0, t, n)
        return u.conj().T @ self.jump.at(t) @ u

    def sample(self, times: np.ndarray) -> np.ndarray:
        u = self.model.unitaries_at(times, self.which)
        return dag(u) @ self.jump.sample(times) @ u

    def sample_nodes(self, sl: slice) -> np.ndarray:
        u = self.model.node_unitaries(self.which)[sl]
        return dag(u) @ self.jump.sample_nodes(self.model, sl) @ u


def interaction_frame(model: GateModel, which: str = "implemented") -> GateModel:
    """Equivalent model with zero Hamiltonian and rotated jumps U_t^dag L_c U_t."""
    protocol = model.ideal if which == "ideal" else model.implemented
    if protocol.is_zero:
        return model
    jumps = tuple(dataclasses.replace(j, operator=_RotatedOperator(model, j, which)) for j in model.jumps)
    zero = HamiltonianProtocol.zero(model.dim)
    return dataclasses.replace(model, ideal=zero, implemented=dataclasses.replace(zero, tag="implemented"),
                               jumps=jumps, thermal_relaxation=False)


def frame_jumps(model: GateModel, times: np.ndarray, frame: str = "interaction",
                unitaries: np.ndarray | None = None, node_slice: slice | None = None) -> np.ndarray:
    """Jump operators at ``times``, shape ``(C, T, d, d)``, in the chosen frame.

    ``unitaries`` (U_t at ``times``) may be supplied to skip recomputation.
    """
    times = np.asarray(times, dtype=float)
    d = model.dim
    if not model.jumps:
        return np.zeros((0, times.shape[0], d, d), dtype=complex)
    if node_slice is not None:
        ls = np.stack([np.asarray(j.sample_nodes(model, node_slice)) for j in model.jumps])
    else:
        ls = np.stack([np.asarray(j.sample(times)) for j in model.jumps])
    if frame == "interaction" and not model.implemented.is_zero:
        u = model.unitaries_at(times, "implemented") if unitaries is None else unitaries
        ls = dag(u)[None] @ ls @ u[None]
    return ls


def jump_weights(model: GateModel, times: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if not model.jumps:
        return np.zeros((0, times.shape[0]))
    return np.stack([j.weight(times) for j in model.jumps])


# --------------------------------------------------------------------------
# GKSL integration
# --------------------------------------------------------------------------


def _bkron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d1, d2 = a.shape[-1], b.shape[-1]
    out = np.einsum("...ij,...kl->...ikjl", a, b)
    return out.reshape(out.shape[:-4] + (d1 * d2, d1 * d2))


def liouvillian(h: np.ndarray | None, ls: np.ndarray) -> np.ndarray:
    """Row-major superoperator of the GKSL generator.

    ``h``: ``(T, d, d)`` or ``None``; ``ls``: ``(C, T, d, d)``.
    """
    d = ls.shape[-1]
    T = ls.shape[1]
    eye = np.broadcast_to(np.eye(d, dtype=complex), (T, d, d))
    gen = np.zeros((T, d * d, d * d), dtype=complex)
    if h is not None:
        gen += -1j * (_bkron(h, eye) - _bkron(eye, np.swapaxes(h, -1, -2)))
    for lc in ls:
        ldl = dag(lc) @ lc
        gen += _bkron(lc, lc.conj()) - 0.5 * _bkron(ldl, eye) - 0.5 * _bkron(eye, np.swapaxes(ldl, -1, -2))
    return gen


def _rk4_step_maps(a1: np.ndarray, a2: np.ndarray, a3: np.ndarray, h: float) -> np.ndarray:
    """Exact RK4 update matrix for v' = A(t) v with A sampled at t, t+h/2, t+h."""
    n = a1.shape[-1]
    eye = np.eye(n, dtype=complex)
    k1 = a1
    k2 = a2 @ (eye + 0.5 * h * k1)
    k3 = a2 @ (eye + 0.5 * h * k2)
    k4 = a3 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class _RawEvolution:
    states: np.ndarray  # (B, M+1, d, d)
    env_rate: np.ndarray  # (B, M+1), sum_c s_c tr(L rho L^dag)


def integrate(model: GateModel, rho0: np.ndarray, frame: str = "lab") -> _RawEvolution:
    """RK4-integrate a batch ``(B, d, d)`` of arbitrary (even non-Hermitian) matrices."""
    if frame not in ("lab", "interaction"):
        raise ValueError(f"frame must be 'lab' or 'interaction', got {frame!r}")
    d = model.dim
    rho0 = np.asarray(rho0, dtype=complex).reshape(-1, d, d)
    B = rho0.shape[0]
    M = model.steps
    h = model.tau / M
    nodes = model.nodes()
    grid = nodes[::2]

    v = rho0.reshape(B, d * d).copy()
    out = np.empty((B, M + 1, d * d), dtype=complex)
    out[:, 0] = v
    lab = frame == "lab" and not model.implemented.is_zero
    rotate = frame == "interaction" and not model.implemented.is_zero
    node_u = model.node_unitaries("implemented") if rotate else None
    chunk = max(1, min(_CHUNK, 2 ** 22 // d ** 4))
    for start in range(0, M, chunk):
        stop = min(M, start + chunk)
        sl = slice(2 * start, 2 * stop + 1)
        ls = frame_jumps(model, nodes[sl], frame, None if node_u is None else node_u[sl], node_slice=sl)
        hs = model.implemented.evaluate(nodes[sl]) if lab else None
        if hs is not None:
            _check_hermitian_stack(hs[[0, -1]])
        gen = liouvillian(hs, ls)
        maps = _rk4_step_maps(gen[0:-1:2], gen[1::2], gen[2::2], h)
        maps_t = np.swapaxes(maps, -1, -2)
        for k in range(stop - start):
            v = v @ maps_t[k]
            out[:, start + k + 1] = v
        if not np.all(np.isfinite(v)):
            raise IntegrationDiverged(f"non-finite state at step {stop}; increase steps")

    # environment entropy flow integrand on the step grid (frame invariant)
    ls_grid = frame_jumps(model, grid, "lab", node_slice=slice(None, None, 2))
    s = jump_weights(model, grid)
    if ls_grid.shape[0]:
        m_op = np.einsum("ct,ctab->tab", s, dag(ls_grid) @ ls_grid)
        if rotate:
            u = node_u[::2]
            m_op = dag(u) @ m_op @ u
        env = np.einsum("ntij,tji->nt", out.reshape(B, M + 1, d, d), m_op)
    else:
        env = np.zeros((B, M + 1), dtype=complex)
    return _RawEvolution(out.reshape(B, M + 1, d, d), env)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    env_entropy_acc: np.ndarray
    gamma_phi_acc: np.ndarray | None
    frame: str
    initial_state: np.ndarray = field(repr=False, default=None)
    pure_state: np.ndarray | None = field(repr=False, default=None)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def check_trajectory_states(states: np.ndarray, atol: float = TRAJ_ATOL) -> None:
    herm = np.max(np.abs(states - dag(states)))
    tr = np.max(np.abs(np.trace(states, axis1=-2, axis2=-1) - 1.0))
    mineig = np.min(np.linalg.eigvalsh(0.5 * (states + dag(states))))
    if herm > atol or tr > atol or mineig < -atol:
        raise IntegrationDiverged(
            f"density-matrix invariants violated (hermiticity {herm:.1e}, trace {tr:.1e}, "
            f"min eigenvalue {mineig:.1e}); increase steps")


def _pure_vector(rho: np.ndarray) -> np.ndarray | None:
    w, v = np.linalg.eigh(rho)
    if w[-1] > 1 - 1e-10:
        return v[:, -1]
    return None


def gamma_phi_integrand(model: GateModel, psi: np.ndarray, times: np.ndarray | None = None) -> np.ndarray:
    """sum_c (delta_phi L~_c(t))^2 on the grid, interaction-picture operators.

    ``psi`` may be one state ``(d,)`` or a batch ``(n, d)``.
    """
    times = model.grid() if times is None else times
    psis = np.atleast_2d(psi)
    ls = frame_jumps(model, times, "interaction")
    if ls.shape[0] == 0:
        out = np.zeros((psis.shape[0], len(times)))
    else:
        out = fluctuation_sq_batch(ls, psis).sum(axis=1)
    return out if np.ndim(psi) == 2 else out[0]


def lindblad_evolve(model: GateModel, rho0, frame: str = "lab") -> Trajectory:
    """Integrate the GKSL equation from a density matrix (or pure state vector)."""
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    rho0 = check_density_matrix(rho0, model.dim)
    raw = integrate(model, rho0[None], frame)
    states = raw.states[0]
    check_trajectory_states(states)
    times = model.grid()
    env_acc = cumulative_trapezoid(raw.env_rate[0].real, times, initial=0.0)
    psi = _pure_vector(rho0)
    gacc = None
    if psi is not None:
        gacc = cumulative_trapezoid(gamma_phi_integrand(model, psi, times), times, initial=0.0)
    return Trajectory(times, states, env_acc, gacc, frame, rho0, psi)


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (a + a.conj().T)


def random_detailed_balance_model(d: int, rng: np.random.Generator, *, n_pairs: int = 2,
                                  n_dephasing: int = 1, rate: float = 0.3, tau: float = 1.0,
                                  steps: int = 400, driven: bool = False) -> GateModel:
    """Random Hamiltonian plus synthetic detailed-balance jump pairs."""
    h0 = random_hermitian(d, rng, 0.5)
    terms = [(1.0, h0)]
    if driven:
        h1 = random_hermitian(d, rng, 0.5)
        w = 2 * np.pi / tau
        terms.append((lambda t, w=w: np.sin(w * t), h1))
    protocol = HamiltonianProtocol(tuple(terms), d)
    jumps: list[JumpProcess] = []
    for _ in range(n_pairs):
        a = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) * np.sqrt(rate / d)
        s = float(rng.uniform(-2, 2))
        i = len(jumps)
        jumps.append(JumpProcess(a, s, i + 1, "dissipative"))
        jumps.append(JumpProcess(np.exp(-s / 2) * a.conj().T, -s, i, "dissipative"))
    for _ in range(n_dephasing):
        jumps.append(JumpProcess(random_hermitian(d, rng, np.sqrt(rate / d))))
    return GateModel(protocol, tuple(jumps), tau, steps)


def model_from_jumps(h, jumps: Sequence[JumpProcess], tau: float, steps: int = DEFAULT_STEPS,
                     **kw) -> GateModel:
    """Convenience constructor for a constant Hamiltonian."""
    h = np.asarray(h, dtype=complex)
    return GateModel(HamiltonianProtocol.constant(h), tuple(jumps), tau, steps, **kw)
