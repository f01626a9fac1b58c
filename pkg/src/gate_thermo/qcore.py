"""Dense matrix utilities, Haar sampling and Haar-average identities.

Everything here works on plain ``numpy`` arrays. Operators are ``(d, d)``
complex arrays, pure states are length-``d`` complex vectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.linalg

# Validation tolerance for Hermiticity / unitarity checks.
VALIDATION_ATOL = 1e-9

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma_minus lowers |1> (excited) to |0>.
SM = np.array([[0, 1], [0, 0]], dtype=complex)
SP = SM.conj().T.copy()

PAULIS = {"I": I2, "X": SX, "Y": SY, "Z": SZ}


class ValidationError(ValueError):
    """Input array fails a structural requirement (shape, Hermiticity, ...)."""


def kron(*ops: np.ndarray) -> np.ndarray:
    return reduce(np.kron, ops)


def pauli_string(label: str) -> np.ndarray:
    """Tensor product of Pauli matrices, e.g. ``pauli_string("ZI")``."""
    return kron(*(PAULIS[c] for c in label.upper()))


def dag(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2).conj()


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dag(a))


# --------------------------------------------------------------------------
# input validation helpers
# --------------------------------------------------------------------------


def check_square(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


def check_hermitian(a, name: str = "matrix", atol: float = VALIDATION_ATOL) -> np.ndarray:
    a = check_square(a, name)
    if np.max(np.abs(a - a.conj().T)) > atol:
        raise ValidationError(f"{name} is not Hermitian within {atol:g}")
    return a


def check_unitary(u, name: str = "matrix", atol: float = VALIDATION_ATOL) -> np.ndarray:
    u = check_square(u, name)
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > atol:
        raise ValidationError(f"{name} is not unitary within {atol:g} (deviation {err:.2e})")
    return u


def check_pure_state(psi, dim: int | None = None, atol: float = 1e-12) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if dim is not None and psi.shape[0] != dim:
        raise ValidationError(f"state has dimension {psi.shape[0]}, expected {dim}")
    if abs(np.vdot(psi, psi).real - 1.0) > atol:
        raise ValidationError("state is not normalized")
    return psi


def check_density_matrix(rho, dim: int | None = None, clip: float = 1e-12) -> np.ndarray:
    """Validate a density matrix.

    Eigenvalues in ``[-clip, 0)`` are treated as round-off: they are clipped
    and the matrix renormalized. Anything more negative is rejected.
    """
    rho = check_hermitian(rho, "density matrix")
    if dim is not None and rho.shape[0] != dim:
        raise ValidationError(f"density matrix has dimension {rho.shape[0]}, expected {dim}")
    rho = hermitize(rho)
    if abs(np.trace(rho).real - 1.0) > VALIDATION_ATOL:
        raise ValidationError("density matrix does not have unit trace")
    w, v = np.linalg.eigh(rho)
    if w[0] < -clip:
        raise ValidationError(f"density matrix has negative eigenvalue {w[0]:.3e}")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        w /= w.sum()
        rho = (v * w) @ v.conj().T
    return rho


# --------------------------------------------------------------------------
# Haar sampling
# --------------------------------------------------------------------------


@dataclass
class HaarSampler:
    """Seeded source of Haar-random pure states.

    Identical seeds give identical draw sequences. ``counter`` counts states
    drawn so far.
    """

    seed: int
    counter: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._rng = np.random.default_rng(np.random.SeedSequence(self.seed))

    def spawn(self, index: int) -> "HaarSampler":
        """Independent child sampler, e.g. one per worker or sweep point."""
        child = HaarSampler(self.seed)
        child._rng = np.random.default_rng(np.random.SeedSequence([self.seed, index]))
        return child

    def states(self, dim: int, n: int) -> np.ndarray:
        """Draw ``n`` states at once, shape ``(n, dim)``."""
        if dim < 1:
            raise ValidationError(f"invalid dimension {dim}")
        z = self._rng.standard_normal((n, dim, 2))
        psi = z[..., 0] + 1j * z[..., 1]
        psi /= np.linalg.norm(psi, axis=1, keepdims=True)
        self.counter += n
        return psi


def haar_state(dim: int, sampler: HaarSampler) -> np.ndarray:
    """One Haar-random pure state (normalized complex Gaussian vector)."""
    return sampler.states(dim, 1)[0]


def haar_pair_average(x: np.ndarray, y: np.ndarray) -> complex:
    """Haar average of <phi|X|phi><phi|Y|phi> = (tr XY + tr X tr Y) / (d(d+1))."""
    x = check_square(x, "X")
    y = check_square(y, "Y")
    if x.shape != y.shape:
        raise ValidationError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = x.shape[0]
    return complex((np.trace(x @ y) + np.trace(x) * np.trace(y)) / (d * (d + 1)))


# --------------------------------------------------------------------------
# norms and spectral helpers
# --------------------------------------------------------------------------


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value, via the top eigenvalue of A^dagger A.

    Accepts a stack of matrices as well.
    """
    a = np.asarray(a, dtype=complex)
    w = np.linalg.eigvalsh(dag(a) @ a)
    return np.sqrt(np.clip(w[..., -1], 0.0, None))


def fluctuation(op: np.ndarray, psi: np.ndarray) -> float:
    """delta_phi L = sqrt(<L^dag L> - |<L>|^2) for a pure state.

    Computed as the norm of (L - <L>)|phi> to avoid cancellation. It never
    exceeds the spectral norm of ``[L, |phi><phi|]``, which is
    max(delta_phi L, delta_phi L^dag); the two agree for normal L.
    """
    op = check_square(op, "L")
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.shape[0] != op.shape[0]:
        raise ValidationError("operator and state dimensions differ")
    lpsi = op @ psi
    resid = lpsi - np.vdot(psi, lpsi) * psi
    return float(np.linalg.norm(resid))


def fluctuation_sq_batch(ops: np.ndarray, psis: np.ndarray) -> np.ndarray:
    """Squared fluctuations for every (operator, state) pair.

    ``ops`` has shape ``(..., d, d)``, ``psis`` shape ``(n, d)``. Result has
    shape ``(n, ...)``.
    """
    lpsi = np.einsum("...ab,nb->n...a", ops, psis)
    mean = np.einsum("na,n...a->n...", psis.conj(), lpsi)
    extra = (1,) * (lpsi.ndim - 2)
    resid = lpsi - mean[..., None] * psis.reshape(psis.shape[0], *extra, psis.shape[1])
    return np.sum(np.abs(resid) ** 2, axis=-1)


def variance_sq(op: np.ndarray) -> np.ndarray:
    """[Delta L]^2 = (d tr L^dag L - |tr L|^2) / (d(d+1)); stacks allowed."""
    op = np.asarray(op, dtype=complex)
    d = op.shape[-1]
    fro = np.sum(np.abs(op) ** 2, axis=(-2, -1))
    tr = np.trace(op, axis1=-2, axis2=-1)
    return np.clip((d * fro - np.abs(tr) ** 2) / (d * (d + 1)), 0.0, None)


def von_neumann_entropy(rho: np.ndarray, floor: float = 1e-14) -> np.ndarray:
    """S = -tr rho ln rho in nats; eigenvalues below ``floor`` contribute 0."""
    w = np.linalg.eigvalsh(hermitize(np.asarray(rho, dtype=complex)))
    safe = np.where(w > floor, w, 1.0)
    return -np.sum(np.where(w > floor, w * np.log(safe), 0.0), axis=-1)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    w = np.linalg.eigvalsh(hermitize(a - b))
    return 0.5 * float(np.sum(np.abs(w)))


def expm_hermitian(h: np.ndarray, dt) -> np.ndarray:
    """exp(-i H dt) for a Hermitian matrix or a stack of them."""
    w, v = np.linalg.eigh(hermitize(h))
    phase = np.exp(-1j * w * np.asarray(dt)[..., None])
    return (v * phase[..., None, :]) @ dag(v)


def principal_log_unitary(u: np.ndarray) -> np.ndarray:
    """Hermitian H' with exp(-i H') = U and eigenvalues in (-pi, pi].

    A complex Schur form of a normal matrix is diagonal with a unitary basis,
    which also handles degenerate eigenphases.
    """
    u = check_unitary(u, "U")
    t, z = scipy.linalg.schur(u, output="complex")
    lam = np.diag(t)
    h = -np.angle(lam)
    h = np.where(h <= -np.pi + 1e-12, np.pi, h)
    return hermitize((z * h) @ z.conj().T)
