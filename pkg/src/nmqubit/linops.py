"""Matrix and superoperator algebra for small open quantum systems.

Vectorization is column-stacking throughout the package. For a 2x2 matrix

    X = [[a, b],
         [c, d]]      vec(X) = [a, c, b, d]

so that vec(A @ X @ B) = kron(B.T, A) @ vec(X). A superoperator is stored as
the d^2 x d^2 matrix acting on vec(X).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, SingularPropagatorError

HERMITIAN_ATOL = 1e-10
PSD_THRESHOLD = -1e-10
DEFAULT_COND_BOUND = 1e12

_PAULI = (
    np.array([[1, 0], [0, 1]], dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def pauli(alpha: int) -> np.ndarray:
    """Return sigma_alpha, with sigma_0 the 2x2 identity."""
    if not isinstance(alpha, (int, np.integer)) or not 0 <= alpha <= 3:
        raise InvalidArgumentError(f"Pauli index must be 0..3, got {alpha!r}")
    return _PAULI[alpha].copy()


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    return v.reshape((d, d), order="F")


def is_hermitian(m: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.allclose(m, m.conj().T, rtol=0, atol=atol)


def _require_hermitian(m, what="matrix"):
    m = np.asarray(m, dtype=complex)
    if not is_hermitian(m):
        raise InvalidArgumentError(f"{what} is not Hermitian")
    return m


def density_matrix(entries, atol: float = 1e-12) -> np.ndarray:
    """Validate and return a density matrix (Hermitian, unit trace, PSD)."""
    rho = np.array(entries, dtype=complex)
    if not is_hermitian(rho, atol=atol):
        raise InvalidArgumentError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise InvalidArgumentError(f"density matrix has trace {np.trace(rho).real:.3g}")
    if np.linalg.eigvalsh(rho)[0] < PSD_THRESHOLD:
        raise InvalidArgumentError("density matrix has a negative eigenvalue")
    return rho


def trace_norm(m: np.ndarray) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    m = _require_hermitian(m)
    return float(np.abs(np.linalg.eigvalsh(m)).sum())


def min_eigenvalue(m: np.ndarray) -> float:
    m = _require_hermitian(m)
    # symmetrize so round-off in the input cannot leak an imaginary part
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


@dataclass(frozen=True)
class Superoperator:
    """Linear map on d x d matrices in the column-stacking basis."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        n = m.shape[0]
        d = int(round(np.sqrt(n)))
        if m.ndim != 2 or m.shape[1] != n or d * d != n:
            raise InvalidArgumentError(f"superoperator matrix must be d^2 x d^2, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)

    __call__ = apply

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        return compose(self, other)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.matrix + other.matrix)

    def __sub__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.matrix - other.matrix)

    def __mul__(self, c) -> "Superoperator":
        return Superoperator(c * self.matrix)

    __rmul__ = __mul__

    def is_trace_preserving(self, atol: float = 1e-10) -> bool:
        vid = vec(np.eye(self.dim))
        return np.allclose(vid @ self.matrix, vid, rtol=0, atol=atol)

    def is_hermiticity_preserving(self, atol: float = 1e-10) -> bool:
        d = self.dim
        for a in range(d):
            for b in range(a, d):
                e = np.zeros((d, d), dtype=complex)
                e[a, b] = e[b, a] = 1.0
                f = np.zeros((d, d), dtype=complex)
                if a != b:
                    f[a, b], f[b, a] = -1j, 1j
                for x in (e, f):
                    if not is_hermitian(self.apply(x), atol=atol):
                        return False
        return True

    def is_completely_positive(self, threshold: float = PSD_THRESHOLD) -> bool:
        return min_eigenvalue(choi_of(self)) >= threshold


def identity_superop(d: int = 2) -> Superoperator:
    return Superoperator(np.eye(d * d, dtype=complex))


def conjugation_superop(u: np.ndarray, atol: float = 1e-12) -> Superoperator:
    """Superoperator of rho -> U rho U^dagger."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise InvalidArgumentError("U must be square")
    if not np.allclose(u @ u.conj().T, np.eye(u.shape[0]), rtol=0, atol=atol):
        raise InvalidArgumentError("U is not unitary")
    return Superoperator(np.kron(u.conj(), u))


def sandwich_superop(a: np.ndarray, b: np.ndarray) -> Superoperator:
    """Superoperator of X -> A X B."""
    return Superoperator(np.kron(np.asarray(b).T, np.asarray(a)))


def commutator_superop(h: np.ndarray) -> Superoperator:
    """Superoperator of X -> -i [H, X] (hbar = 1)."""
    h = np.asarray(h, dtype=complex)
    eye = np.eye(h.shape[0])
    return Superoperator(-1j * (np.kron(eye, h) - np.kron(h.T, eye)))


def dissipator_superop(op: np.ndarray) -> Superoperator:
    """Superoperator of X -> L X L^dagger - (1/2){L^dagger L, X}."""
    op = np.asarray(op, dtype=complex)
    eye = np.eye(op.shape[0])
    ldl = op.conj().T @ op
    return Superoperator(np.kron(op.conj(), op) - 0.5 * np.kron(eye, ldl) - 0.5 * np.kron(ldl.T, eye))


def choi_of(s: Superoperator) -> np.ndarray:
    """Unnormalized Choi matrix sum_ij |i><j| (x) S(|i><j|), ancilla factor first.

    S is completely positive iff the result is positive semidefinite, and
    trace preserving iff its partial trace over the output is the identity.
    """
    d = s.dim
    choi = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            choi[i * d:(i + 1) * d, j * d:(j + 1) * d] = s.apply(e)
    return choi


def partial_trace_output(choi: np.ndarray, d: int) -> np.ndarray:
    """Trace out the output factor of a Choi matrix built by `choi_of`."""
    return np.trace(choi.reshape(d, d, d, d), axis1=1, axis2=3)


def kraus_of(s: Superoperator, tol: float = 1e-12) -> list[np.ndarray]:
    """Kraus operators of a CP map from the eigendecomposition of its Choi matrix."""
    d = s.dim
    w, v = np.linalg.eigh(choi_of(s))
    if w[0] < -1e-9:
        raise InvalidArgumentError("map is not completely positive")
    return [np.sqrt(lam) * v[:, k].reshape(d, d).T for k, lam in enumerate(w) if lam > tol]


def compose(a: Superoperator, b: Superoperator) -> Superoperator:
    """A after B."""
    if a.dim != b.dim:
        raise InvalidArgumentError("dimension mismatch")
    return Superoperator(a.matrix @ b.matrix)


def invert(a: Superoperator, cond_bound: float = DEFAULT_COND_BOUND) -> Superoperator:
    cond = np.linalg.cond(a.matrix)
    if not np.isfinite(cond) or cond > cond_bound:
        raise SingularPropagatorError(f"propagator is singular or ill-conditioned (cond={cond:.3g})")
    return Superoperator(np.linalg.inv(a.matrix))


def extend(s: Superoperator, k: int) -> np.ndarray:
    """Matrix of I_k (x) S acting on vec of (k*d) x (k*d) operators, ancilla first."""
    d = s.dim
    n = k * d
    # build by action on matrix units; small dimensions only
    out = np.zeros((n * n, n * n), dtype=complex)
    for col in range(n * n):
        x = np.zeros(n * n, dtype=complex)
        x[col] = 1.0
        out[:, col] = vec(apply_extended(s, unvec(x, n), k))
    return out


def apply_extended(s: Superoperator, x: np.ndarray, k: int) -> np.ndarray:
    """(I_k (x) S)[X] for X on C^k (x) C^d."""
    d = s.dim
    x = np.asarray(x, dtype=complex)
    if x.shape != (k * d, k * d):
        raise InvalidArgumentError(f"operator must be {k * d}x{k * d}, got {x.shape}")
    blocks = x.reshape(k, d, k, d).transpose(0, 2, 1, 3)
    out = np.empty_like(blocks)
    for i in range(k):
        for j in range(k):
            out[i, j] = s.apply(blocks[i, j])
    return out.transpose(0, 2, 1, 3).reshape(k * d, k * d)


def pauli_channel(p) -> Superoperator:
    """rho -> sum_alpha p_alpha sigma_alpha rho sigma_alpha."""
    m = sum(p[a] * np.kron(_PAULI[a].conj(), _PAULI[a]) for a in range(4))
    return Superoperator(m)


def pauli_diagonal_superop(eigenvalues) -> Superoperator:
    """Map with sigma_alpha -> eigenvalues[alpha] * sigma_alpha."""
    m = sum(0.5 * eigenvalues[a] * np.outer(vec(_PAULI[a]), vec(_PAULI[a]).conj()) for a in range(4))
    return Superoperator(m)
