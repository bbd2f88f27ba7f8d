"""Dense complex linear algebra and brute-force classical oracles.

Every quantum-side construction in the package is validated against the
plain matrix computations in this module.  Matrices and vectors are numpy
arrays; inputs are coerced to ``complex128``.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, SingularityError, SymmetryError, ValidationError

HERMITIAN_TOL = 1e-10


def as_matrix(M, *, square: bool = False) -> np.ndarray:
    """Coerce to a finite 2-D complex array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("matrix has non-finite entries")
    return A


def as_vector(v) -> np.ndarray:
    """Coerce to a finite 1-D complex array."""
    x = np.asarray(v, dtype=complex)
    if x.ndim != 1:
        raise ShapeError(f"expected a 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("vector has non-finite entries")
    return x


def hermitian_defect(M) -> float:
    """Max-entry deviation ``‖M − M†‖_max``."""
    A = np.asarray(M)
    return float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0


def check_hermitian(M, tol: float = HERMITIAN_TOL) -> np.ndarray:
    A = as_matrix(M, square=True)
    defect = hermitian_defect(A)
    if defect > tol:
        raise SymmetryError(f"matrix is not Hermitian: ‖M − M†‖_max = {defect:.3e} > {tol:.1e}")
    return A


def phase_fix(v: np.ndarray) -> complex:
    """Unit phase that makes the largest-magnitude entry of ``v`` real positive.

    Ties within 1e-12 go to the lowest index so the choice is deterministic.
    """
    mags = np.abs(v)
    top = mags.max()
    if top == 0.0:
        return 1.0 + 0j
    idx = int(np.argmax(mags >= top - 1e-12))
    return np.conj(v[idx]) / mags[idx]


def _fix_columns(V: np.ndarray) -> np.ndarray:
    V = V.copy()
    for j in range(V.shape[1]):
        V[:, j] *= phase_fix(V[:, j])
    return V


def jacobi_eigh(M, *, tol: float = 1e-14, max_sweeps: int = 100):
    """Cyclic Jacobi eigendecomposition of a Hermitian matrix.

    Each rotation first removes the phase of the pivot entry, then applies a
    real Givens rotation.  Returns unsorted ``(values, vectors)``.
    """
    A = np.array(M, dtype=complex)
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                d = np.conj(apq) / mag
                tau = (A[q, q].real - A[p, p].real) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                G = np.array([[c, s], [-s * d, c * d]], dtype=complex)
                idx = [p, q]
                A[:, idx] = A[:, idx] @ G
                A[idx, :] = G.conj().T @ A[idx, :]
                V[:, idx] = V[:, idx] @ G
    return np.real(np.diag(A)).copy(), V


def hermitian_eig(M, *, tol: float = HERMITIAN_TOL, method: str = "lapack"):
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(values, vectors)`` with values sorted descending and each
    eigenvector column phase-fixed.  ``method="jacobi"`` uses the in-house
    cyclic Jacobi solver instead of LAPACK.
    """
    A = check_hermitian(M, tol)
    A = 0.5 * (A + A.conj().T)
    if method == "lapack":
        w, V = np.linalg.eigh(A)
    elif method == "jacobi":
        w, V = jacobi_eigh(A)
    else:
        raise ValidationError(f"unknown eigensolver method {method!r}")
    order = np.argsort(-w, kind="stable")
    return w[order], _fix_columns(V[:, order])


def svd(M, *, full_matrices: bool = False):
    """Singular value decomposition ``M = U·diag(s)·V†``.

    Singular values are descending.  Each pair ``(u_i, v_i)`` is rotated by a
    common phase so ``u_i``'s largest entry is real positive.
    """
    A = as_matrix(M)
    U, s, Vh = np.linalg.svd(A, full_matrices=full_matrices)
    V = Vh.conj().T
    U = U.copy()
    V = V.copy()
    for j in range(min(U.shape[1], V.shape[1], len(s))):
        ph = phase_fix(U[:, j])
        U[:, j] *= ph
        V[:, j] *= ph
    return U, s, V


def spectral_norm(M) -> float:
    A = np.asarray(M, dtype=complex)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def expm_oracle(H, t: float) -> np.ndarray:
    """``exp(−iHt)`` by eigendecomposition."""
    w, V = hermitian_eig(H)
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def inverse_oracle(A) -> np.ndarray:
    M = as_matrix(A, square=True)
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[-1] <= 1e-12:
        raise SingularityError("matrix is singular (σ_min ≤ 1e-12)")
    return np.linalg.solve(M, np.eye(M.shape[0], dtype=complex))


def cond_number(A) -> float:
    """``σ_max/σ_min``; infinite for singular input."""
    M = as_matrix(A, square=True)
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def partial_trace_first(psi, split: int) -> np.ndarray:
    """Reduced density matrix after tracing out the first ``split``-dim register."""
    x = as_vector(psi)
    if split < 1 or x.size % split:
        raise ShapeError(f"dimension {x.size} does not factor with first register {split}")
    block = x.reshape(split, x.size // split)
    return block.T @ block.conj()


def normalize(v) -> np.ndarray:
    x = as_vector(v)
    nrm = np.linalg.norm(x)
    if nrm == 0.0:
        raise ValidationError("cannot normalize the zero vector")
    return x / nrm


def overlap(u, v) -> float:
    """``|⟨u, v⟩|`` for unit vectors (fidelity without the square)."""
    return float(abs(np.vdot(as_vector(u), as_vector(v))))


def random_unitary(rng: np.random.Generator, n: int, *, real: bool = False) -> np.ndarray:
    """Haar-distributed unitary (orthogonal if ``real``) via QR."""
    Z = rng.standard_normal((n, n))
    if not real:
        Z = Z + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_hermitian(rng: np.random.Generator, n: int, *, real: bool = False) -> np.ndarray:
    Z = rng.standard_normal((n, n))
    if not real:
        Z = Z + 1j * rng.standard_normal((n, n))
    return 0.5 * (Z + Z.conj().T)


def planted_hermitian(rng: np.random.Generator, spectrum, *, real: bool = False) -> np.ndarray:
    """Hermitian matrix ``V·diag(spectrum)·V†`` with a random eigenbasis."""
    lam = np.asarray(spectrum, dtype=float)
    V = random_unitary(rng, lam.size, real=real)
    H = (V * lam) @ V.conj().T
    return 0.5 * (H + H.conj().T)
