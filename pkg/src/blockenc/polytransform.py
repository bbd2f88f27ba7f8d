"""Polynomial functional calculus on block encodings.

Polynomials live in the Chebyshev-T basis on [−1, 1].  Each builder starts
at the degree given by the relevant complexity formula (constant 1, logs
base 2), certifies the sup error on a 2001-point grid and escalates the
degree if the formula degree falls short, recording the escalation factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dct
from scipy.special import jv

from . import encoding as enc
from . import numerics as nx
from .encoding import BlockEncoding
from .errors import ApproximationError, DomainError, ParityError, SpectrumError

GRID = np.linspace(-1.0, 1.0, 2001)
MAX_ESCALATION = 64.0
HERMITIAN_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PolySpec:
    """Chebyshev-series polynomial with a certified sup error.

    ``qsvt_scale`` is the factor the polynomial must be divided by to satisfy
    the ``|P| ≤ 1/2`` transform precondition (1 when already satisfied);
    ``escalation`` is ``degree / degree_bound``.
    """

    cheb_coeffs: np.ndarray
    degree: int
    sup_error: float
    target: str
    degree_bound: int
    escalation: float
    max_abs: float
    qsvt_scale: float

    def __call__(self, x):
        return C.chebval(np.asarray(x, dtype=float), self.cheb_coeffs)


def _finish(coeffs, f_grid, target, d0, grid=GRID) -> PolySpec:
    coeffs = np.asarray(coeffs, dtype=complex)
    vals = C.chebval(grid, coeffs)
    err = float(np.max(np.abs(vals - f_grid)))
    max_abs = float(np.max(np.abs(C.chebval(GRID, coeffs))))
    deg = len(coeffs) - 1
    return PolySpec(
        cheb_coeffs=coeffs,
        degree=deg,
        sup_error=err,
        target=target,
        degree_bound=int(d0),
        escalation=deg / d0 if d0 > 0 else 1.0,
        max_abs=max_abs,
        qsvt_scale=max(1.0, 2.0 * max_abs),
    )


def chebyshev_interpolate(f: Callable[[np.ndarray], np.ndarray], d: int) -> np.ndarray:
    """Degree-``d`` Chebyshev interpolant of a real ``f`` at first-kind nodes.

    Same result as ``numpy.polynomial.chebyshev.chebinterpolate`` but through
    a DCT, so high degrees stay cheap.
    """
    n = d + 1
    x = np.cos(np.pi * (np.arange(n) + 0.5) / n)
    c = dct(np.asarray(f(x), dtype=float), type=2) / n
    c[0] /= 2.0
    return c


def _next_degree(d: int, d0: int) -> int:
    return d + max(1, int(math.ceil(0.25 * max(d0, 1))))


def fit_chebyshev(
    f: Callable[[np.ndarray], np.ndarray],
    d0: int,
    eps: float,
    target: str,
    *,
    grid: np.ndarray = GRID,
    max_factor: float = MAX_ESCALATION,
) -> PolySpec:
    """Interpolate ``f`` at Chebyshev nodes, escalating degree until the grid error ≤ ``eps``."""
    d0 = max(int(d0), 1)
    d = d0
    f_grid = f(grid)
    while True:
        coeffs = chebyshev_interpolate(lambda x: np.real(f(x)), d)
        if np.iscomplexobj(f_grid):
            coeffs = coeffs + 1j * chebyshev_interpolate(lambda x: np.imag(f(x)), d)
        spec = _finish(coeffs, f_grid, target, d0, grid)
        if spec.sup_error <= eps:
            return spec
        d = _next_degree(d, d0)
        if d > max_factor * d0:
            raise ApproximationError(
                f"{target}: degree {d} exceeds {max_factor:g}× the bound {d0} "
                f"(best grid error {spec.sup_error:.3e} > {eps:.1e})"
            )


def _check_eps(eps: float):
    if not 0 < eps <= 0.5:
        raise DomainError(f"eps must lie in (0, 1/2], got {eps}")


def exp_filter_degree(beta: float, eps: float) -> int:
    L = math.log2(1.0 / eps)
    return max(1, int(math.ceil(math.sqrt(max(beta, L) * L))))


def exp_filter_poly(beta: float, eps: float) -> PolySpec:
    """Polynomial approximating ``e^{−β(1−x)}`` on [−1, 1] within ``eps``."""
    _check_eps(eps)
    if beta < 0:
        raise DomainError(f"beta must be nonnegative, got {beta}")
    d0 = exp_filter_degree(beta, eps)
    return fit_chebyshev(lambda x: np.exp(-beta * (1.0 - x)), d0, eps, f"exp_filter(beta={beta:g})")


def jacobi_anger_degree(t: float, eps: float) -> int:
    if t == 0:
        return 0
    L = math.log2(1.0 / eps)
    return max(1, int(math.ceil(t + L / math.log2(math.e + L / t))))


def jacobi_anger_poly(t: float, eps: float, *, max_factor: float = MAX_ESCALATION) -> PolySpec:
    """Truncated Jacobi-Anger series for ``e^{−ixt}`` with grid error ≤ ``eps``.

    ``e^{−ixt} = J₀(t) + 2Σ_{k≥1} (−i)^k J_k(t) T_k(x)``; even terms form the
    cosine part and odd terms the sine part.
    """
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    _check_eps(eps)
    target = f"jacobi_anger(t={t:g})"
    f_grid = np.exp(-1j * GRID * t)
    if t == 0:
        return _finish([1.0], f_grid, target, 1)
    d0 = jacobi_anger_degree(t, eps)
    d = d0
    while True:
        k = np.arange(d + 1)
        coeffs = 2.0 * (-1j) ** k * jv(k, t)
        coeffs[0] = jv(0, t)
        spec = _finish(coeffs, f_grid, target, d0)
        if spec.sup_error <= eps:
            # cap applies to the real cosine and sine parts separately
            ev = C.chebval(GRID, np.where(k % 2 == 0, coeffs, 0))
            od = C.chebval(GRID, np.where(k % 2 == 1, coeffs, 0))
            part_max = max(np.max(np.abs(ev)), np.max(np.abs(od)))
            return PolySpec(
                spec.cheb_coeffs, spec.degree, spec.sup_error, target, d0, spec.escalation,
                spec.max_abs, max(1.0, 2.0 * float(part_max)),
            )
        d = _next_degree(d, d0)
        if d > max_factor * d0:
            raise ApproximationError(
                f"{target}: degree {d} exceeds {max_factor:g}× the bound {d0} "
                f"(grid error {spec.sup_error:.3e} > {eps:.1e})"
            )


def _hermitian_eig(E: BlockEncoding, what: str):
    defect = nx.hermitian_defect(E.encoded)
    if defect > HERMITIAN_TOL + E.eps:
        raise ParityError(f"{what} needs a Hermitian encoding (‖A − A†‖_max = {defect:.2e})")
    A = 0.5 * (E.encoded + E.encoded.conj().T)
    return nx.hermitian_eig(A, tol=np.inf)


def _qsvt_ledger(E: BlockEncoding, P: PolySpec, lemma: str):
    led = E.ledger.scaled(max(P.degree, 1)).tally(lemma)
    if P.qsvt_scale > 1.0:
        led = led.tally("qsvt_rescale")
    return led


def _qsvt_eps(E: BlockEncoding, P: PolySpec) -> float:
    tracked = 4.0 * max(P.degree, 1) * math.sqrt(E.eps / E.alpha) if E.eps > 0 else 0.0
    return tracked + P.sup_error


def apply_poly(E: BlockEncoding, P: PolySpec) -> BlockEncoding:
    """Encoding of ``P(A)`` for Hermitian encoded ``A`` (eigenvalue calculus)."""
    w, V = _hermitian_eig(E, "apply_poly")
    vals = P(np.clip(w, -1.0, 1.0))
    M = (V * vals) @ V.conj().T
    return BlockEncoding(M, 1.0, E.ancillas + 2, _qsvt_eps(E, P), _qsvt_ledger(E, P, "qsvt"), "qsvt")


def apply_poly_singular(E: BlockEncoding, P: PolySpec) -> BlockEncoding:
    """Encoding of ``W·P(Σ)·V†`` for a general encoded ``A = WΣV†``.

    Idealized singular-value transform: ``P`` is applied to every singular
    value of the full square SVD, including zeros, with no parity check.
    """
    W, s, V = nx.svd(E.encoded, full_matrices=True)
    vals = P(np.clip(s, 0.0, 1.0))
    M = (W * vals) @ V.conj().T
    return BlockEncoding(M, 1.0, E.ancillas + 2, _qsvt_eps(E, P), _qsvt_ledger(E, P, "qsvt"), "qsvt")


def _completion(u: np.ndarray) -> np.ndarray:
    """Unitary whose first column is the unit vector ``u``."""
    n = u.size
    Q, _ = np.linalg.qr(np.column_stack([u, np.eye(n, dtype=complex)]))
    Q = Q[:, :n].copy()
    Q[:, 0] = u
    return Q


def rank1_transform(u, v, sigma: float, P: PolySpec, source: enc.CostLedger, *, ancillas: int = 2) -> BlockEncoding:
    """Singular-value transform of the rank-1 operator ``σ|u⟩⟨v|``.

    Agrees with :func:`apply_poly_singular` on an encoding of ``σ u v†`` up to
    the (arbitrary) basis of the zero singular subspace, but is built from the
    factors, so ``σ`` may be far below the floating-point range of the dense
    product.  The zero singular values map to ``P(0)``.
    ``source`` is the ledger of the rank-1 encoding.
    """
    u = nx.normalize(u)
    v = nx.normalize(v)
    W = _completion(u)
    V = _completion(v)
    M = complex(P(sigma)) * np.outer(u, v.conj()) + complex(P(0.0)) * (W[:, 1:] @ V[:, 1:].conj().T)
    led = source.scaled(max(P.degree, 1)).tally("qsvt")
    if P.qsvt_scale > 1.0:
        led = led.tally("qsvt_rescale")
    return BlockEncoding(M, 1.0, ancillas + 2, P.sup_error, led, "qsvt")


# -- matrix powers -------------------------------------------------------------


def _power_spectrum(E: BlockEncoding, kappa_M: float, allow_indefinite: bool, what: str):
    if kappa_M < 1:
        raise DomainError(f"kappa_M must be ≥ 1, got {kappa_M}")
    w, V = _hermitian_eig(E, what)
    # eigenvalues carry absolute rounding of order machine epsilon
    lo = (1.0 / kappa_M) * (1.0 - 1e-9) - 1e-14
    mags = np.abs(w) if allow_indefinite else w
    if np.any(mags < lo) or np.any(np.abs(w) > 1.0 + 1e-9 + E.eps):
        range_txt = "±[1/κ, 1]" if allow_indefinite else "[1/κ, 1]"
        raise SpectrumError(
            f"{what}: spectrum [{w.min():.6g}, {w.max():.6g}] outside {range_txt} with κ = {kappa_M:.6g}"
        )
    return w, V


def _smoothing_rate(kappa_M: float, c: float, eps: float) -> float:
    """Rate ``a`` with ``e^{−a²x²} ≤ ε/(4 max(1, c))`` for ``|x| ≥ 1/κ``."""
    return kappa_M * math.sqrt(math.log(4.0 * max(1.0, c) / eps))


def _soft_inverse_square(a: float, x: np.ndarray) -> np.ndarray:
    """``(1 − e^{−a²x²})/x²``: entire, positive on the real line, ``≈ 1/x²`` away from 0."""
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, a * a)
    nz = np.abs(x) > 1e-8 / a
    out[nz] = -np.expm1(-(a * x[nz]) ** 2) / x[nz] ** 2
    return out


def _strict_values(f, surrogate, w, kappa_M, eps, d0, indefinite, target):
    """Evaluate a polynomial approximant of ``f`` on the eigenvalues ``w``.

    The polynomial interpolates an analytic surrogate on [−1, 1]; its error
    is certified against ``f`` on a dense grid over the admissible spectrum.
    """
    pos = np.linspace(1.0 / kappa_M, 1.0, 2001)
    grid = np.concatenate([-pos[::-1], pos]) if indefinite else pos
    d = max(int(d0), 1)
    f_grid = f(grid)
    while True:
        coeffs = chebyshev_interpolate(surrogate, d)
        err = float(np.max(np.abs(C.chebval(grid, coeffs) - f_grid)))
        if err <= eps:
            break
        d = _next_degree(d, d0)
        if d > MAX_ESCALATION * d0:
            raise ApproximationError(f"{target}: strict approximant did not reach {eps:.1e} (error {err:.2e})")
    return C.chebval(w, coeffs), d, err


def neg_power(E: BlockEncoding, c: float, kappa_M: float, eps: float, *, strict: bool = False) -> BlockEncoding:
    """Encoding of ``A^{−c}/(2κ^c)`` for ``A`` with spectrum in ``[1/κ, 1]``.

    For ``c = 1`` the inverse is odd, so an indefinite spectrum with
    ``|λ| ∈ [1/κ, 1]`` is also accepted.  The matrix value is exact
    eigenvalue calculus unless ``strict`` routes it through an explicit
    polynomial approximant; the ledger charges the lemma's cost either way.
    """
    if c <= 0:
        raise DomainError(f"c must be positive, got {c}")
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    odd = c == 1
    w, V = _power_spectrum(E, kappa_M, odd, "neg_power")
    norm = 2.0 * kappa_M**c

    def f(x):
        return np.sign(x) * np.abs(x) ** (-c) / norm if odd else np.abs(x) ** (-c) / norm

    if strict:
        a = _smoothing_rate(kappa_M, c, eps)
        if odd:
            def surrogate(x):
                return x * _soft_inverse_square(a, x) / norm
        else:
            def surrogate(x):
                return _soft_inverse_square(a, x) ** (c / 2.0) / norm
        d0 = int(math.ceil(kappa_M * math.log2(kappa_M ** (1 + c) / eps + 1.0)))
        vals, _, _ = _strict_values(f, surrogate, w, kappa_M, eps, d0, odd, "neg_power")
    else:
        vals = f(w)
    M = (V * vals) @ V.conj().T
    lip = c * kappa_M / 2.0
    mult = kappa_M * (1.0 + c) * math.log2(kappa_M ** (1.0 + c) / eps) ** 2
    led = E.ledger.scaled(mult).tally("neg_power")
    return BlockEncoding(M, 1.0, E.ancillas + 3, eps + lip * E.eps, led, "neg_power")


def pos_power(E: BlockEncoding, c: float, kappa_M: float, eps: float, *, strict: bool = False) -> BlockEncoding:
    """Encoding of ``A^c/2`` for ``0 < c < 1`` and spectrum in ``[1/κ, 1]``."""
    if not 0 < c < 1:
        raise DomainError(f"c must lie in (0, 1), got {c}")
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    w, V = _power_spectrum(E, kappa_M, False, "pos_power")

    def f(x):
        return np.abs(x) ** c / 2.0

    if strict:
        a = _smoothing_rate(kappa_M, c, eps)

        def surrogate(x):
            return _soft_inverse_square(a, x) ** (-c / 2.0) / 2.0

        d0 = int(math.ceil(kappa_M * math.log2(kappa_M / eps + 1.0)))
        vals, _, _ = _strict_values(f, surrogate, w, kappa_M, eps, d0, False, "pos_power")
    else:
        vals = f(w)
    M = (V * vals) @ V.conj().T
    lip = 0.5 * c * kappa_M ** (1.0 - c)
    mult = kappa_M * math.log2(kappa_M / eps) ** 2
    led = E.ledger.scaled(mult).tally("pos_power")
    return BlockEncoding(M, 1.0, E.ancillas + 3, eps + lip * E.eps, led, "pos_power")


def smallest_kappa(E: BlockEncoding, *, indefinite: bool = False) -> float:
    """Tightest ``κ`` such that the encoded spectrum lies in ``[1/κ, 1]`` (``±`` if indefinite)."""
    A = 0.5 * (E.encoded + E.encoded.conj().T)
    w = np.linalg.eigvalsh(A)
    lo = float(np.min(np.abs(w))) if indefinite else float(np.min(w))
    if lo <= 0:
        raise SpectrumError("encoded matrix is not definite")
    return max(1.0, 1.0 / lo)
