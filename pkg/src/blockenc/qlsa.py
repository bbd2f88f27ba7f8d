"""Hermitian linear systems solved through inverse-power transforms.

Two routes end at the same operator, an encoding of ``σ_min(A)·A⁻¹/2``
(that is ``Â⁻¹/(2κ)`` with ``Â = A/‖A‖₂``):

* p.s.d. path: the Gram encoding ``A†A/‖A‖_F²`` from the matrix-entry state,
  then the inverse square root;
* general path: ``S = (I + A)/2`` is positive definite, its Gram encoding
  and a square root give ``S/2``, an LCU with ``I/4`` leaves ``A/8``, and the
  odd inverse finishes.

Post-selecting the solver's encoding on ``|b⟩`` gives ``|x⟩ ∝ A⁻¹|b⟩``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import encoding as enc
from . import numerics as nx
from . import polytransform as pt
from .encoding import BlockEncoding, CostLedger, StageRecord
from .errors import DomainError, SingularityError, SpectrumError, ValidationError

RESCALE_MARGIN = 1e-6
PSD_TOL = 1e-12
# above this norm the shifted matrix (I + A)/2 is too ill conditioned to use
SHIFT_LIMIT = 0.99


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """``A x = b`` with Hermitian ``A`` (spectral radius < 1) and unit ``b``.

    ``scale`` and ``b_norm`` record the ingestion rescaling: the caller's
    system is ``(scale·A) x = b_norm·b``.
    """

    A: np.ndarray
    b: np.ndarray
    kappa: float
    sparsity: int
    scale: float = 1.0
    b_norm: float = 1.0

    @property
    def n(self) -> int:
        return self.b.size

    @property
    def spectral_norm(self) -> float:
        return nx.spectral_norm(self.A)

    @property
    def is_psd(self) -> bool:
        return float(np.linalg.eigvalsh(self.A).min()) >= -PSD_TOL

    @classmethod
    def create(cls, A, b, *, rescale: bool = True) -> "LinearSystem":
        M = nx.check_hermitian(A)
        M = 0.5 * (M + M.conj().T)
        x = nx.as_vector(b)
        if x.size != M.shape[0]:
            raise ValidationError(f"rhs has length {x.size}, matrix is {M.shape[0]}×{M.shape[0]}")
        b_norm = float(np.linalg.norm(x))
        if b_norm == 0.0:
            raise ValidationError("rhs is the zero vector")
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] <= 1e-12:
            raise SingularityError("matrix is singular (σ_min ≤ 1e-12)")
        scale = 1.0
        if s[0] >= 1.0:
            if not rescale:
                raise DomainError(f"spectral radius {s[0]:.6g} ≥ 1")
            scale = s[0] / (1.0 - RESCALE_MARGIN)
            M = M / scale
        M.setflags(write=False)
        xb = x / b_norm
        xb.setflags(write=False)
        sparsity = int(np.max(np.count_nonzero(M, axis=1)))
        return cls(M, xb, float(s[0] / s[-1]), sparsity, scale, b_norm)


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Post-selected solution state with its probability and costs.

    ``state`` is ``A⁻¹b/‖A⁻¹b‖`` with no phase change, so it can be scaled
    back to the solution directly; ``solution_norm`` is ``‖x‖`` for the
    caller's (unscaled) system, recovered from the success probability.
    """

    state: np.ndarray
    success_prob: float
    eps_bound: float
    ledger: CostLedger
    path: str
    kappa: float = float("nan")
    solution_norm: float = float("nan")
    formula_cost: float = float("nan")
    shifted_cond: float = float("nan")
    stages: tuple = field(default=())

    def solution(self) -> np.ndarray:
        return self.solution_norm * self.state


def success_probability(sys: LinearSystem) -> float:
    """``‖Â⁻¹b‖²/(4κ²)`` with ``Â = A/‖A‖₂``, from the inverse oracle."""
    y = nx.inverse_oracle(sys.A) @ sys.b
    y = y * sys.spectral_norm
    return float(np.vdot(y, y).real / (4.0 * sys.kappa**2))


def psd_formula(kappa: float, sparsity: int, n: int, eps: float) -> float:
    """Constant-1 evaluation of the p.s.d.-path cost ``κ³·log(sn)·log²(κ^{3/2}/ε)``."""
    return kappa**3 * enc.log2c(sparsity * n) * math.log2(kappa**1.5 / eps) ** 2


def general_formula(kappa: float, sparsity: int, n: int, eps: float) -> float:
    """Constant-1 evaluation of ``κ²·log(sn)·log²(κ²/ε)·log²(1/ε)``."""
    return kappa**2 * enc.log2c(sparsity * n) * math.log2(kappa**2 / eps) ** 2 * math.log2(1.0 / eps) ** 2


def _entry_gram(M: np.ndarray) -> tuple[BlockEncoding, float]:
    """Encoding of ``M†M/‖M‖_F²`` from the state ``Σᵢⱼ conj(Mᵢⱼ)|i⟩|j⟩``.

    Tracing out the row register of that state leaves ``M†M`` over the
    squared Frobenius norm.
    """
    F = float(np.linalg.norm(M))
    amps = (M.conj() / F).reshape(-1)
    n = M.shape[0]
    s = int(np.max(np.count_nonzero(M, axis=1)))
    led = CostLedger(1, enc.log2c(s * n), {"state_prep": 1})
    return enc.density_from_state(amps, n, source=led).replace(origin="gram"), F


def encode_system(sys: LinearSystem) -> BlockEncoding:
    """Encoding of ``A†A/‖A‖_F²`` (equal to ``AᵀA`` for real ``A``)."""
    return _entry_gram(sys.A)[0]


def _check_eps(eps: float):
    if not 0 < eps < 0.5:
        raise DomainError(f"eps must lie in (0, 1/2), got {eps}")


def _finish(
    sys: LinearSystem, F: BlockEncoding, eps: float, path: str, amplified: bool, formula: float, stages, shifted
) -> SolveResult:
    ps = enc.post_select(F, sys.b, amplified=amplified, budget_prob=1.0 / (4.0 * sys.kappa**2))
    # ‖Â⁻¹b‖ = 2κ√p, then undo Â = A/‖A‖₂ and the ingestion scaling
    inv_norm = 2.0 * sys.kappa * math.sqrt(ps.prob) / sys.spectral_norm
    sol_norm = sys.b_norm * inv_norm / sys.scale
    eps_state = min(2.0, 2.0 * F.eps / math.sqrt(ps.prob))
    stages = tuple(stages) + (StageRecord.of_ledger("post_select", "post_select", ps.ledger, eps_state),)
    return SolveResult(
        state=ps.state,
        success_prob=ps.prob,
        eps_bound=eps_state,
        ledger=ps.ledger,
        path=path,
        kappa=sys.kappa,
        solution_norm=sol_norm,
        formula_cost=formula,
        shifted_cond=shifted,
        stages=stages,
    )


def _encoding_budget(sys: LinearSystem, eps: float) -> float:
    # the solver's output has norm ≥ 1/(2κ), so state error eps needs eps/(4κ) here
    return eps / (4.0 * sys.kappa)


def solve_psd(sys: LinearSystem, eps: float, *, amplified: bool = False, strict: bool = False) -> SolveResult:
    """Solve a positive definite system with ``(A†A)^{−1/2} = A⁻¹``."""
    _check_eps(eps)
    if not sys.is_psd:
        raise SpectrumError("matrix has a negative eigenvalue; use solve_general")
    G = encode_system(sys)
    kappa_G = pt.smallest_kappa(G)
    F = pt.neg_power(G, 0.5, kappa_G, _encoding_budget(sys, eps), strict=strict)
    stages = [StageRecord.of("gram", G), StageRecord.of("inverse_sqrt", F)]
    formula = psd_formula(sys.kappa, sys.sparsity, sys.n, eps)
    return _finish(sys, F, eps, "psd", amplified, formula, stages, float("nan"))


@dataclass(frozen=True, eq=False)
class PreInversion:
    """The general path up to the inversion: an encoding of ``A/8``."""

    encoding: BlockEncoding
    shifted_cond: float
    stages: tuple


def eighth_encoding(A, eps: float, *, strict: bool = False) -> PreInversion:
    """``A/8`` for Hermitian ``A`` with ``‖A‖₂ < 1``, through the shifted matrix.

    ``S = (I + A)/2`` is positive semidefinite, so the square root of its
    Gram encoding gives ``S/(2‖S‖_F)``; rescaling to ``S/2 = (I + A)/4`` and
    an LCU with ``I/4`` leaves ``A/8``.  ``eps`` bounds the tracked error of
    the returned encoding.
    """
    if not 0 < eps < 0.5:
        raise DomainError(f"eps must lie in (0, 1/2), got {eps}")
    M = nx.check_hermitian(A)
    n = M.shape[0]
    S = 0.5 * (np.eye(n) + M)
    shifted_cond = nx.cond_number(S)
    GS, FS = _entry_gram(S)
    # the LCU halves errors, so the S/2 stage may carry 2·eps
    root = pt.pos_power(GS, 0.5, pt.smallest_kappa(GS), eps / max(FS, 1.0), strict=strict)
    if FS > 1.0:
        half = enc.amplify_safely(root, FS, eps)
    elif FS < 1.0:
        half = enc.scale_down(root, 1.0 / FS)
    else:
        half = root
    quarter_id = enc.scale_down(enc.identity_encoding(n), 4.0)
    Q = enc.lcu([half, quarter_id], [1, -1]).replace(origin="shift_back")
    stages = (
        StageRecord.of("shifted_gram", GS),
        StageRecord.of("shifted_sqrt", root),
        StageRecord.of("shifted_rescale", half),
        StageRecord.of("shift_back", Q),
    )
    return PreInversion(Q, shifted_cond, stages)


def shift_ready(A) -> tuple[np.ndarray, float]:
    """``(A/f, f)`` with ``f = 2‖A‖₂`` if ``‖A‖₂ > SHIFT_LIMIT``, else ``(A, 1)``.

    Near-unit norms leave ``(I + A)/2`` nearly singular; halving the norm
    keeps its condition number at most 3.
    """
    rho = nx.spectral_norm(A)
    if rho <= SHIFT_LIMIT:
        return np.asarray(A), 1.0
    return np.asarray(A) / (2.0 * rho), 2.0 * rho


def general_pre_inversion(sys: LinearSystem, eps: float, *, strict: bool = False) -> PreInversion:
    """The general path's encoding of ``A/8`` (of ``A/(16‖A‖₂)`` when ``‖A‖₂ > 0.99``)."""
    return eighth_encoding(shift_ready(sys.A)[0], eps, strict=strict)


def solve_general(sys: LinearSystem, eps: float, *, amplified: bool = False, strict: bool = False) -> SolveResult:
    """Solve any valid system through the shifted positive definite matrix."""
    _check_eps(eps)
    budget = _encoding_budget(sys, eps)
    # κ of A/8 in the inverse's sense; half the budget is forwarded through
    # the inverse's Lipschitz factor κ_Q/2, half is its own polynomial error
    kappa_Q = 8.0 * sys.kappa / nx.spectral_norm(shift_ready(sys.A)[0])
    pre = general_pre_inversion(sys, budget / (2.0 * kappa_Q), strict=strict)
    Q = pre.encoding
    F = pt.neg_power(Q, 1.0, pt.smallest_kappa(Q, indefinite=True), budget / 2.0, strict=strict)
    stages = pre.stages + (StageRecord.of("inverse", F),)
    formula = general_formula(sys.kappa, sys.sparsity, sys.n, eps)
    return _finish(sys, F, eps, "general", amplified, formula, stages, pre.shifted_cond)


def solve(sys: LinearSystem, eps: float, *, path: str = "auto", amplified: bool = False, strict: bool = False) -> SolveResult:
    """Dispatch on ``path``; ``auto`` takes the p.s.d. route when it applies."""
    if path == "auto":
        path = "psd" if sys.is_psd else "general"
    if path == "psd":
        return solve_psd(sys, eps, amplified=amplified, strict=strict)
    if path == "general":
        return solve_general(sys, eps, amplified=amplified, strict=strict)
    raise DomainError(f"unknown solver path {path!r}")


def planted_system(rng: np.random.Generator, n: int, kappa: float, *, definite: bool, real: bool = True) -> LinearSystem:
    """Random system with condition number exactly ``kappa``.

    Spectral magnitudes lie in ``[0.9/κ, 0.9]`` with both ends present.
    Indefinite systems carry ``−0.9`` and ``+0.9/κ`` plus random signs elsewhere.
    """
    if n < 2 or kappa < 1:
        raise DomainError("planted systems need n ≥ 2 and kappa ≥ 1")
    top = 0.9
    mags = np.concatenate([[top, top / kappa], rng.uniform(top / kappa, top, n - 2)])
    if definite:
        lam = mags
    else:
        signs = rng.choice([-1.0, 1.0], size=n)
        signs[0], signs[1] = -1.0, 1.0
        lam = mags * signs
    A = nx.planted_hermitian(rng, lam, real=real)
    b = rng.standard_normal(n) + (0 if real else 1j * rng.standard_normal(n))
    return LinearSystem.create(A, b / np.linalg.norm(b))
