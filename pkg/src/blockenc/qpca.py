"""Principal components from block-encoded covariance matrices.

Two extraction routes share one covariance encoding ``½𝒞``:

* power method: ``x_k = E^k x₀``, an exponential filter on the rank-1
  operator ``x_k x_k† x₀x₀†``, post-selection, then deflation for the next
  component;
* gradient descent on ``f(x) = ½‖x‖² + ½xᵀ(I − 𝒞)x`` carried out inside the
  ``xx†`` embedding, one factor-4 amplification per step.

Gaps are relative, ``(λ₁ − λ₂)/λ₁``: every operator here is subnormalized,
and the power-method convergence rate depends only on ``λ₂/λ₁``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import encoding as enc
from . import numerics as nx
from . import polytransform as pt
from .encoding import BlockEncoding, CostLedger, StageRecord
from .errors import DegenerateStartError, DomainError, GapTooSmallError, ValidationError
from .stateprep import Dataset, centroid_encoding, gram_encoding

MIN_GAP = 1e-6
MAX_RESAMPLES = 16


@dataclass(frozen=True, eq=False)
class EigenPairEstimate:
    """Estimated eigenpair of the operator an extraction ran on.

    ``value`` is on the covariance scale of the normalized dataset (the
    iterated operator's Rayleigh quotient divided by its known scale);
    ``raw_value`` undoes the dataset normalization.  ``projector`` encodes
    (approximately) ``v v†`` and feeds deflation.
    """

    value: float
    vector: np.ndarray
    eps_bound: float
    ledger: CostLedger
    raw_value: float = float("nan")
    projector: BlockEncoding | None = None
    scale: float = 1.0
    iterations: int = 0
    gap: float = float("nan")
    beta: float = 0.0
    gamma: float = 0.0
    prob: float = 1.0
    value_shots: int = 0
    converged: bool = True
    stages: tuple = ()


@dataclass(frozen=True)
class PowerConfig:
    """Power-method settings; ``None`` fields are derived at run time."""

    eps: float = 1e-3
    gap: float | Sequence[float] | None = None
    beta: float | None = None
    k: int | None = None
    rng_seed: int = 0
    rayleigh: str = "exact"

    def __post_init__(self):
        if not 0 < self.eps < 0.5:
            raise DomainError("PowerConfig.eps must lie in (0, 1/2)")
        if self.k is not None and self.k < 1:
            raise DomainError("PowerConfig.k must be ≥ 1")
        if self.rayleigh not in ("exact", "sampled"):
            raise DomainError("PowerConfig.rayleigh must be 'exact' or 'sampled'")


@dataclass(frozen=True)
class GDConfig:
    """Gradient-descent settings; ``T=None`` means ``ceil(log₂(1/ε))``."""

    eta: float = 0.25
    T: int | None = None
    eps: float = 1e-2
    rng_seed: int = 0
    eps_rel: float = 1e-3
    early_stop: bool = True

    def __post_init__(self):
        if not 0 < self.eta <= 0.25:
            raise DomainError("GDConfig.eta must lie in (0, 1/4]")
        if self.T is not None and self.T < 1:
            raise DomainError("GDConfig.T must be ≥ 1")
        if not 0 < self.eps < 0.5:
            raise DomainError("GDConfig.eps must lie in (0, 1/2)")

    @property
    def iterations(self) -> int:
        return self.T if self.T is not None else int(math.ceil(math.log2(1.0 / self.eps)))


# -- covariance ----------------------------------------------------------------


def covariance_oracle(X: Dataset) -> np.ndarray:
    """``(1/m)XᵀX − μμᵀ`` evaluated directly."""
    R = X.rows
    mu = R.mean(axis=0)
    return R.T @ R / X.m - np.outer(mu, mu)


def build_covariance(X: Dataset) -> BlockEncoding:
    """Encoding of ``½𝒞`` with ``𝒞 = (1/m)XᵀX − μμᵀ``."""
    G = gram_encoding(X)
    if X.m > 1:
        G = enc.scale_down(G, X.m)
    M = centroid_encoding(X)
    return enc.lcu([G, M], [1, -1]).replace(origin="covariance")


# -- helpers -------------------------------------------------------------------


def _check_psd(E: BlockEncoding, what: str):
    tol = 1e-8 + E.eps
    if nx.hermitian_defect(E.encoded) > tol:
        raise ValidationError(f"{what} needs a Hermitian encoding")
    w = np.linalg.eigvalsh(0.5 * (E.encoded + E.encoded.conj().T))
    if w.min() < -tol:
        raise ValidationError(f"{what} needs a positive semidefinite encoding (min eigenvalue {w.min():.3e})")


def _top_vector(E: BlockEncoding) -> np.ndarray:
    A = 0.5 * (E.encoded + E.encoded.conj().T)
    _, V = nx.hermitian_eig(A, tol=np.inf)
    return V[:, 0]


def random_start(rng: np.random.Generator, E: BlockEncoding) -> np.ndarray:
    """Seeded random unit start with a non-negligible dominant overlap.

    The overlap is checked against the exact top eigenvector; this guards
    the simulation against measure-zero bad starts and never steers it.
    """
    real = not np.iscomplexobj(E.encoded) or np.max(np.abs(E.encoded.imag)) == 0.0
    v1 = _top_vector(E)
    for _ in range(MAX_RESAMPLES):
        x = rng.standard_normal(E.dim)
        if not real:
            x = x + 1j * rng.standard_normal(E.dim)
        x = x / np.linalg.norm(x)
        if nx.overlap(x, v1) > 1e-6:
            return x.astype(complex)
    raise DegenerateStartError(f"no start with dominant overlap after {MAX_RESAMPLES} draws")


def beta_rule(gamma: float, eps: float) -> float:
    """Largest filter strength keeping ``1 − e^{−2β(1−γ)} ≤ ε``."""
    if gamma >= 1.0:
        return 1.0
    return math.log(1.0 / (1.0 - eps)) / (2.0 * (1.0 - gamma))


def _phase_fixed(v: np.ndarray) -> np.ndarray:
    u = v / np.linalg.norm(v)
    u = u * nx.phase_fix(u)
    u.setflags(write=False)
    return u


class FilteredProjection(NamedTuple):
    state: np.ndarray
    prob: float
    projector: BlockEncoding
    filter: pt.PolySpec
    ledger: CostLedger


def filtered_projection(
    y_hat: np.ndarray, log_norm2: float, x0: np.ndarray, beta: float, eps: float, source: CostLedger
) -> FilteredProjection:
    """Filter the rank-1 operator ``y y† · x₀x₀†`` and post-select on ``x₀``.

    ``y = e^{log_norm2/2}·ŷ`` is the (possibly astronomically small) branch
    vector and ``source`` the cost of the encoding of ``y y†``.  The product
    with ``x₀x₀†`` is ``σ|u⟩⟨x₀|`` with ``σ = ‖y‖²|⟨ŷ,x₀⟩|``; the filter maps
    ``σ`` to about ``e^{−β(1−σ)}``.  Returns ``ŷ`` (up to phase), the success
    probability and an encoding of the post-selected branch's outer product.
    """
    c = complex(np.vdot(y_hat, x0))
    if abs(c) <= 1e-300:
        raise DegenerateStartError("filtered state is orthogonal to the start vector")
    u = y_hat * (c / abs(c))
    log_sigma = log_norm2 + math.log(abs(c))
    sigma = math.exp(log_sigma) if log_sigma > -700 else 0.0
    P0 = enc.density_from_state(x0, 1)
    rank1_ledger = (source + P0.ledger).tally("product")
    filt = pt.exp_filter_poly(beta, eps)
    F = pt.rank1_transform(u, x0, sigma, filt, rank1_ledger)
    ps = enc.post_select(F, x0)
    branch = F.encoded @ x0
    proj = enc.outer_encoding(branch, source=ps.ledger, eps=abs(1.0 - ps.prob) + 2.0 * filt.sup_error)
    return FilteredProjection(ps.state, ps.prob, proj.replace(origin="projector"), filt, ps.ledger)


def _signed_gamma(log_norm2: float, y_hat: np.ndarray, x0: np.ndarray) -> float:
    """``γ = ‖y‖²·Re⟨ŷ, x₀⟩`` (zero when below the floating-point range)."""
    g = float(np.real(np.vdot(y_hat, x0)))
    if log_norm2 < -700 or g == 0.0:
        return 0.0
    return math.exp(log_norm2) * g


# -- power path ----------------------------------------------------------------


class PowerIterate(NamedTuple):
    xk: np.ndarray
    gamma: float
    prob: float
    projector: BlockEncoding
    ledger: CostLedger
    beta: float
    filter: pt.PolySpec


def _normalized_power(A: np.ndarray, x: np.ndarray, k: int) -> tuple[np.ndarray, float]:
    """``A^k x`` as a unit direction and ``log ‖A^k x‖²``."""
    y = x.copy()
    log_norm = 0.0
    for _ in range(k):
        y = A @ y
        nrm = float(np.linalg.norm(y))
        if nrm == 0.0:
            raise DegenerateStartError("start vector is annihilated by E^k")
        log_norm += math.log(nrm)
        y = y / nrm
    return y, 2.0 * log_norm


def power_iterate(E: BlockEncoding, x0, k: int, beta: float | None, eps: float) -> PowerIterate:
    """``k`` powers of ``E`` on ``x₀`` followed by the exponential filter.

    The ``k``-fold product is charged to the ledger as ``k`` uses of ``E``;
    its action on ``x₀`` is tracked as a direction and a log-norm so deep
    powers of a subnormalized operator stay representable.  ``beta=None``
    picks the largest strength allowed by :func:`beta_rule` once ``γ`` is
    known.
    """
    _check_psd(E, "power_iterate")
    if k < 1:
        raise DomainError("k must be ≥ 1")
    x = nx.as_vector(x0)
    if abs(np.linalg.norm(x) - 1.0) > 1e-9:
        raise ValidationError("x0 must be a unit vector")
    y_hat, log_n2 = _normalized_power(E.encoded, x, k)
    gamma = _signed_gamma(log_n2, y_hat, x)
    b = beta_rule(gamma, eps) if beta is None else float(beta)
    # y y† comes from the density construction on the state |0⟩E^k x₀ + garbage
    source = enc.repeat_ledger(E.ledger, k).scaled(2).tally("density")
    fp = filtered_projection(y_hat, log_n2, x, b, eps, source)
    return PowerIterate(fp.state, gamma, fp.prob, fp.projector, fp.ledger, b, fp.filter)


def rayleigh_estimate(E: BlockEncoding, xk, mode: str = "exact", *, shots: int | None = None, rng=None) -> float:
    """``Re⟨x|E|x⟩``, optionally with binomial shot noise.

    Sampled mode draws ``shots`` Bernoulli outcomes whose mean estimates the
    quotient (for quotients in [0, 1]) or ``(1+q)/2`` otherwise.
    """
    x = nx.as_vector(xk)
    if abs(np.linalg.norm(x) - 1.0) > 1e-9:
        raise ValidationError("rayleigh_estimate needs a unit vector")
    q = float(np.real(np.vdot(x, E.encoded @ x)))
    if mode == "exact":
        return q
    if mode != "sampled":
        raise DomainError(f"unknown rayleigh mode {mode!r}")
    if shots is None or shots < 1:
        raise DomainError("sampled mode needs shots ≥ 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    if 0.0 <= q <= 1.0:
        return float(rng.binomial(shots, q) / shots)
    p = min(max((1.0 + q) / 2.0, 0.0), 1.0)
    return float(2.0 * rng.binomial(shots, p) / shots - 1.0)


def iterations_for_gap(gap: float, n: int, eps: float) -> int:
    return max(1, int(math.ceil((1.0 / gap) * math.log(n / eps))))


def deflation_ratio_formula(gap: float, n: int, eps: float) -> float:
    """Constant-1 evaluation of the extra factor ``(1/Δ)·log(n/ε)·log(1/ε)`` per deflation level."""
    return (1.0 / gap) * math.log2(n / eps) * math.log2(1.0 / eps)


def estimate_gap(E: BlockEncoding, rng: np.random.Generator, eps: float) -> tuple[float, CostLedger]:
    """Relative gap from two short probe power runs (halved for safety).

    The first probe estimates ``λ₁`` and its vector, the second runs on the
    probe-deflated operator.  Probe costs are returned as a ledger.
    """
    n = E.dim
    kp = max(8, int(math.ceil(2.0 * math.log(n / eps))))
    x0 = random_start(rng, E)
    p1 = power_iterate(E, x0, kp, None, eps)
    lam1 = rayleigh_estimate(E, p1.xk)
    if lam1 <= 0:
        raise GapTooSmallError("operator has no positive dominant eigenvalue")
    D = deflate_with(E, p1.projector)
    x1 = random_start(rng, D) if np.linalg.norm(D.encoded) > 1e-300 else x0
    p2 = power_iterate(D, x1, kp, None, eps)
    lam2 = 2.0 * rayleigh_estimate(D, p2.xk)
    gap = max(0.0, (lam1 - lam2) / lam1) / 2.0
    return gap, p1.ledger + p2.ledger


def _gap_for(cfg_gap, index: int):
    if cfg_gap is None:
        return None
    if isinstance(cfg_gap, (int, float)):
        return float(cfg_gap)
    seq = list(cfg_gap)
    return float(seq[index]) if index < len(seq) else None


def top_eigenpair_power(
    E: BlockEncoding,
    cfg: PowerConfig,
    *,
    scale: float = 1.0,
    rng: np.random.Generator | None = None,
    component: int = 0,
    global_scale: float = 1.0,
) -> EigenPairEstimate:
    """Dominant eigenpair of a p.s.d. encoding with the filtered power method.

    ``scale`` is the known factor between the encoded operator and the
    matrix whose eigenvalue is reported (½ for the covariance encoding).
    """
    _check_psd(E, "top_eigenpair_power")
    rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
    n = E.dim
    ledger = CostLedger()
    gap = _gap_for(cfg.gap, component)
    if gap is None and cfg.k is None:
        gap, probe = estimate_gap(E, rng, cfg.eps)
        ledger = ledger + probe.tally("gap_probe")
    if gap is not None and gap < MIN_GAP:
        raise GapTooSmallError(f"relative gap {gap:.3e} is below {MIN_GAP:g}")
    k = cfg.k if cfg.k is not None else iterations_for_gap(gap, n, cfg.eps)
    x0 = random_start(rng, E)
    it = power_iterate(E, x0, k, cfg.beta, cfg.eps)
    if cfg.beta is not None and cfg.beta > beta_rule(it.gamma, cfg.eps):
        raise DomainError(
            f"beta = {cfg.beta} exceeds the admissible {beta_rule(it.gamma, cfg.eps):.3e} for gamma = {it.gamma:.3e}"
        )
    shots = 0
    if cfg.rayleigh == "sampled":
        shots = int(math.ceil(1.0 / cfg.eps**2))
        q = rayleigh_estimate(E, it.xk, "sampled", shots=shots, rng=rng)
    else:
        q = rayleigh_estimate(E, it.xk)
    value = q / scale
    eps_bound = cfg.eps
    proj = it.projector.replace(eps=2.0 * eps_bound + it.projector.eps)
    total = ledger + it.ledger
    stages = (
        StageRecord.of_ledger(f"power[{component}]", "power_method", total, eps_bound),
    )
    return EigenPairEstimate(
        value=value,
        vector=_phase_fixed(it.xk),
        eps_bound=eps_bound,
        ledger=total,
        raw_value=value * global_scale**2,
        projector=proj,
        scale=scale,
        iterations=k,
        gap=float(gap) if gap is not None else float("nan"),
        beta=it.beta,
        gamma=it.gamma,
        prob=it.prob,
        value_shots=shots,
        stages=stages,
    )


def deflate_with(E: BlockEncoding, projector: BlockEncoding) -> BlockEncoding:
    """``½(E − E·R)`` for a rank-1 encoding ``R ≈ vv†``."""
    ER = enc.product(E, projector)
    return enc.lcu([E, ER], [1, -1]).replace(origin="deflate")


def deflate(E: BlockEncoding, pair: EigenPairEstimate) -> BlockEncoding:
    """Remove the dominant component: ``½𝒞 ↦ ¼(𝒞 − λ₁v₁v₁†)``.

    The result's top eigenpair is the next component at half the scale.
    """
    if pair.projector is None:
        raise ValidationError("eigenpair carries no projector encoding to deflate with")
    D = deflate_with(E, pair.projector)
    # both blocks have norm ≤ 1, so the projector error enters additively
    return D.replace(eps=E.eps + 2.0 * pair.eps_bound)


def _check_r(X: Dataset, r: int):
    if not 1 <= r <= X.n:
        raise DomainError(f"r must lie in 1..{X.n}, got {r}")


def top_r_power(X: Dataset, r: int, cfg: PowerConfig) -> list[EigenPairEstimate]:
    """Top ``r`` principal components by repeated power method and deflation."""
    _check_r(X, r)
    rng = np.random.default_rng(cfg.rng_seed)
    E = build_covariance(X)
    scale = 0.5
    out: list[EigenPairEstimate] = []
    stages = [StageRecord.of("covariance", E)]
    for j in range(r):
        pair = top_eigenpair_power(E, cfg, scale=scale, rng=rng, component=j, global_scale=X.global_scale)
        stages.extend(pair.stages)
        out.append(replace(pair, stages=tuple(stages)))
        if j < r - 1:
            E = deflate(E, pair)
            stages.append(StageRecord.of(f"deflate[{j}]", E))
            scale /= 2.0
    return out


# -- gradient-descent path -------------------------------------------------------


def gd_iterate(EC: BlockEncoding, rho: BlockEncoding, eta: float, *, eps_rel: float = 1e-3) -> BlockEncoding:
    """One gradient step inside the ``xx†`` embedding.

    With ``G = 2I − 𝒞`` and ``B`` encoding ``ηG``, the four-term sum
    ``ρ − ρB − Bρ + BρB`` divided by 4 equals ``¼(I − ηG)ρ(I − ηG)``; a
    factor-4 amplification removes the ``¼``.
    """
    if not 0 < eta <= 0.25:
        raise DomainError(f"eta must lie in (0, 1/4], got {eta}")
    if EC.dim != rho.dim:
        raise ValidationError("covariance and iterate encodings differ in dimension")
    G4 = enc.lcu([enc.identity_encoding(EC.dim), EC], [1, -1])
    B = G4 if eta == 0.25 else enc.scale_down(G4, 1.0 / (4.0 * eta))
    rB = enc.product(rho, B)
    Br = enc.product(B, rho)
    BrB = enc.product(Br, B)
    quarter = enc.lcu([rho, rB, Br, BrB], [1, -1, -1, 1])
    return enc.amplify_safely(quarter, 4.0, eps_rel).replace(origin="gd_step")


def gd_contraction_ratio(lam1: float, lam2: float, eta: float) -> float:
    """Per-step shrink factor of the non-dominant direction relative to the dominant one."""
    return (1.0 - eta * (2.0 - lam2)) / (1.0 - eta * (2.0 - lam1))


def gd_predicted_overlap(lam1: float, lam2: float, eta: float, T: int, tan0: float) -> float:
    """Lower bound on ``|⟨x̂_T, v₁⟩|`` from ``tan θ_T ≤ ρ^T tan θ₀``."""
    t = gd_contraction_ratio(lam1, lam2, eta) ** T * tan0
    return 1.0 / math.sqrt(1.0 + t * t)


def _gd_direction(rho: BlockEncoding, x0: np.ndarray) -> np.ndarray:
    y = rho.encoded @ x0
    nrm = np.linalg.norm(y)
    if nrm <= 1e-300:
        raise DegenerateStartError("iterate is orthogonal to the probe state")
    y = y / nrm
    return y * nx.phase_fix(y)


def _as_cov(X) -> tuple[BlockEncoding, float]:
    if isinstance(X, Dataset):
        return build_covariance(X), X.global_scale
    if isinstance(X, BlockEncoding):
        return X, 1.0
    raise ValidationError("expected a Dataset or a covariance BlockEncoding")


def gd_top_eigenpair(
    X,
    cfg: GDConfig,
    *,
    scale: float = 0.5,
    rng: np.random.Generator | None = None,
    component: int = 0,
    global_scale: float | None = None,
) -> EigenPairEstimate:
    """Dominant covariance eigenpair by gradient descent in the ``xx†`` embedding.

    ``X`` is a ``Dataset`` or an encoding of ``½𝒞`` (``scale`` relates the
    encoded operator to the reported eigenvalue).  Runs the configured ``T``
    steps, stopping early once the direction changes by less than ``ε/10``;
    ``converged`` reports whether that happened.
    """
    EC, gs = _as_cov(X)
    gs = gs if global_scale is None else global_scale
    rng = rng if rng is not None else np.random.default_rng(cfg.rng_seed)
    x0 = random_start(rng, EC)
    rho = enc.density_from_state(x0, 1)
    T = cfg.iterations
    direction = _gd_direction(rho, x0)
    converged = False
    steps = 0
    for _ in range(T):
        rho = gd_iterate(EC, rho, cfg.eta, eps_rel=cfg.eps_rel)
        steps += 1
        new_dir = _gd_direction(rho, x0)
        change = float(np.linalg.norm(new_dir - direction))
        direction = new_dir
        if change < cfg.eps / 10.0:
            converged = True
            if cfg.early_stop:
                break
    # rho encodes x_T x_T†; its action on x0 gives the direction and norm
    y = rho.encoded @ x0
    c = abs(np.vdot(direction, x0))
    if c == 0.0:
        raise DegenerateStartError("iterate is orthogonal to the start vector")
    log_n2 = math.log(float(np.linalg.norm(y)) / c)
    gamma = _signed_gamma(log_n2, direction, x0)
    beta = beta_rule(gamma, cfg.eps)
    fp = filtered_projection(direction, log_n2, x0, beta, cfg.eps, rho.ledger)
    q = rayleigh_estimate(EC, fp.state)
    value = q / scale
    proj = fp.projector.replace(eps=2.0 * cfg.eps + fp.projector.eps)
    stages = (StageRecord.of_ledger(f"gd[{component}]", "gd_step", fp.ledger, cfg.eps),)
    return EigenPairEstimate(
        value=value,
        vector=_phase_fixed(fp.state),
        eps_bound=cfg.eps,
        ledger=fp.ledger,
        raw_value=value * gs**2,
        projector=proj,
        scale=scale,
        iterations=steps,
        beta=beta,
        gamma=gamma,
        prob=fp.prob,
        converged=converged,
        stages=stages,
    )


def gd_deflate(X, first: EigenPairEstimate) -> BlockEncoding:
    """Deflate a covariance encoding (or dataset) by a gradient-descent eigenpair."""
    EC, _ = _as_cov(X)
    return deflate(EC, first)


def top_r_gd(X: Dataset, r: int, cfg: GDConfig) -> list[EigenPairEstimate]:
    """Top ``r`` components with the gradient-descent inner loop."""
    _check_r(X, r)
    rng = np.random.default_rng(cfg.rng_seed)
    EC = build_covariance(X)
    scale = 0.5
    out: list[EigenPairEstimate] = []
    stages = [StageRecord.of("covariance", EC)]
    for j in range(r):
        pair = gd_top_eigenpair(EC, cfg, scale=scale, rng=rng, component=j, global_scale=X.global_scale)
        stages.extend(pair.stages)
        out.append(replace(pair, stages=tuple(stages)))
        if j < r - 1:
            EC = deflate(EC, pair)
            stages.append(StageRecord.of(f"deflate[{j}]", EC))
            scale /= 2.0
    return out
