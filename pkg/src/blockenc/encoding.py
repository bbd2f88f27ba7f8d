"""Block-encoding algebra at matrix level.

A ``BlockEncoding`` stores the effective top-left block ``A/α`` that the
encoding applies, together with its subnormalization, ancilla count, a
first-order operator-norm error bound and a cost ledger.  Every combinator
is a pure function returning a new value.

Cost formulas are evaluated with all implied constants set to 1 and logs
base 2.  The ledger is a scaling diagnostic, not a gate count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import numerics as nx
from .errors import (
    AmplificationDomainError,
    DomainError,
    ShapeError,
    ValidationError,
    ZeroProbabilityError,
)

NORM_SLACK = 1e-9


def log2c(x: float) -> float:
    """``log₂ x`` clamped below at 1 (so tiny registers still cost something)."""
    return max(1.0, math.log2(x)) if x > 0 else 1.0


def qubits(dim: int) -> int:
    return int(math.ceil(math.log2(dim))) if dim > 1 else 0


def _scale_count(q: int, factor: float) -> int:
    if float(factor).is_integer():
        return int(q) * int(factor)
    return int(math.ceil(q * factor - 1e-9))


@dataclass(frozen=True)
class CostLedger:
    """Query count, depth proxy and per-lemma usage counts."""

    queries: int = 0
    depth_proxy: float = 0.0
    lemma_counts: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.queries < 0 or self.depth_proxy < 0:
            raise ValidationError("ledger components must be nonnegative")
        object.__setattr__(self, "lemma_counts", dict(sorted(self.lemma_counts.items())))

    def __add__(self, other: "CostLedger") -> "CostLedger":
        counts = dict(self.lemma_counts)
        for k, v in other.lemma_counts.items():
            counts[k] = counts.get(k, 0) + v
        return CostLedger(self.queries + other.queries, self.depth_proxy + other.depth_proxy, counts)

    def scaled(self, factor: float, *, depth: bool = True) -> "CostLedger":
        """Multiply queries (rounded up) and, unless ``depth=False``, the depth proxy."""
        if factor < 1:
            factor = 1.0
        d = self.depth_proxy * factor if depth else self.depth_proxy
        return CostLedger(_scale_count(self.queries, factor), d, self.lemma_counts)

    def tally(self, lemma: str, *, queries: int = 0, depth: float = 0.0, count: int = 1) -> "CostLedger":
        return self + CostLedger(queries, depth, {lemma: count})

    def as_dict(self) -> dict:
        return {
            "queries": int(self.queries),
            "depth_proxy": float(self.depth_proxy),
            "lemma_counts": dict(self.lemma_counts),
        }


def repeat_ledger(led: "CostLedger", k: int, lemma: str = "product") -> "CostLedger":
    """Ledger of a ``k``-fold product of one encoding with itself."""
    counts = {name: c * k for name, c in led.lemma_counts.items()}
    out = CostLedger(led.queries * k, led.depth_proxy * k, counts)
    return out.tally(lemma, count=k - 1) if k > 1 else out


def sum_ledgers(ledgers: Sequence[CostLedger]) -> CostLedger:
    total = CostLedger()
    for led in ledgers:
        total = total + led
    return total


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    """Matrix-level block encoding.

    ``encoded`` is the effective block the encoding applies (already divided
    by ``alpha``).  ``origin`` names the lemma that produced the value.
    """

    encoded: np.ndarray
    alpha: float = 1.0
    ancillas: int = 0
    eps: float = 0.0
    ledger: CostLedger = field(default_factory=CostLedger)
    origin: str = "matrix"

    def __post_init__(self):
        A = nx.as_matrix(self.encoded, square=True).copy()
        A.setflags(write=False)
        object.__setattr__(self, "encoded", A)
        if self.alpha < 1.0 - 1e-12:
            raise ValidationError(f"alpha must be ≥ 1, got {self.alpha}")
        if self.eps < 0:
            raise ValidationError(f"eps must be ≥ 0, got {self.eps}")
        if self.ancillas < 0:
            raise ValidationError("ancilla count must be nonnegative")
        bound = 1.0 + self.eps + NORM_SLACK
        if np.linalg.norm(A) > bound and nx.spectral_norm(A) > bound:
            raise ValidationError(
                f"encoded block has norm {nx.spectral_norm(A):.6g} > 1 + eps; no unitary dilation exists"
            )

    @property
    def dim(self) -> int:
        return self.encoded.shape[0]

    @property
    def queries(self) -> int:
        return self.ledger.queries

    def replace(self, **changes) -> "BlockEncoding":
        kw = dict(
            encoded=self.encoded,
            alpha=self.alpha,
            ancillas=self.ancillas,
            eps=self.eps,
            ledger=self.ledger,
            origin=self.origin,
        )
        kw.update(changes)
        return BlockEncoding(**kw)


@dataclass(frozen=True)
class StageRecord:
    """One row of a pipeline's ledger report."""

    stage: str
    lemma: str
    queries: int
    depth_proxy: float
    eps: float

    @classmethod
    def of(cls, stage: str, E: BlockEncoding) -> "StageRecord":
        return cls(stage, E.origin, int(E.ledger.queries), float(E.ledger.depth_proxy), float(E.eps))

    @classmethod
    def of_ledger(cls, stage: str, lemma: str, ledger: CostLedger, eps: float) -> "StageRecord":
        return cls(stage, lemma, int(ledger.queries), float(ledger.depth_proxy), float(eps))


# -- base encodings ---------------------------------------------------------


def from_unitary(U) -> BlockEncoding:
    """A unitary block-encodes itself."""
    M = nx.as_matrix(U, square=True)
    n = M.shape[0]
    if np.max(np.abs(M.conj().T @ M - np.eye(n))) > 1e-9:
        raise ValidationError("matrix is not unitary within 1e-9")
    return BlockEncoding(M, 1.0, 0, 0.0, CostLedger(1, 1.0, {"from_unitary": 1}), "from_unitary")


def from_matrix(M, *, eps: float = 0.0, ancillas: int = 1) -> BlockEncoding:
    """Treat a contraction as a base block encoding (one query).

    Any matrix with ``‖M‖₂ ≤ 1`` is the top-left block of some unitary, so
    this is a valid oracle-level starting point for tests and drivers.
    """
    A = nx.as_matrix(M, square=True)
    return BlockEncoding(A, 1.0, ancillas, eps, CostLedger(1, 1.0, {"from_matrix": 1}), "from_matrix")


def identity_encoding(n: int) -> BlockEncoding:
    if n < 1:
        raise DomainError("identity dimension must be ≥ 1")
    return BlockEncoding(np.eye(n), 1.0, 1, 0.0, CostLedger(0, 1.0, {"identity": 1}), "identity")


def projector_encoding(j: int, n: int) -> BlockEncoding:
    """Encoding of the basis projector ``|j−1⟩⟨j−1|`` (``j`` is 1-based)."""
    if n < 1 or not 1 <= j <= n:
        raise DomainError(f"projector index {j} out of range 1..{n}")
    P = np.zeros((n, n), dtype=complex)
    P[j - 1, j - 1] = 1.0
    led = CostLedger(0, log2c(n), {"projector": 1})
    return BlockEncoding(P, 1.0, 1, 0.0, led, "projector")


def diagonal_encoding(state) -> BlockEncoding:
    """Encoding of ``diag(state)`` for a unit vector ``state``."""
    x = nx.as_vector(state)
    if abs(np.linalg.norm(x) - 1.0) > 1e-9:
        raise ValidationError("diagonal encoding needs a unit-norm state")
    dim = x.size
    led = CostLedger(1, log2c(dim), {"diagonal": 1})
    return BlockEncoding(np.diag(x), 1.0, qubits(dim) + 3, 0.0, led, "diagonal")


def density_from_state(psi, split: int, *, source: CostLedger | None = None) -> BlockEncoding:
    """Encoding of ``Tr_A |ψ⟩⟨ψ|`` where ``A`` is the first ``split``-dim register.

    The construction uses the state-preparation unitary and its inverse once
    each, so the source cost is charged twice.  Without a source ledger the
    preparation is a single base query.
    """
    x = nx.as_vector(psi)
    if abs(np.linalg.norm(x) - 1.0) > 1e-9:
        raise ValidationError("density_from_state needs a unit-norm state")
    if split < 1 or x.size % split:
        raise ShapeError(f"state dimension {x.size} does not factor with first register {split}")
    rho = nx.partial_trace_first(x, split)
    src = source if source is not None else CostLedger(1, 1.0)
    led = src.scaled(2).tally("density")
    return BlockEncoding(rho, 1.0, qubits(split) + qubits(x.size // split), 0.0, led, "density")


def outer_encoding(v, *, source: CostLedger, eps: float = 0.0) -> BlockEncoding:
    """Encoding of ``v v†`` for the ancilla-zero branch ``v`` of a prepared state.

    If a unitary ``U`` maps ``|0⟩|0⟩`` to ``|0⟩v + |garbage⟩`` (``‖v‖ ≤ 1``),
    applying the density construction to that full state and keeping the
    ancilla-zero block yields ``v v†``.  ``source`` is the cost of ``U``.
    """
    x = nx.as_vector(v)
    nrm = np.linalg.norm(x)
    if nrm > 1.0 + 1e-9:
        raise ValidationError("branch vector must have norm ≤ 1")
    led = source.scaled(2).tally("density")
    return BlockEncoding(np.outer(x, x.conj()), 1.0, 2, eps, led, "density")


# -- combinators -------------------------------------------------------------


def _check_same_dim(encs: Sequence[BlockEncoding]):
    dims = {E.dim for E in encs}
    if len(dims) != 1:
        raise ShapeError(f"dimension mismatch: {sorted(dims)}")


def product(E1: BlockEncoding, E2: BlockEncoding) -> BlockEncoding:
    """Encoding of ``A₁A₂`` from one use of each encoding."""
    _check_same_dim([E1, E2])
    eps = E1.alpha * E2.eps + E2.alpha * E1.eps
    led = (E1.ledger + E2.ledger).tally("product")
    return BlockEncoding(
        E1.encoded @ E2.encoded, E1.alpha * E2.alpha, E1.ancillas + E2.ancillas, eps, led, "product"
    )


def lcu(encs: Sequence[BlockEncoding], signs: Sequence[int] | None = None) -> BlockEncoding:
    """Encoding of ``(1/m)Σ ±Mᵢ``; equal weights only."""
    encs = list(encs)
    if not encs:
        raise ValidationError("lcu needs at least one encoding")
    _check_same_dim(encs)
    m = len(encs)
    signs = [1] * m if signs is None else list(signs)
    if len(signs) != m or any(s not in (1, -1) for s in signs):
        raise ValidationError("signs must be a ±1 sequence matching the encodings")
    acc = np.zeros_like(encs[0].encoded)
    for s, E in zip(signs, encs):
        acc = acc + s * E.encoded
    led = sum_ledgers([E.ledger for E in encs]).tally("lcu", depth=float(m))
    return BlockEncoding(
        acc / m,
        m * max(E.alpha for E in encs),
        max(E.ancillas for E in encs) + qubits(m),
        sum(E.eps for E in encs) / m,
        led,
        "lcu",
    )


def scale_down(E: BlockEncoding, p: float) -> BlockEncoding:
    """Encoding of ``A/p`` for ``p > 1``."""
    if not p > 1:
        raise DomainError(f"scale_down needs p > 1, got {p}")
    led = E.ledger.tally("scale", depth=1.0)
    return E.replace(
        encoded=E.encoded / p, alpha=E.alpha * p, eps=E.eps / p, ancillas=E.ancillas + 1, ledger=led, origin="scale"
    )


def tensor(encs: Sequence[BlockEncoding]) -> BlockEncoding:
    """Kronecker product of encodings; parallel single uses of each."""
    encs = list(encs)
    if not encs:
        raise ValidationError("tensor needs at least one encoding")
    M = encs[0].encoded
    for E in encs[1:]:
        M = np.kron(M, E.encoded)
    alphas = [E.alpha for E in encs]
    eps = 0.0
    for i, E in enumerate(encs):
        eps += E.eps * math.prod(a for j, a in enumerate(alphas) if j != i)
    queries = sum(E.ledger.queries for E in encs)
    depth = max(E.ledger.depth_proxy for E in encs) + 1.0
    counts = sum_ledgers([E.ledger for E in encs]).lemma_counts
    led = CostLedger(queries, depth, counts).tally("tensor")
    return BlockEncoding(M, math.prod(alphas), sum(E.ancillas for E in encs), eps, led, "tensor")


def amplification_rounds(gamma: float, delta: float, eps_rel: float) -> int:
    return int(math.ceil((gamma / delta) * math.log(gamma / eps_rel)))


def amplify(E: BlockEncoding, gamma: float, delta: float, eps_rel: float) -> BlockEncoding:
    """Boost all singular values by ``gamma``.

    Requires every singular value to be at most ``(1−delta)/gamma``, checked
    by explicit SVD.  Costs ``ceil((γ/δ)·ln(γ/ε))`` uses of ``E``.
    """
    if not gamma > 1:
        raise DomainError(f"amplify needs gamma > 1, got {gamma}")
    if not (0 < delta <= 0.5 and 0 < eps_rel < 0.5):
        raise DomainError("amplify needs delta in (0, 1/2] and eps_rel in (0, 1/2)")
    smax = nx.spectral_norm(E.encoded)
    limit = (1.0 - delta) / gamma
    if smax > limit + 1e-12:
        raise AmplificationDomainError(
            f"singular value {smax:.6g} exceeds (1−δ)/γ = {limit:.6g}"
        )
    rounds = amplification_rounds(gamma, delta, eps_rel)
    A = gamma * E.encoded
    eps = gamma * E.eps + eps_rel * nx.spectral_norm(A)
    led = E.ledger.scaled(rounds).tally("amplify")
    alpha = max(1.0, E.alpha / gamma)
    return E.replace(encoded=A, alpha=alpha, eps=eps, ancillas=E.ancillas + 1, ledger=led, origin="amplify")


def amplify_safely(E: BlockEncoding, gamma: float, eps_rel: float, *, delta_max: float = 0.25) -> BlockEncoding:
    """Amplify with the largest admissible ``delta`` up to ``delta_max``."""
    smax = nx.spectral_norm(E.encoded)
    delta = min(delta_max, 1.0 - gamma * smax)
    if delta <= 0:
        raise AmplificationDomainError(
            f"cannot amplify by {gamma:.6g}: largest singular value {smax:.6g} is too big"
        )
    return amplify(E, gamma, delta, eps_rel)


def top_left_block(E: BlockEncoding, dim: int) -> BlockEncoding:
    """Restrict to the leading ``dim``-dimensional block.

    The discarded register becomes part of the ancilla space, so this is
    free apart from the ancilla count.
    """
    if dim < 1 or dim > E.dim:
        raise ShapeError(f"cannot take a {dim}-block of a {E.dim}-dim encoding")
    extra = qubits(int(math.ceil(E.dim / dim)))
    return E.replace(
        encoded=E.encoded[:dim, :dim], ancillas=E.ancillas + extra, ledger=E.ledger.tally("restrict"), origin="restrict"
    )


# -- using an encoding -------------------------------------------------------


def _unit_input(phi, dim: int) -> np.ndarray:
    x = nx.as_vector(phi)
    if x.size != dim:
        raise ShapeError(f"state of dimension {x.size} does not match encoding dimension {dim}")
    if abs(np.linalg.norm(x) - 1.0) > 1e-9:
        raise ValidationError("input state must have unit norm")
    return x


def apply_to_state(E: BlockEncoding, phi) -> tuple[np.ndarray, float]:
    """Ancilla-zero branch ``A·φ`` and its probability ``‖A·φ‖²``."""
    x = _unit_input(phi, E.dim)
    y = E.encoded @ x
    return y, float(np.vdot(y, y).real)


def repetitions(prob: float, amplified: bool) -> float:
    """Expected repetitions to see one success: ``1/p``, or ``1/√p`` amplified."""
    return 1.0 / math.sqrt(prob) if amplified else 1.0 / prob


class PostSelected(NamedTuple):
    state: np.ndarray
    prob: float
    ledger: CostLedger


def post_select(
    E: BlockEncoding, phi, *, amplified: bool = False, budget_prob: float | None = None
) -> PostSelected:
    """Normalized post-selected state, its success probability and total cost.

    The ledger multiplies the query count by the expected number of
    repetitions.  ``budget_prob`` budgets those repetitions from an a-priori
    lower bound instead of the exact probability; ``amplified`` uses the
    quadratically smaller amplitude-amplification count.
    """
    y, prob = apply_to_state(E, phi)
    if prob <= 1e-24:
        raise ZeroProbabilityError("post-selection annihilates the input state")
    p_budget = prob if budget_prob is None else min(budget_prob, 1.0)
    reps = repetitions(p_budget, amplified)
    led = E.ledger.scaled(reps, depth=False).tally("post_select")
    return PostSelected(y / math.sqrt(prob), prob, led)
