"""Classical-data ingestion: amplitude states, Gram and centroid encodings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import encoding as enc
from . import numerics as nx
from .encoding import BlockEncoding, CostLedger
from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class PreparedState:
    """Unit amplitude vector plus the norm that was divided out."""

    amplitudes: np.ndarray
    norm_scale: float
    sparsity: int
    ledger: CostLedger = field(default_factory=CostLedger)

    @property
    def dim(self) -> int:
        return self.amplitudes.size


def _prep_depth(s: int, dim: int) -> float:
    return max(1.0, math.log2(max(s, 1) * max(math.log2(dim), 1.0)))


def prepare_state(v) -> PreparedState:
    """Amplitude-encode a nonzero vector; depth ``log₂(s·log₂ n)``."""
    x = nx.as_vector(v)
    nrm = float(np.linalg.norm(x))
    if nrm == 0.0:
        raise ValidationError("cannot prepare the zero vector")
    s = int(np.count_nonzero(x))
    amps = x / nrm
    amps.setflags(write=False)
    led = CostLedger(1, _prep_depth(s, x.size), {"state_prep": 1})
    return PreparedState(amps, nrm, s, led)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sample matrix with rows rescaled so that ``Σᵢ‖xⁱ‖² = 1``.

    ``global_scale`` is the factor the raw rows were divided by, so raw
    covariance eigenvalues are ``global_scale²`` times the normalized ones.
    """

    rows: np.ndarray
    global_scale: float

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @property
    def n(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def from_rows(cls, rows) -> "Dataset":
        X = np.asarray(rows, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.size == 0:
            raise ValidationError("dataset must be a nonempty m×n array")
        if not np.all(np.isfinite(X)):
            raise ValidationError("dataset has non-finite entries")
        scale = float(np.linalg.norm(X))
        if scale == 0.0:
            raise ValidationError("dataset is identically zero")
        Xn = X / scale
        Xn.setflags(write=False)
        return cls(Xn, scale)

    def raw_rows(self) -> np.ndarray:
        return self.rows * self.global_scale


def pair_state(X: Dataset) -> PreparedState:
    """The state ``Σᵢⱼ xⁱⱼ|i⟩|j⟩`` (row-major flatten)."""
    amps = X.rows.reshape(-1).astype(complex)
    if abs(np.linalg.norm(amps) - 1.0) > 1e-10:
        raise ValidationError("dataset is not normalized")
    amps.setflags(write=False)
    mn = X.m * X.n
    led = CostLedger(1, max(1.0, math.log2(mn)), {"state_prep": 1})
    return PreparedState(amps, 1.0, int(np.count_nonzero(amps)), led)


def gram_encoding(X: Dataset) -> BlockEncoding:
    """Encoding of ``XᵀX``: trace the sample register out of the pair state."""
    st = pair_state(X)
    return enc.density_from_state(st.amplitudes, X.m, source=st.ledger)


def _next_pow2(m: int) -> int:
    return 1 << (m - 1).bit_length()


def centroid_encoding(X: Dataset, *, pad: bool = True) -> BlockEncoding:
    """Encoding of ``μμᵀ`` with ``μ = (1/m)Σᵢxⁱ``.

    Hadamards on the (zero-padded) sample register turn the pair state into
    one whose sample-zero branch is ``(Σᵢxⁱ)/√m'``.  The density of that state
    restricted to the branch gives ``(1/m')SSᵀ``, and a final scaling by
    ``m²/m'`` leaves ``μμᵀ`` with the true ``m`` as the divisor.  Only the
    branch is formed; the discarded sample register counts as ancillas.
    """
    m = X.m
    mp = _next_pow2(m)
    if mp != m and not pad:
        raise ValidationError(f"m = {m} is not a power of two and padding is disabled")
    st = pair_state(X)
    # first row of H^{⊗log m'} is uniform, so the sample-zero branch is ΣᵢXᵢ/√m'
    branch = X.rows.sum(axis=0).astype(complex) / math.sqrt(mp)
    src = st.ledger.tally("hadamard", depth=1.0)
    E = enc.outer_encoding(branch, source=src)
    E = E.replace(ancillas=E.ancillas + enc.qubits(mp))
    p = m * m / mp
    if p > 1:
        E = enc.scale_down(E, p)
    return E.replace(origin="centroid")


def planted_dataset(rng: np.random.Generator, spectrum, m: int, *, offset: float = 0.3) -> Dataset:
    """Dataset whose covariance (before normalization) has the given spectrum.

    Centered rows are built from an orthonormal basis of the sample space
    orthogonal to the all-ones vector, so the spectrum is exact; a random
    common offset is then added, which leaves the covariance unchanged.
    """
    lam = np.asarray(spectrum, dtype=float)
    n = lam.size
    if np.any(lam < 0):
        raise ValidationError("covariance spectrum must be nonnegative")
    if m < n + 1:
        raise ValidationError(f"need m ≥ n + 1 samples for an exact spectrum, got m = {m}, n = {n}")
    V = nx.random_unitary(rng, n, real=True).real
    Q, _ = np.linalg.qr(np.column_stack([np.ones(m), rng.standard_normal((m, n))]))
    centered = math.sqrt(m) * (Q[:, 1:n + 1] * np.sqrt(lam)) @ V.T
    return Dataset.from_rows(centered + offset * rng.standard_normal(n))
