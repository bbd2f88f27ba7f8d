"""Hamiltonian simulation, directly and through discretized linear systems.

Direct route: encode ``H/2`` with the shifted construction of
:mod:`blockenc.qlsa`, apply the Jacobi-Anger polynomial for ``e^{−iHt}``
and post-select on the initial state.

Indirect route: discretize ``dψ/dt = −iHψ`` on ``N`` steps into a square
block system ``Lψ = (ψ₀, 0, …, 0)``, Hermitize it by the dilation
``[[0, L], [L†, 0]]`` and solve it with the general linear solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import encoding as enc
from . import numerics as nx
from . import polytransform as pt
from . import qlsa
from .encoding import BlockEncoding, CostLedger, StageRecord
from .errors import DomainError, ShapeError, ValidationError

# Multistep presets over the window l = −K..K.  Leapfrog is the K = 1 central
# difference; the K = 2 entry is third-order Adams-Bashforth placed in the
# five-point window.  Both are presets, not values taken from any table.
LEAPFROG = ((-1.0, 0.0, 1.0), (0.0, 2.0, 0.0))
ADAMS_BASHFORTH3 = ((0.0, 0.0, -1.0, 1.0, 0.0), (5.0 / 12.0, -16.0 / 12.0, 23.0 / 12.0, 0.0, 0.0))
PRESETS = {1: LEAPFROG, 2: ADAMS_BASHFORTH3}


@dataclass(frozen=True, eq=False)
class SimProblem:
    """Evolution of ``psi0`` under ``H`` (or a per-step sequence ``H_k``) for time ``t``."""

    H: object
    t: float
    psi0: np.ndarray
    eps: float = 1e-3
    K: int = 1

    def __post_init__(self):
        if self.t < 0:
            raise DomainError(f"t must be nonnegative, got {self.t}")
        if not 0 < self.eps < 1:
            raise DomainError(f"eps must lie in (0, 1), got {self.eps}")
        if self.K < 1:
            raise DomainError(f"K must be ≥ 1, got {self.K}")
        x = nx.as_vector(self.psi0)
        if abs(np.linalg.norm(x) - 1.0) > 1e-9:
            raise ValidationError("psi0 must be a unit vector")
        x.setflags(write=False)
        object.__setattr__(self, "psi0", x)
        if isinstance(self.H, (list, tuple)) and np.ndim(self.H) == 3:
            Hs = tuple(_hermitian_block(h, x.size) for h in self.H)
            if not Hs:
                raise ValidationError("time-dependent Hamiltonian sequence is empty")
            object.__setattr__(self, "H", Hs)
        else:
            object.__setattr__(self, "H", _hermitian_block(self.H, x.size))

    @property
    def n(self) -> int:
        return self.psi0.size

    @property
    def time_dependent(self) -> bool:
        return isinstance(self.H, tuple)

    @property
    def h_max(self) -> float:
        """Largest entry magnitude ``‖H‖_max`` (over all steps if time dependent)."""
        Hs = self.H if self.time_dependent else (self.H,)
        return float(max(np.max(np.abs(h)) for h in Hs))


def _hermitian_block(h, n: int) -> np.ndarray:
    M = nx.check_hermitian(h)
    if M.shape[0] != n:
        raise ShapeError(f"Hamiltonian is {M.shape[0]}×{M.shape[0]}, state has length {n}")
    M = 0.5 * (M + M.conj().T)
    M.setflags(write=False)
    return M


# -- direct simulation ----------------------------------------------------------


class EncodedHamiltonian(NamedTuple):
    """Encoding of ``(H/scale)/2`` and the ingestion ``scale``."""

    encoding: BlockEncoding
    scale: float
    eighth: BlockEncoding


def hamiltonian_scale(H) -> float:
    """Factor ``H`` is divided by before encoding: ``2‖H‖₂`` above norm 0.99, else 1."""
    return qlsa.shift_ready(H)[1]


def encode_hamiltonian(H, eps: float = 1e-10) -> EncodedHamiltonian:
    """``H/8`` by the shifted construction, amplified by 4 to ``H/2``.

    A Hamiltonian with spectral norm above 0.99 is first divided by
    ``scale = 2‖H‖₂`` so the shifted matrix stays well conditioned.
    ``eps`` bounds the tracked error of the ``H/2`` encoding.
    """
    if not 0 < eps < 0.5:
        raise DomainError(f"eps must lie in (0, 1/2), got {eps}")
    M = nx.check_hermitian(H)
    M = 0.5 * (M + M.conj().T)
    M, scale = qlsa.shift_ready(M)
    # 4·(eps/8) forwarded plus eps/2 relative on a block of norm ≤ 1/2
    pre = qlsa.eighth_encoding(M, eps / 8.0)
    half = enc.amplify_safely(pre.encoding, 4.0, eps / 2.0).replace(origin="hamiltonian")
    return EncodedHamiltonian(half, scale, pre.encoding)


@dataclass(frozen=True, eq=False)
class DirectResult:
    """Post-selected evolved state; ``raw_norm`` is the branch norm before normalizing."""

    state: np.ndarray
    raw_norm: float
    eps_bound: float
    ledger: CostLedger
    poly: pt.PolySpec
    stages: tuple = field(default=())


def simulate_direct(p: SimProblem) -> DirectResult:
    """``e^{−iHt}ψ₀`` from a Jacobi-Anger polynomial of the encoded ``H/2``."""
    if p.time_dependent:
        raise DomainError("direct simulation needs a time-independent Hamiltonian")
    eps_poly = p.eps / 2.0
    # the encoding is built once the scale is known; the degree fixes its budget
    tau = 2.0 * hamiltonian_scale(p.H) * p.t
    P = pt.jacobi_anger_poly(tau, eps_poly)
    # the transform's robustness term 4d·√ε_enc must stay below eps/2
    eps_enc = min(0.25, (p.eps / (8.0 * max(P.degree, 1))) ** 2)
    eh = encode_hamiltonian(p.H, eps_enc)
    U = pt.apply_poly(eh.encoding, P)
    ps = enc.post_select(U, p.psi0)
    stages = (
        StageRecord.of("hamiltonian", eh.encoding),
        StageRecord.of("jacobi_anger", U),
        StageRecord.of_ledger("post_select", "post_select", ps.ledger, U.eps),
    )
    return DirectResult(ps.state, math.sqrt(ps.prob), U.eps, ps.ledger, P, stages)


# -- discretized systems ----------------------------------------------------------


def choose_steps(t: float, eps: float, K: int) -> int:
    """``N = ceil(t^{1+1/K}/ε^{1/K})`` with constant 1, at least 2."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    if not 0 < eps <= 1:
        raise DomainError(f"eps must lie in (0, 1], got {eps}")
    if K < 1:
        raise DomainError(f"K must be ≥ 1, got {K}")
    # float noise can push an exact integer just above itself
    N = t ** (1.0 + 1.0 / K) / eps ** (1.0 / K)
    return max(2, int(math.ceil(N * (1.0 - 1e-12))))


@dataclass(frozen=True, eq=False)
class StepSystem:
    """Square block system ``L·(ψ₀, …, ψ_N) = rhs`` of dimension ``n(N+1)``."""

    L: np.ndarray
    rhs: np.ndarray
    N: int
    n: int
    delta: float

    @property
    def dim(self) -> int:
        return self.L.shape[0]

    def dilation(self) -> qlsa.LinearSystem:
        """Hermitian ``[[0, L], [L†, 0]]/(2‖L‖₂)`` with rhs ``(b, 0)``.

        The dilation's spectrum is ``±σ(L)``, so dividing by ``2‖L‖₂`` keeps
        the shifted matrix of the general solver well conditioned.
        """
        d = self.dim
        Hd = np.zeros((2 * d, 2 * d), dtype=complex)
        Ls = self.L / (2.0 * nx.spectral_norm(self.L))
        Hd[:d, d:] = Ls
        Hd[d:, :d] = Ls.conj().T
        rhs = np.concatenate([self.rhs, np.zeros(d, dtype=complex)])
        return qlsa.LinearSystem.create(Hd, rhs)


def _check_coeffs(alphas, betas) -> tuple[np.ndarray, np.ndarray, int]:
    a = np.asarray(alphas, dtype=float)
    b = np.asarray(betas, dtype=float)
    if a.ndim != 1 or a.size != b.size or a.size % 2 == 0 or a.size < 3:
        raise ValidationError("alphas and betas need the same odd length 2K+1 ≥ 3")
    if abs(a.sum()) > 1e-12:
        raise ValidationError(f"multistep coefficients are inconsistent: Σα = {a.sum():.3e}")
    return a, b, (a.size - 1) // 2


def _build(Hs: Sequence[np.ndarray], t: float, N: int, psi0: np.ndarray, alphas, betas) -> StepSystem:
    """Core builder; every discretization goes through here.

    Block rows, one per unknown ``ψ_j``:

    * ``ψ₀ = ψ₀`` pins the initial condition;
    * ``iΔH₀ψ₀ + ψ₁ = ψ₀`` is the printed first row (forward Euler);
    * ``ψ_{k+1} − ψ_{k−1} + 2iΔH_kψ_k = 0`` for ``k < K`` and for tail rows
      whose multistep window would pass ``N``;
    * ``Σ_l α_lψ_{k+l} + iΔΣ_l β_lH_{k+l}ψ_{k+l} = 0`` otherwise.
    """
    if N < 2:
        raise DomainError(f"N must be ≥ 2, got {N}")
    if len(Hs) != N + 1:
        raise ValidationError(f"need {N + 1} Hamiltonians H_0..H_N, got {len(Hs)}")
    a, b, K = _check_coeffs(alphas, betas)
    offsets = np.arange(-K, K + 1)
    active = offsets[(a != 0) | (b != 0)]
    l_max = int(active.max())
    if l_max < 1:
        raise ValidationError("multistep window never reaches a later step")
    n = psi0.size
    delta = t / N
    dim = n * (N + 1)
    L = np.zeros((dim, dim), dtype=complex)
    I = np.eye(n)

    def blk(row: int, col: int, M):
        L[row * n:(row + 1) * n, col * n:(col + 1) * n] += M

    blk(0, 0, I)
    blk(1, 0, 1j * delta * Hs[0])
    blk(1, 1, I)
    row = 2
    for k in range(1, N):
        if k < K or k + l_max > N:
            blk(row, k - 1, -I)
            blk(row, k, 2j * delta * Hs[k])
            blk(row, k + 1, I)
        else:
            for l, al, be in zip(offsets, a, b):
                if al == 0 and be == 0:
                    continue
                j = k + l
                blk(row, j, al * I + 1j * delta * be * Hs[j])
        row += 1
    if row != N + 1:
        raise ValidationError("multistep window leaves the system non-square")
    rhs = np.zeros(dim, dtype=complex)
    rhs[:n] = psi0
    # the Euler row's right side is ψ₀ as printed
    rhs[n:2 * n] = psi0
    return StepSystem(L, rhs, N, n, delta)


def build_multistep_system(p: SimProblem, N: int, alphas, betas) -> StepSystem:
    if p.time_dependent:
        raise DomainError("use build_time_dependent_system for a Hamiltonian sequence")
    return _build([p.H] * (N + 1), p.t, N, p.psi0, alphas, betas)


def build_central_difference_system(p: SimProblem, N: int) -> StepSystem:
    """Leapfrog system with the forward-Euler first step."""
    return build_multistep_system(p, N, *LEAPFROG)


def build_time_dependent_system(p: SimProblem, N: int, alphas, betas) -> StepSystem:
    """Multistep system whose row terms use the step Hamiltonian ``H_{k+l}``."""
    Hs = p.H if p.time_dependent else (p.H,) * (N + 1)
    return _build(list(Hs), p.t, N, p.psi0, alphas, betas)


@dataclass(frozen=True, eq=False)
class TrajectoryResult:
    """Per-step states read off the solver output.

    ``states[k]`` is the normalized ``k``-th block; ``raw_norms[k]`` is its
    norm relative to the pinned ``ψ₀`` block.
    """

    states: tuple
    N: int
    delta: float
    kappa_system: float
    ledger: CostLedger
    raw_norms: tuple = ()
    success_prob: float = float("nan")
    stages: tuple = field(default=())


def solve_step_system(system: StepSystem, eps: float, *, amplified: bool = False) -> TrajectoryResult:
    """Solve via the Hermitian dilation and split the second block into steps."""
    lin = system.dilation()
    res = qlsa.solve_general(lin, min(eps, 0.25), amplified=amplified)
    d = system.dim
    v = res.state[d:]
    n = system.n
    blocks = [v[k * n:(k + 1) * n] for k in range(system.N + 1)]
    norms = [float(np.linalg.norm(x)) for x in blocks]
    if norms[0] == 0.0:
        raise ValidationError("solver output has a vanishing initial block")
    states = tuple(x / nrm if nrm > 0 else x for x, nrm in zip(blocks, norms))
    stages = res.stages + (StageRecord.of_ledger("trajectory", "dilation", res.ledger, res.eps_bound),)
    return TrajectoryResult(
        states=states,
        N=system.N,
        delta=system.delta,
        kappa_system=nx.cond_number(system.L),
        ledger=res.ledger,
        raw_norms=tuple(x / norms[0] for x in norms),
        success_prob=res.success_prob,
        stages=stages,
    )


def simulate_via_solver(
    p: SimProblem,
    method: str = "central",
    *,
    N: int | None = None,
    alphas=None,
    betas=None,
    amplified: bool = False,
) -> TrajectoryResult:
    """Trajectory ``ψ₀..ψ_N`` from a discretized system.

    ``method`` is ``central``, ``multistep`` or ``time_dependent``; missing
    coefficients default to the preset for ``p.K``.  ``N`` defaults to
    :func:`choose_steps`.
    """
    if N is None:
        if p.time_dependent:
            N = len(p.H) - 1
        else:
            N = choose_steps(p.t, p.eps, p.K) if p.t > 0 else 2
    if method == "central":
        system = build_central_difference_system(p, N)
    elif method in ("multistep", "time_dependent"):
        if alphas is None or betas is None:
            if p.K not in PRESETS:
                raise DomainError(f"no preset coefficients for K = {p.K}; pass alphas and betas")
            alphas, betas = PRESETS[p.K]
        if method == "multistep":
            system = build_multistep_system(p, N, alphas, betas)
        else:
            system = build_time_dependent_system(p, N, alphas, betas)
    else:
        raise DomainError(f"unknown discretization {method!r}")
    return solve_step_system(system, p.eps, amplified=amplified)


def exact_trajectory(H, t: float, N: int, psi0) -> list[np.ndarray]:
    """``e^{−iHkΔ}ψ₀`` for ``k = 0..N`` (static ``H``)."""
    x = nx.as_vector(psi0)
    delta = t / N
    return [nx.expm_oracle(H, k * delta) @ x for k in range(N + 1)]


def trajectory_error(result: TrajectoryResult, truth: Sequence[np.ndarray]) -> float:
    """Largest per-step 2-norm deviation from a reference trajectory."""
    return float(max(np.linalg.norm(s - nx.as_vector(x)) for s, x in zip(result.states, truth)))
