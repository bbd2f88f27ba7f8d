import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blockenc import hamsim as hs
from blockenc import numerics as nx
from blockenc.errors import DomainError, ShapeError, ValidationError
from blockenc.hamsim import ADAMS_BASHFORTH3, LEAPFROG, SimProblem

seeds = st.integers(0, 2**32 - 1)
E0 = np.array([1, 0], dtype=complex)


def unit_h(seed, n):
    H = nx.random_hermitian(np.random.default_rng(seed), n)
    return H / nx.spectral_norm(H)


# -- direct --------------------------------------------------------------------------


def test_encode_hamiltonian_examples(rng):
    eh = hs.encode_hamiltonian(np.zeros((2, 2)))
    assert np.allclose(eh.encoding.encoded, 0)
    H = np.diag([0.5, -0.5])
    eh = hs.encode_hamiltonian(H)
    assert np.allclose(eh.eighth.encoded, H / 8, atol=1e-12)
    assert np.allclose(eh.encoding.encoded, H / 2, atol=1e-12)
    H = nx.random_hermitian(rng, 8)
    eh = hs.encode_hamiltonian(H)
    assert np.max(np.abs(2 * eh.scale * eh.encoding.encoded - H)) <= 1e-9 * eh.scale
    assert eh.scale == pytest.approx(2 * nx.spectral_norm(H))
    assert eh.encoding.eps <= 1e-10


def test_direct_time_zero(rng):
    psi = nx.normalize(rng.standard_normal(4) + 1j * rng.standard_normal(4))
    r = hs.simulate_direct(SimProblem(unit_h(0, 4), 0.0, psi, 1e-6))
    assert np.allclose(r.state, psi, atol=1e-9)


def test_direct_diagonal_phases():
    psi = np.array([1, 1]) / np.sqrt(2)
    r = hs.simulate_direct(SimProblem(np.diag([0.5, -0.5]), math.pi, psi, 1e-6))
    assert np.linalg.norm(r.state - np.array([-1j, 1j]) / np.sqrt(2)) <= 1e-6


def test_direct_random_t3(rng):
    H = nx.random_hermitian(rng, 8)
    psi = nx.normalize(rng.standard_normal(8) + 1j * rng.standard_normal(8))
    r = hs.simulate_direct(SimProblem(H, 3.0, psi, 1e-6))
    assert np.linalg.norm(r.state - nx.expm_oracle(H, 3.0) @ psi) <= 1e-6
    assert abs(r.raw_norm - 1) <= 1e-6
    assert r.eps_bound <= 1e-6
    assert r.ledger.queries > 0


@settings(max_examples=10)
@given(seeds, st.floats(0.1, 4.0))
def test_direct_unitarity(seed, t):
    rng = np.random.default_rng(seed)
    H = unit_h(seed, 4)
    psi = nx.normalize(rng.standard_normal(4))
    r = hs.simulate_direct(SimProblem(H, t, psi, 1e-4))
    assert abs(r.raw_norm - 1) <= 1e-4
    assert np.linalg.norm(r.state - nx.expm_oracle(H, t) @ psi) <= 1e-4


def test_direct_unit_norm_hamiltonian():
    H = np.diag([1.0, -1.0, 0.2])
    psi = nx.normalize([1, 1, 1])
    r = hs.simulate_direct(SimProblem(H, 2.0, psi, 1e-6))
    assert np.linalg.norm(r.state - nx.expm_oracle(H, 2.0) @ psi) <= 1e-6


def test_direct_rejects_sequence():
    p = SimProblem([np.zeros((2, 2))] * 3, 1.0, E0)
    with pytest.raises(DomainError):
        hs.simulate_direct(p)


# -- step counts ----------------------------------------------------------------------


def test_choose_steps_examples():
    assert hs.choose_steps(4, 1e-2, 1) == 1600
    assert hs.choose_steps(1, 1, 1) == 2
    assert hs.choose_steps(1, 1e-2, 1) == 100
    with pytest.raises(DomainError):
        hs.choose_steps(0, 1e-2, 1)
    with pytest.raises(DomainError):
        hs.choose_steps(1, 2, 1)


def test_choose_steps_large_K_limit():
    t = 7.3
    assert abs(hs.choose_steps(t, 0.5, 10**6) - math.ceil(t)) <= 1


# -- builders --------------------------------------------------------------------------


def test_central_difference_free_evolution():
    p = SimProblem(np.zeros((2, 2)), 1.0, nx.normalize([1, 1j]))
    sysm = hs.build_central_difference_system(p, 2)
    x = np.linalg.solve(sysm.L, sysm.rhs)
    for k in range(3):
        assert np.allclose(x[2 * k:2 * k + 2], p.psi0)


def test_central_difference_scalar_hand_case():
    omega, t, N = 0.7, 1.0, 2
    p = SimProblem([[omega]], t, [1.0])
    sysm = hs.build_central_difference_system(p, N)
    d = t / N
    expected = np.array([[1, 0, 0], [1j * d * omega, 1, 0], [-1, 2j * d * omega, 1]])
    assert np.array_equal(sysm.L, expected)
    x = np.linalg.solve(sysm.L, sysm.rhs)
    psi1 = (1 - 1j * d * omega) * 1.0
    psi2 = 1.0 - 2j * d * omega * psi1
    assert np.allclose(x, [1.0, psi1, psi2])
    tr = hs.solve_step_system(sysm, 1e-2)
    ref = np.array([1.0, psi1, psi2])
    for k in range(3):
        assert np.allclose(tr.states[k], ref[k] / abs(ref[k]), atol=1e-6)


def test_central_difference_bandwidth(rng):
    n, N = 2, 6
    p = SimProblem(unit_h(1, n), 1.0, E0)
    L = hs.build_central_difference_system(p, N).L
    assert L.shape == (n * (N + 1), n * (N + 1))
    for i in range(N + 1):
        for j in range(N + 1):
            blk = L[i * n:(i + 1) * n, j * n:(j + 1) * n]
            if abs(i - j) > 2 or j > i:
                assert not blk.any()
    # row k+1 couples ψ_{k-1}, ψ_k, ψ_{k+1}: one block either side of the diagonal block ψ_k
    assert L[2 * n:3 * n, 0:n].any() and L[2 * n:3 * n, 2 * n:3 * n].any()


def test_multistep_leapfrog_bit_identical():
    p = SimProblem(unit_h(2, 3), 2.0, nx.normalize([1, 2, 3]))
    a = hs.build_central_difference_system(p, 9)
    b = hs.build_multistep_system(p, 9, (-1, 0, 1), (0, 2, 0))
    assert np.array_equal(a.L, b.L) and np.array_equal(a.rhs, b.rhs)


@pytest.mark.parametrize("coeffs", [LEAPFROG, ADAMS_BASHFORTH3])
def test_multistep_zero_hamiltonian(coeffs):
    p = SimProblem(np.zeros((2, 2)), 1.0, nx.normalize([1, -1j]))
    s = hs.build_multistep_system(p, 8, *coeffs)
    x = np.linalg.solve(s.L, s.rhs)
    assert np.allclose(x.reshape(-1, 2), p.psi0)


def test_multistep_order_improves():
    H = unit_h(5, 2)
    p = SimProblem(H, 1.0, E0, K=2)
    truth = hs.exact_trajectory(H, 1.0, 16, E0)
    e1 = hs.trajectory_error(hs.simulate_via_solver(p, "central", N=16), truth)
    e2 = hs.trajectory_error(hs.simulate_via_solver(p, "multistep", N=16), truth)
    assert e2 <= e1


def test_multistep_validation():
    p = SimProblem(np.zeros((2, 2)), 1.0, E0)
    with pytest.raises(ValidationError):
        hs.build_multistep_system(p, 4, (-1, 1), (0, 1))
    with pytest.raises(ValidationError):
        hs.build_multistep_system(p, 4, (-1, 0, 2), (0, 2, 0))
    with pytest.raises(DomainError):
        hs.build_multistep_system(p, 1, *LEAPFROG)


def test_time_dependent_constant_identical():
    H = unit_h(3, 2)
    N = 10
    static = hs.build_multistep_system(SimProblem(H, 1.5, E0), N, *LEAPFROG)
    seq = hs.build_time_dependent_system(SimProblem([H] * (N + 1), 1.5, E0), N, *LEAPFROG)
    assert np.array_equal(static.L, seq.L) and np.array_equal(static.rhs, seq.rhs)


def test_time_dependent_zero_ramp():
    N = 6
    Hs = [(k / N) * np.zeros((2, 2)) for k in range(N + 1)]
    s = hs.build_time_dependent_system(SimProblem(Hs, 1.0, E0), N, *LEAPFROG)
    x = np.linalg.solve(s.L, s.rhs)
    assert np.allclose(x.reshape(-1, 2), E0)
    with pytest.raises(ValidationError):
        hs.build_time_dependent_system(SimProblem(Hs[:-1], 1.0, E0), N, *LEAPFROG)


def test_time_dependent_matches_step_product():
    X = np.array([[0, 1], [1, 0]])
    Z = np.diag([1.0, -1.0])
    t, N = 1.0, 64
    d = t / N
    Hs = [0.5 * Z + 0.3 * math.sin(k * d) * X for k in range(N + 1)]
    tr = hs.simulate_via_solver(SimProblem(Hs, t, E0, 1e-2), "time_dependent", N=N)
    psi = E0.copy()
    for k in range(N):
        Hmid = 0.5 * Z + 0.3 * math.sin((k + 0.5) * d) * X
        psi = nx.expm_oracle(Hmid, d) @ psi
    assert np.linalg.norm(tr.states[-1] - psi) <= 5e-3


def test_problem_validation():
    with pytest.raises(DomainError):
        SimProblem(np.zeros((2, 2)), -1.0, E0)
    with pytest.raises(ValidationError):
        SimProblem(np.zeros((2, 2)), 1.0, [1, 1])
    with pytest.raises(ShapeError):
        SimProblem(np.zeros((3, 3)), 1.0, E0)
    with pytest.raises(DomainError):
        SimProblem(np.zeros((2, 2)), 1.0, E0, K=0)
    assert SimProblem(np.diag([0.3, -0.8]), 1.0, E0).h_max == pytest.approx(0.8)


# -- solver route ------------------------------------------------------------------------


def test_solver_zero_hamiltonian():
    p = SimProblem(np.zeros((2, 2)), 1.0, nx.normalize([1, 1j]), 1e-2)
    tr = hs.simulate_via_solver(p, "central", N=4)
    for s in tr.states:
        assert nx.overlap(s, p.psi0) == pytest.approx(1.0, abs=1e-6)
    assert tr.kappa_system < 20
    assert tr.N * tr.delta == pytest.approx(1.0, abs=1e-9)


def test_solver_matches_direct_solve():
    H = unit_h(4, 2)
    p = SimProblem(H, 1.0, E0, 1e-2)
    s = hs.build_central_difference_system(p, 16)
    x = np.linalg.solve(s.L, s.rhs).reshape(-1, 2)
    tr = hs.solve_step_system(s, 1e-2)
    for k in range(17):
        assert nx.overlap(tr.states[k], x[k]) >= 1 - 1e-4
    assert np.allclose(tr.raw_norms, np.linalg.norm(x, axis=1), atol=1e-3)


def test_kappa_grows_linearly():
    H = unit_h(1, 2)
    p = SimProblem(H, 1.0, E0)
    Ns = np.array([8, 16, 32, 64])
    ks = [nx.cond_number(hs.build_central_difference_system(p, int(N)).L) for N in Ns]
    slope = np.polyfit(np.log(Ns), np.log(ks), 1)[0]
    assert slope <= 1.2


def test_unknown_method():
    p = SimProblem(np.zeros((2, 2)), 1.0, E0, K=3)
    with pytest.raises(DomainError):
        hs.simulate_via_solver(p, "rk4", N=4)
    with pytest.raises(DomainError):
        hs.simulate_via_solver(p, "multistep", N=4)
