import numpy as np
import pytest
from hypothesis import given, strategies as st

from blockenc import numerics as nx
from blockenc.errors import ShapeError, SingularityError, SymmetryError, ValidationError

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 32)


def test_hermitian_eig_diagonal():
    w, V = nx.hermitian_eig(np.diag([0.3, 0.9]))
    assert np.allclose(w, [0.9, 0.3])
    assert np.allclose(V, [[0, 1], [1, 0]])


def test_hermitian_eig_identity():
    w, V = nx.hermitian_eig(np.eye(2))
    assert np.allclose(w, [1, 1])
    assert np.allclose(V.conj().T @ V, np.eye(2))


def test_hermitian_eig_pauli_x():
    w, V = nx.hermitian_eig([[0, 1], [1, 0]])
    assert np.allclose(w, [1, -1])
    assert np.allclose(V[:, 0], np.array([1, 1]) / np.sqrt(2))
    assert nx.overlap(V[:, 1], np.array([1, -1]) / np.sqrt(2)) == pytest.approx(1.0)


def test_hermitian_eig_errors():
    with pytest.raises(ShapeError):
        nx.hermitian_eig(np.ones((2, 3)))
    with pytest.raises(SymmetryError):
        nx.hermitian_eig([[0, 1], [0, 0]])
    with pytest.raises(ValidationError):
        nx.hermitian_eig(np.eye(2), method="qr")


@given(seeds, dims)
def test_hermitian_eig_properties(seed, n):
    M = nx.random_hermitian(np.random.default_rng(seed), n)
    w, V = nx.hermitian_eig(M)
    assert np.all(np.diff(w) <= 0)
    assert np.max(np.abs(M @ V - V * w)) <= 1e-9 * max(1.0, np.abs(w).max())
    assert np.max(np.abs(V.conj().T @ V - np.eye(n))) <= 1e-9
    assert np.max(np.abs((V * w) @ V.conj().T - M)) <= 1e-8
    # phase convention: largest entry of each column is real positive
    for j in range(n):
        top = V[np.argmax(np.abs(V[:, j])), j]
        assert abs(top.imag) <= 1e-12 and top.real > 0


@given(seeds, st.integers(1, 12))
def test_jacobi_matches_lapack(seed, n):
    M = nx.random_hermitian(np.random.default_rng(seed), n)
    w1, V1 = nx.hermitian_eig(M)
    w2, V2 = nx.hermitian_eig(M, method="jacobi")
    assert np.allclose(w1, w2, atol=1e-9)
    assert np.max(np.abs(M @ V2 - V2 * w2)) <= 1e-9 * max(1.0, np.abs(w2).max())


def test_svd_examples():
    assert np.allclose(nx.svd(np.diag([2, 1]))[1], [2, 1])
    assert np.allclose(nx.svd(np.zeros((3, 3)))[1], 0)
    assert np.allclose(nx.svd([[0, 1], [0, 0]])[1], [1, 0])


@given(seeds, st.integers(1, 10), st.integers(1, 10))
def test_svd_reconstructs(seed, m, n):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    U, s, V = nx.svd(M)
    assert np.max(np.abs((U * s) @ V.conj().T - M)) <= 1e-9
    assert np.allclose(U.conj().T @ U, np.eye(U.shape[1]), atol=1e-9)
    assert np.allclose(V.conj().T @ V, np.eye(V.shape[1]), atol=1e-9)
    assert np.all(np.diff(s) <= 0)


def test_expm_examples():
    assert np.allclose(nx.expm_oracle(np.zeros((3, 3)), 2.5), np.eye(3))
    assert np.allclose(nx.expm_oracle(np.diag([0.5, -0.5]), 1.0), np.diag([np.exp(-0.5j), np.exp(0.5j)]))
    H = nx.random_hermitian(np.random.default_rng(0), 4)
    assert np.allclose(nx.expm_oracle(H, 0.0), np.eye(4))
    with pytest.raises(SymmetryError):
        nx.expm_oracle([[0, 1], [0, 0]], 1.0)


@given(seeds, st.integers(1, 16), st.floats(-5, 5))
def test_expm_unitary_and_inverse(seed, n, t):
    H = nx.random_hermitian(np.random.default_rng(seed), n)
    U = nx.expm_oracle(H, t)
    assert np.max(np.abs(U.conj().T @ U - np.eye(n))) <= 1e-9
    assert np.max(np.abs(U @ nx.expm_oracle(H, -t) - np.eye(n))) <= 1e-8


def test_inverse_and_cond_examples():
    assert np.allclose(nx.inverse_oracle(np.diag([1, 0.5])), np.diag([1, 2]))
    assert nx.cond_number(np.diag([1, 0.5])) == pytest.approx(2.0)
    assert np.allclose(nx.inverse_oracle(np.eye(3)), np.eye(3))
    assert nx.cond_number(np.eye(3)) == pytest.approx(1.0)
    assert nx.cond_number([[2, 1], [1, 2]]) == pytest.approx(3.0)
    with pytest.raises(SingularityError):
        nx.inverse_oracle([[1, 1], [1, 1]])
    assert nx.cond_number(np.zeros((2, 2))) == np.inf


@given(seeds, st.integers(1, 16))
def test_inverse_property(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + np.eye(n) * n
    assert np.max(np.abs(A @ nx.inverse_oracle(A) - np.eye(n))) <= 1e-8


def test_partial_trace_examples():
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(nx.partial_trace_first(bell, 2), np.eye(2) / 2)
    with pytest.raises(ShapeError):
        nx.partial_trace_first(np.ones(6) / np.sqrt(6), 4)


def test_normalize_and_planted():
    with pytest.raises(ValidationError):
        nx.normalize(np.zeros(3))
    H = nx.planted_hermitian(np.random.default_rng(3), [0.9, 0.5, -0.2])
    assert np.allclose(np.linalg.eigvalsh(H)[::-1], [0.9, 0.5, -0.2])
    U = nx.random_unitary(np.random.default_rng(3), 5)
    assert np.allclose(U.conj().T @ U, np.eye(5))
