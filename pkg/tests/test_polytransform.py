import numpy as np
import pytest
from hypothesis import given, strategies as st

from blockenc import encoding as enc
from blockenc import numerics as nx
from blockenc import polytransform as pt
from blockenc.errors import ApproximationError, DomainError, ParityError, SpectrumError

seeds = st.integers(0, 2**32 - 1)
GRID = np.linspace(-1, 1, 2001)


def poly(f, d):
    return pt.fit_chebyshev(f, d, 1e-12, "test")


def test_exp_filter_examples():
    P0 = pt.exp_filter_poly(0.0, 1e-6)
    assert np.max(np.abs(P0(GRID) - 1)) <= 1e-6
    P1 = pt.exp_filter_poly(1.0, 1e-6)
    assert abs(P1(1.0) - 1) <= 1e-6
    P2 = pt.exp_filter_poly(2.0, 1e-4)
    assert np.max(np.abs(P2(GRID) - np.exp(-2 * (1 - GRID)))) <= 1e-4
    assert P2.sup_error <= 1e-4
    assert P2.degree_bound == pt.exp_filter_degree(2.0, 1e-4)
    for bad in (0.0, 0.6):
        with pytest.raises(DomainError):
            pt.exp_filter_poly(1.0, bad)


def test_jacobi_anger_examples():
    P = pt.jacobi_anger_poly(0.0, 1e-3)
    assert np.allclose(P(GRID), 1)
    P = pt.jacobi_anger_poly(1.0, 1e-8)
    assert np.max(np.abs(P(GRID) - np.exp(-1j * GRID))) <= 1e-8
    degs = [pt.jacobi_anger_degree(t, 1e-6) for t in (1, 2, 4, 8)]
    assert all(d2 <= 2 * d1 for d1, d2 in zip(degs, degs[1:]))
    with pytest.raises(DomainError):
        pt.jacobi_anger_poly(-1.0, 1e-3)


def test_jacobi_anger_cap_uses_real_parts():
    P = pt.jacobi_anger_poly(3.0, 1e-6)
    # cosine and sine parts each reach about 1, so the cap factor is about 2
    assert 1.9 <= P.qsvt_scale <= 2.2


def test_fit_escalation_limit():
    with pytest.raises(ApproximationError):
        pt.fit_chebyshev(np.abs, 1, 1e-8, "abs", max_factor=4)


def test_apply_poly_examples():
    E = enc.from_matrix(np.diag([0.3, -0.7]))
    ident = pt.apply_poly(E, poly(lambda x: x, 1))
    assert np.allclose(ident.encoded, E.encoded)
    sq = pt.apply_poly(enc.from_matrix(np.diag([0.5, -0.5])), poly(lambda x: x**2, 2))
    assert np.allclose(sq.encoded, np.diag([0.25, 0.25]))
    P = pt.exp_filter_poly(3.0, 1e-5)
    F = pt.apply_poly(enc.from_matrix(np.diag([1, 0.5])), P)
    assert np.max(np.abs(F.encoded - np.diag([1, np.exp(-1.5)]))) <= 1e-5
    assert F.alpha == 1 and F.ancillas == E.ancillas + 2
    assert F.queries == P.degree
    # exp filter peaks at 1, so the |P| ≤ 1/2 cap needs a factor 2 rescale
    assert P.qsvt_scale == pytest.approx(2.0, rel=1e-4)
    assert F.ledger.lemma_counts.get("qsvt_rescale") == 1


def test_apply_poly_errors_and_eps():
    with pytest.raises(ParityError):
        pt.apply_poly(enc.from_matrix([[0, 0.5], [0, 0]]), poly(lambda x: x, 1))
    E = enc.from_matrix(np.diag([0.5, 0.1]), eps=1e-6)
    P = poly(lambda x: x**3, 3)
    F = pt.apply_poly(E, P)
    assert F.eps == pytest.approx(4 * 3 * np.sqrt(1e-6) + P.sup_error)


@given(seeds, st.integers(1, 16))
def test_functional_calculus(seed, n):
    rng = np.random.default_rng(seed)
    H = nx.random_hermitian(rng, n)
    H = 0.95 * H / nx.spectral_norm(H)
    P = pt.exp_filter_poly(1.5, 1e-6)
    F = pt.apply_poly(enc.from_matrix(H), P)
    w, V = np.linalg.eigh(H)
    ref = (V * np.exp(-1.5 * (1 - w))) @ V.conj().T
    assert np.max(np.abs(F.encoded - ref)) <= 1e-9 + P.sup_error


def test_apply_poly_singular(rng):
    A = rng.standard_normal((3, 3))
    A = 0.8 * A / nx.spectral_norm(A)
    F = pt.apply_poly_singular(enc.from_matrix(A), poly(lambda x: x, 1))
    assert np.allclose(F.encoded, A)


def test_rank1_transform_matches_dense(rng):
    u = nx.normalize(rng.standard_normal(4) + 1j * rng.standard_normal(4))
    v = nx.normalize(rng.standard_normal(4))
    P = pt.exp_filter_poly(2.0, 1e-6)
    R = pt.rank1_transform(u, v, 0.6, P, enc.CostLedger(1, 1.0))
    D = pt.apply_poly_singular(enc.from_matrix(0.6 * np.outer(u, v.conj())), P)
    assert np.allclose(R.encoded @ v, D.encoded @ v, atol=1e-12)
    assert np.allclose(u.conj() @ R.encoded, u.conj() @ D.encoded, atol=1e-12)
    # off the rank-1 part both are P(0) times a partial isometry
    Q = np.eye(4) - np.outer(v, v.conj())
    sv = np.linalg.svd(R.encoded @ Q, compute_uv=False)
    assert np.allclose(sv[:3], abs(P(0.0)))
    # far below the float range the product still follows P(0)
    tiny = pt.rank1_transform(u, v, 0.0, P, enc.CostLedger(1, 1.0))
    assert np.allclose(tiny.encoded @ v, P(0.0) * u)


def test_neg_power_examples():
    F = pt.neg_power(enc.identity_encoding(2), 1.0, 1.0, 1e-3)
    assert np.allclose(F.encoded, np.eye(2) / 2)
    F = pt.neg_power(enc.from_matrix(np.diag([1, 0.25])), 0.5, 4.0, 1e-3)
    assert np.allclose(F.encoded, np.diag([0.25, 0.5]))
    F = pt.neg_power(enc.from_matrix(np.diag([1, 0.5])), 1.0, 2.0, 1e-3)
    assert np.allclose(F.encoded, np.diag([1, 2]) / 4)
    mult = 2.0 * 2.0 * np.log2(2.0**2 / 1e-3) ** 2
    assert F.queries == int(np.ceil(mult - 1e-9))


def test_neg_power_indefinite_inverse():
    F = pt.neg_power(enc.from_matrix(np.diag([0.5, -1.0])), 1.0, 2.0, 1e-3)
    assert np.allclose(F.encoded, np.diag([2, -1]) / 4)
    with pytest.raises(SpectrumError):
        pt.neg_power(enc.from_matrix(np.diag([0.5, -1.0])), 0.5, 2.0, 1e-3)


def test_neg_power_errors():
    E = enc.from_matrix(np.diag([1, 0.1]))
    with pytest.raises(SpectrumError):
        pt.neg_power(E, 1.0, 2.0, 1e-3)
    with pytest.raises(DomainError):
        pt.neg_power(E, 0.0, 10.0, 1e-3)
    with pytest.raises(DomainError):
        pt.neg_power(E, 1.0, 0.5, 1e-3)


def test_pos_power_examples():
    F = pt.pos_power(enc.identity_encoding(3), 0.5, 1.0, 1e-3)
    assert np.allclose(F.encoded, np.eye(3) / 2)
    F = pt.pos_power(enc.from_matrix(np.diag([1, 0.25])), 0.5, 4.0, 1e-3)
    assert np.allclose(F.encoded, np.diag([0.5, 0.25]))
    with pytest.raises(DomainError):
        pt.pos_power(enc.identity_encoding(2), 1.0, 1.0, 1e-3)


@given(seeds, st.sampled_from([0.25, 0.5, 0.75, 1.0]), st.floats(1.5, 8.0))
def test_neg_power_then_product(seed, c, kappa):
    rng = np.random.default_rng(seed)
    lam = np.concatenate([[1.0, 1 / kappa], rng.uniform(1 / kappa, 1.0, 3)])
    A = nx.planted_hermitian(rng, lam)
    E = enc.from_matrix(A)
    F = pt.neg_power(E, c, kappa, 1e-4)
    P = enc.product(F, E)
    w, V = np.linalg.eigh(A)
    ref = (V * w ** (1 - c)) @ V.conj().T / (2 * kappa**c)
    assert nx.spectral_norm(P.encoded - ref) <= P.eps + 1e-9


@pytest.mark.parametrize("c", [0.5, 1.0])
def test_strict_neg_power_within_eps(rng, c):
    lam = [1.0, 0.5, 0.25]
    A = nx.planted_hermitian(rng, lam)
    E = enc.from_matrix(A)
    exact = pt.neg_power(E, c, 4.0, 1e-3)
    strict = pt.neg_power(E, c, 4.0, 1e-3, strict=True)
    assert nx.spectral_norm(exact.encoded - strict.encoded) <= 1e-3


def test_strict_pos_power_within_eps(rng):
    A = nx.planted_hermitian(rng, [1.0, 0.4, 0.2])
    E = enc.from_matrix(A)
    exact = pt.pos_power(E, 0.5, 5.0, 1e-3)
    strict = pt.pos_power(E, 0.5, 5.0, 1e-3, strict=True)
    assert nx.spectral_norm(exact.encoded - strict.encoded) <= 1e-3


def test_smallest_kappa():
    assert pt.smallest_kappa(enc.from_matrix(np.diag([1, 0.25]))) == pytest.approx(4)
    assert pt.smallest_kappa(enc.from_matrix(np.diag([0.5, -0.1])), indefinite=True) == pytest.approx(10)
    with pytest.raises(SpectrumError):
        pt.smallest_kappa(enc.from_matrix(np.diag([0.5, -0.1])))
