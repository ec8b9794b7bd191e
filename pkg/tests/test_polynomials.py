import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vndilate.certify import failing_polynomial
from vndilate.errors import CapacityError, DomainError, InvalidInputError, StructureError
from vndilate.linalg import operator_norm, outer, random_unitary
from vndilate.polynomials import (
    MatrixPolynomial,
    evaluate_matrix_tuple,
    evaluate_scalar_point,
    grid_values,
    mobius,
    mobius_inverse,
    mobius_of_matrix,
    multi_indices,
    random_scalar_polynomial,
    sample_sup_composed,
    sup_norm_torus,
)
from vndilate.tuples import build_counterexample, random_commuting_contractions

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def z_poly(n, *ks, coeffs=None):
    coeffs = coeffs or [1.0] * len(ks)
    return MatrixPolynomial.scalar(n, dict(zip(ks, coeffs)))


def test_multi_indices_counts():
    assert len(multi_indices(4, 3)) == math.comb(7, 3)
    assert multi_indices(2, 1) == [(0, 0), (1, 0), (0, 1)]


def test_polynomial_validation():
    with pytest.raises(InvalidInputError):
        MatrixPolynomial(2, 1, 1, {(1,): np.ones((1, 1))})
    with pytest.raises(InvalidInputError):
        MatrixPolynomial(1, 2, 1, {(1,): np.ones((1, 1))})
    p = MatrixPolynomial.scalar(2, {(1, 0): 0.0, (0, 1): 2.0})
    assert list(p.terms) == [(0, 1)]  # zero coefficients pruned


def test_evaluate_scalar_point_examples():
    assert evaluate_scalar_point(z_poly(2, (1, 0), (0, 1)), [1, 1])[0, 0] == 2
    assert evaluate_scalar_point(z_poly(2, (2, 0)), [1j, 7.0])[0, 0] == pytest.approx(-1)
    p = failing_polynomial()
    col = evaluate_scalar_point(p, [1, 0, 0, 0])[:, 0]
    R = np.vstack([p.coefficient((1, 0, 0, 0))[:, 0]])
    assert np.allclose(col, R[0])
    with pytest.raises(InvalidInputError):
        evaluate_scalar_point(p, [1, 0])


def test_evaluate_matrix_tuple_examples():
    T = build_counterexample()
    assert np.array_equal(evaluate_matrix_tuple(z_poly(4, (1, 0, 0, 0)), T), T[0])
    assert np.array_equal(evaluate_matrix_tuple(z_poly(4, (1, 1, 0, 0)), T), np.zeros((3, 3)))
    M = evaluate_matrix_tuple(failing_polynomial(), T)
    assert M.shape == (6, 3)
    assert operator_norm(M) ** 2 == pytest.approx(4, abs=1e-12)


def test_evaluate_matrix_tuple_refuses_noncommuting():
    X = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(StructureError):
        evaluate_matrix_tuple(z_poly(2, (1, 1)), [X, X.T])
    with pytest.raises(InvalidInputError):
        evaluate_matrix_tuple(z_poly(3, (1, 1, 0)), [X, X])


def test_high_degree_monomials_vanish_on_counterexample():
    T = build_counterexample()
    for k in multi_indices(4, 4):
        if sum(k) >= 2:
            assert not np.any(evaluate_matrix_tuple(z_poly(4, k), T))


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_evaluation_linear_and_multiplicative(seed):
    rng = np.random.default_rng(seed)
    T = random_commuting_contractions(3, 3, seed % 1000, "poly-of-seed-matrix")
    p, q = random_scalar_polynomial(3, 2, rng), random_scalar_polynomial(3, 2, rng)
    pa, qa = evaluate_matrix_tuple(p, T), evaluate_matrix_tuple(q, T)
    assert operator_norm(evaluate_matrix_tuple(p + q, T) - pa - qa) <= 1e-10
    assert operator_norm(evaluate_matrix_tuple(p * q, T) - pa @ qa) <= 1e-10
    assert operator_norm(evaluate_matrix_tuple(p * 2.5j, T) - 2.5j * pa) <= 1e-10


def test_sup_single_variable():
    for mesh in (8, 16, 64):
        est = sup_norm_torus(z_poly(1, (1,)), mesh=mesh)
        assert est.lower == pytest.approx(1, abs=1e-14)
        assert est.certified and est.certified_upper <= 1 + math.pi / mesh


def test_sup_sum_of_variables():
    est = sup_norm_torus(z_poly(2, (1, 0), (0, 1)), mesh=16)
    assert est.lower == pytest.approx(2, abs=1e-12)
    assert est.lower <= est.certified_upper


def _oracle_failing_sup(params=None, mesh=128):
    # sup of ||R z|| on the torus; the phase of z_1 is irrelevant, so fix z_1 = 1 and scan three angles
    R = np.vstack([c[:, 0] for _, c in sorted(failing_polynomial(params).terms.items(), reverse=True)]).T
    ang = np.exp(2j * np.pi * np.arange(mesh) / mesh)
    best = 0.0
    for a in ang:
        z2 = a
        vals = R[:, 0, None, None] + R[:, 1, None, None] * z2 + R[:, 2, None, None] * ang[None, :, None] \
            + R[:, 3, None, None] * ang[None, None, :]
        best = max(best, float(np.sqrt((np.abs(vals) ** 2).sum(axis=0)).max()))
    return best


def test_failing_polynomial_sup_certified_below_two():
    est = sup_norm_torus(failing_polynomial(), mesh=64)
    oracle = _oracle_failing_sup(mesh=128)
    assert est.certified_upper < 2
    assert oracle <= est.certified_upper
    assert est.lower <= oracle + 1e-4


def test_argmax_reevaluates_to_lower():
    rng = np.random.default_rng(4)
    p = random_scalar_polynomial(3, 3, rng)
    est = sup_norm_torus(p, mesh=32)
    z = np.exp(1j * np.array(est.argmax_point))
    assert abs(operator_norm(evaluate_scalar_point(p, z)) - est.lower) <= 1e-12


def test_sup_monotone_on_nested_meshes_and_gap_shrinks():
    rng = np.random.default_rng(5)
    p = random_scalar_polynomial(2, 3, rng)
    prev = None
    for mesh in (16, 32, 64, 128):
        est = sup_norm_torus(p, mesh=mesh, refine=0)
        if prev is not None:
            assert est.grid_max >= prev.grid_max - 1e-15
            assert est.gap <= prev.gap + 1e-15
        # first-order bound is O(1/mesh)
        assert est.lipschitz_bound - est.grid_max <= p.lipschitz_constant() * math.pi / mesh * math.sqrt(2) + 1e-15
        prev = est


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_certified_upper_dominates_random_samples(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    p = random_scalar_polynomial(n, int(rng.integers(1, 5)), rng)
    est = sup_norm_torus(p, mesh=16)
    z = np.exp(2j * np.pi * rng.random((400, n)))
    sampled = max(operator_norm(evaluate_scalar_point(p, zi)) for zi in z)
    assert sampled <= est.certified_upper
    assert est.lower <= est.certified_upper


def test_grid_values_fft_and_vandermonde_agree_with_direct():
    rng = np.random.default_rng(6)
    for deg, mesh in ((2, 8), (9, 8), (3, 16)):
        p = random_scalar_polynomial(2, deg, rng)
        vals = grid_values(p, mesh, ())
        for a in range(mesh):
            for b in range(0, mesh, 3):
                z = np.exp(2j * np.pi * np.array([a, b]) / mesh)
                assert abs(vals[0, 0, a, b] - evaluate_scalar_point(p, z)[0, 0]) <= 1e-13
        lead = grid_values(p, mesh, (3,))
        assert np.allclose(lead[0, 0], vals[0, 0, 3], atol=1e-13)


def test_sup_errors():
    with pytest.raises(InvalidInputError):
        sup_norm_torus(z_poly(1, (1,)), mesh=4)
    with pytest.raises(CapacityError, match="coarser"):
        sup_norm_torus(failing_polynomial(), mesh=128)


def test_matrix_valued_sup_uses_operator_norm():
    C = np.array([[1, 0], [0, 1j]], dtype=complex)
    p = MatrixPolynomial(1, 2, 2, {(1,): C, (0,): np.eye(2)})
    est = sup_norm_torus(p, mesh=64)
    # ||I + zC|| = max(|1+z|, |1+iz|) = 2
    assert est.lower == pytest.approx(2, abs=1e-12)


def test_mobius_scalar():
    rng = np.random.default_rng(7)
    for _ in range(100):
        lam = 0.95 * rng.random() * np.exp(2j * np.pi * rng.random())
        w = np.exp(2j * np.pi * rng.random())
        assert abs(mobius(lam, lam)) == 0
        assert abs(abs(mobius(lam, w)) - 1) <= 1e-14
        assert abs(mobius(lam, mobius_inverse(lam, w)) - w) <= 1e-13
        assert mobius_inverse(lam, 0) == pytest.approx(lam)
    assert mobius(0, 0.3 + 0.1j) == 0.3 + 0.1j
    assert mobius_inverse(0, 0.3 + 0.1j) == 0.3 + 0.1j
    with pytest.raises(DomainError):
        mobius(0.5, 2.0)
    with pytest.raises(InvalidInputError):
        mobius(1.0, 0.0)


def test_mobius_of_matrix():
    rng = np.random.default_rng(8)
    lam = 0.3 - 0.4j
    assert operator_norm(mobius_of_matrix(lam, lam * np.eye(3))) <= 1e-15
    f = np.array([1, 0, 0], dtype=complex)
    N = outer(np.array([0, 0.3, 0.4j]), f)
    B = mobius_of_matrix(lam, lam * np.eye(3) + N)
    assert operator_norm(B - N / (1 - abs(lam) ** 2)) <= 1e-12
    U = random_unitary(4, rng)
    V = mobius_of_matrix(0.5, U)
    assert operator_norm(V.conj().T @ V - np.eye(4)) <= 1e-11
    for _ in range(100):
        lam = 0.9 * rng.random() * np.exp(2j * np.pi * rng.random())
        M = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        M /= operator_norm(M)
        back = mobius_of_matrix(lam, mobius_of_matrix(lam, M, inverse=True))
        assert operator_norm(back - M) <= 1e-11
    with pytest.raises(InvalidInputError):
        mobius_of_matrix(0.2, 2 * np.eye(2))


def test_sample_sup_composed():
    rng = np.random.default_rng(9)
    p = random_scalar_polynomial(2, 3, rng)
    plain = sup_norm_torus(p, mesh=32, refine=0)
    assert abs(sample_sup_composed(p, [0, 0], mesh=32).lower - plain.lower) <= 1e-12
    q = random_scalar_polynomial(1, 3, rng)
    a = sample_sup_composed(q, [0.3], mesh=512).lower
    b = sup_norm_torus(q, mesh=512).lower
    assert abs(a - b) <= 1e-3
    c = MatrixPolynomial.scalar(2, {(0, 0): 0.25 - 0.5j})
    est = sample_sup_composed(c, [0.1, 0.2j], mesh=8)
    assert est.lower == abs(0.25 - 0.5j) and not est.certified and est.certified_upper is None


def test_polynomial_serialization_roundtrip():
    p = failing_polynomial()
    q = MatrixPolynomial.from_dict(p.to_dict())
    assert set(q.terms) == set(p.terms)
    assert all(np.array_equal(q.terms[k], p.terms[k]) for k in p.terms)
    with pytest.raises(InvalidInputError):
        MatrixPolynomial.from_dict({"num_vars": 1})
