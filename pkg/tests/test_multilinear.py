import json
import math

import numpy as np
import pytest

from stablesum import multilinear as ml
from stablesum.errors import DomainError, ParameterError
from stablesum.multilinear import (
    CodomainSpec,
    DenseOperator,
    DiagonalOperator,
    compose_diagonal,
    evaluate,
    hilbert_schmidt_norm,
    make_phi,
    maximize_norm,
    random_dense_operator,
    random_sign_operator,
    sup_norm,
)


def test_phi_basis_evaluation():
    assert np.array_equal(evaluate(make_phi(2, 2, 2), [1, 0], [1, 0]), [1.0, 0.0])


def test_phi_coordinate_products():
    assert np.array_equal(evaluate(make_phi(2, 2, 2), [1, 1], [1, -1]), [1.0, -1.0])


def test_phi_m1_is_identity(rng):
    z = rng.standard_normal(3)
    assert np.allclose(evaluate(make_phi(1, 3, 1), z), z)


def test_linear_case_is_matrix_product(rng):
    A = rng.standard_normal((4, 5))
    T = DenseOperator(A.T, codomain=CodomainSpec.sequence(2, 4))
    z = rng.standard_normal(5)
    assert np.allclose(evaluate(T, z), A @ z, rtol=1e-13)


@pytest.mark.parametrize("slot", [0, 1, 2])
def test_multilinearity(rng, slot):
    T = random_dense_operator(3, 4, seed=3, codomain=CodomainSpec.sequence(1.5, 2))
    zs = [rng.standard_normal(4) for _ in range(3)]
    u, v = rng.standard_normal(4), rng.standard_normal(4)
    lam = -1.7

    def at(x):
        args = list(zs)
        args[slot] = x
        return evaluate(T, *args)

    lhs = at(lam * u + v)
    rhs = lam * at(u) + at(v)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(rhs).max())


def test_complex_scaling(rng):
    T = random_dense_operator(2, 3, seed=1, field="complex")
    x, y = rng.standard_normal(3) + 1j, rng.standard_normal(3)
    assert evaluate(T, 2j * x, y) == pytest.approx(2j * evaluate(T, x, y), rel=1e-13)


def test_diagonal_matches_dense(rng):
    D = DiagonalOperator(rng.standard_normal((3, 5)), q=1.5)
    Z = rng.standard_normal((3, 100, 5))
    assert np.allclose(D.evaluate_batch(Z), D.to_dense().evaluate_batch(Z), rtol=1e-12)


def test_dimension_mismatch():
    with pytest.raises(ParameterError):
        evaluate(make_phi(2, 3, 1), [1, 0, 0], [1, 0])
    with pytest.raises(ParameterError):
        evaluate(make_phi(2, 3, 1), [1, 0, 0])


def test_size_guard():
    with pytest.raises(ParameterError):
        make_phi(5, 60, 1).to_dense()


def test_operators_are_immutable():
    T = random_dense_operator(2, 3, seed=0)
    with pytest.raises(ValueError):
        T.coeffs[0, 0, 0] = 1.0


# --- norms ---------------------------------------------------------------------------


def test_rank_one_sup_norm():
    a, b = np.array([1.0, 2.0, -2.0]), np.array([3.0, 0.0, 4.0])
    T = DenseOperator(np.outer(a, b))
    assert sup_norm(T) == pytest.approx(15.0, rel=1e-10)
    assert hilbert_schmidt_norm(T) == pytest.approx(15.0, rel=1e-14)


@pytest.mark.parametrize("m,q", [(2, 1.0), (3, 1.0), (2, 2.0), (3, 1.5)])
def test_phi_sup_norm_is_one(m, q):
    assert sup_norm(make_phi(m, 4, q)) == pytest.approx(1.0, rel=1e-10)


def test_matrix_sup_norm_is_top_singular_value(rng):
    A = rng.standard_normal((6, 5))
    T = DenseOperator(A, codomain=CodomainSpec.sequence(2, 5))
    # oracle: power iteration on A^T A
    v = np.ones(6)
    for _ in range(5000):
        v = A @ (A.T @ v)
        v /= np.linalg.norm(v)
    sigma = np.linalg.norm(A.T @ v)
    assert sup_norm(T) == pytest.approx(sigma, rel=1e-8)


def test_complex_matrix_sup_norm(rng):
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    T = DenseOperator(A, codomain=CodomainSpec.sequence(2, 4))
    assert sup_norm(T) == pytest.approx(np.linalg.svd(A, compute_uv=False)[0], rel=1e-8)


def test_sup_norm_monotone_in_restarts():
    T = random_sign_operator(2, 6, 1.5, seed=4)
    vals = [sup_norm(T, restarts=k) for k in (1, 2, 4, 8, 16)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_sup_norm_reports_convergence():
    res = maximize_norm(random_dense_operator(2, 4, seed=2), restarts=4)
    assert res.converged and res.value > 0
    assert len(res.maximizer) == 2


def test_spectral_below_frobenius(rng):
    for seed in range(5):
        T = random_dense_operator(1, 6, seed=seed, codomain=CodomainSpec.sequence(2, 6))
        assert sup_norm(T) <= hilbert_schmidt_norm(T) * (1 + 1e-9)


def test_hs_diagonal_unit():
    D = DiagonalOperator(np.ones((2, 3)), q=2)
    assert hilbert_schmidt_norm(D) == pytest.approx(math.sqrt(3), rel=1e-15)


def test_hs_matches_enumeration():
    T = random_dense_operator(3, 3, seed=5, codomain=CodomainSpec.sequence(2, 2))
    total = 0.0
    for i in range(3):
        for j in range(3):
            for k in range(3):
                e = np.eye(3)
                total += np.sum(np.abs(evaluate(T, e[i], e[j], e[k])) ** 2)
    assert hilbert_schmidt_norm(T) == pytest.approx(math.sqrt(total), rel=1e-13)


def test_hs_requires_l2():
    with pytest.raises(DomainError):
        hilbert_schmidt_norm(make_phi(2, 3, 1))


# --- constructions ----------------------------------------------------------------------


def test_compose_identity_diagonal():
    T = random_dense_operator(2, 4, seed=1, codomain=CodomainSpec.sequence(1, 3))
    assert np.array_equal(compose_diagonal(T, np.ones(4)).coeffs, T.coeffs)


def test_compose_phi_weight():
    s = np.ones((2, 4))
    s[0] = [2, 0, 0, 0]
    e1 = np.eye(4)[0]
    assert np.allclose(evaluate(compose_diagonal(make_phi(2, 4, 1), s), e1, e1), 2 * e1)


def test_compose_matches_scaled_inputs(rng):
    T = random_dense_operator(3, 4, seed=9)
    s = rng.standard_normal((3, 4))
    zs = [rng.standard_normal(4) for _ in range(3)]
    direct = evaluate(T, *(si * zi for si, zi in zip(s, zs)))
    assert evaluate(compose_diagonal(T, s), *zs) == pytest.approx(direct, rel=1e-12)


def test_compose_wrong_shape():
    with pytest.raises(ParameterError):
        compose_diagonal(make_phi(2, 4, 1), np.ones((3, 4)))


def test_sign_operator_entries():
    T = random_sign_operator(2, 5, 1.5, seed=7)
    assert set(np.unique(T.coeffs)) == {-1.0, 1.0}
    assert np.array_equal(T.coeffs, random_sign_operator(2, 5, 1.5, seed=7).coeffs)
    assert not np.array_equal(T.coeffs, random_sign_operator(2, 5, 1.5, seed=8).coeffs)


@pytest.mark.parametrize("q", [1.0, 1.5, 2.0])
def test_sign_operator_columns(q):
    N = 6
    T = random_sign_operator(2, N, q, seed=1)
    assert np.allclose(T.basis_values(), N ** (1 / q), rtol=1e-14)


def _brute_bilinear_norm(T, starts=400):
    # exhaustive-style calibration: many restarts at N = 4
    return sup_norm(T, restarts=starts, seed=99)


def test_sign_operator_norm_band():
    m = 2
    calib = _brute_bilinear_norm(random_sign_operator(m, 4, 2.0, seed=0)) / 2.0
    c_m = 2.0 * calib
    for N in (4, 8, 16, 32):
        ratio = sup_norm(random_sign_operator(m, N, 2.0, seed=N), restarts=8) / math.sqrt(N)
        assert 0.5 <= ratio <= c_m, (N, ratio)


# --- documents ------------------------------------------------------------------------


@pytest.mark.parametrize(
    "T",
    [
        make_phi(3, 4, 1.5),
        random_dense_operator(2, 3, seed=1),
        random_dense_operator(2, 3, seed=2, field="complex", codomain=CodomainSpec.sequence(math.inf, 2)),
        DenseOperator(np.array([0.1, 1 / 3, -2e-300]), r=3),
    ],
)
def test_document_round_trip(T):
    back = ml.loads(ml.dumps(T))
    assert type(back) is type(T)
    assert np.array_equal(back._data, T._data)
    assert back.r == T.r and back.codomain == T.codomain


def test_round_trip_through_17_digit_decimals():
    T = random_dense_operator(2, 3, seed=4)
    doc = ml.to_document(T)
    doc["coefficients"] = [float(format(v, ".17g")) for v in doc["coefficients"]]
    assert np.array_equal(ml.from_document(doc).coeffs, T.coeffs)


def test_flat_row_major_order():
    a = np.arange(8.0).reshape(2, 2, 2)
    doc = ml.to_document(DenseOperator(a, codomain=CodomainSpec.sequence(2, 2)))
    assert doc["coefficients"] == list(range(8))


@pytest.mark.parametrize(
    "text",
    [
        "not json",
        "[]",
        json.dumps({"format": "other"}),
        json.dumps({"format": ml.FORMAT_TAG, "m": 1, "N": 2, "r": 2, "codomain": {"kind": "scalar"},
                    "representation": "dense", "coefficients": [1.0]}),
        json.dumps({"format": ml.FORMAT_TAG, "m": 1}),
    ],
)
def test_malformed_documents(text):
    with pytest.raises(ParameterError):
        ml.loads(text)


def test_save_load(tmp_path):
    T = make_phi(2, 3, 1.0)
    ml.save(T, tmp_path / "t.json")
    assert np.array_equal(ml.load(tmp_path / "t.json").weights, T.weights)
