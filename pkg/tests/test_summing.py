import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablesum.errors import DomainError, ParameterError, RegimeRefusal
from stablesum.multilinear import (
    CodomainSpec,
    DenseOperator,
    hilbert_schmidt_norm,
    make_phi,
    random_dense_operator,
)
from stablesum.stable import constant_c, lp_norm
from stablesum.summing import (
    NormEstimate,
    Regime,
    SimpleFunction,
    basis_lower_bound,
    basis_weak_norm,
    estimate_pi,
    integral_moment,
    pietsch_domination_check,
    regime_classify,
    search_families,
    search_lower_bound,
    weak_p_norm,
)

SAMPLES = 2 * 10**5


# --- regimes -------------------------------------------------------------------------


@pytest.mark.parametrize(
    "r,q,p,tag,needle",
    [
        (2, 2, 7, Regime.EXACT, "r = q = 2"),
        (3, 1.8, 1, Regime.EXACT, "p < r' < 2"),
        (2, 1.5, 1.8, Regime.EQUIVALENT, "p, q < 2"),
        (2, 1.5, 1.5, Regime.EXACT, "p = q"),
        (2, 1.2, 3, Regime.EQUIVALENT, "q <= p"),
        (3, 1.2, 1.3, Regime.EQUIVALENT, "p < r' < 2, q <= 2"),
        (2, 3, 1, Regime.LOWER_BOUND_ONLY, "lower"),
        (3, 4, 1, Regime.LOWER_BOUND_ONLY, "lower"),
        (3, 1.5, 1.6, Regime.UNKNOWN, "unknown"),
        (1.5, 1, 1, Regime.UNKNOWN, "unknown"),
    ],
)
def test_regime_table(r, q, p, tag, needle):
    reg = regime_classify(r, q, p)
    assert reg.tag is tag
    assert needle in reg.branch


@settings(max_examples=200, deadline=None)
@given(r=st.floats(1, 10), q=st.floats(1, 10), p=st.floats(0.1, 5))
def test_regime_consistent_with_conditions(r, q, p):
    reg = regime_classify(r, q, p)
    rc = r / (r - 1) if r > 1 else math.inf
    stable_dom = p < rc < 2
    exact = (r == 2 and q == 2) or (r == 2 and (p < q < 2 or p == q)) or (
        stable_dom and (p < q <= 2 or p == q)
    )
    equiv = (r == 2 and p < 2 and q < 2) or (r == 2 and q <= p) or (stable_dom and q <= 2)
    lower = r == 2 or stable_dom
    expected = (
        Regime.EXACT if exact else Regime.EQUIVALENT if equiv else
        Regime.LOWER_BOUND_ONLY if lower else Regime.UNKNOWN
    )
    assert reg.tag is expected


@pytest.mark.parametrize("args", [(0, 1, 1), (2, 1, 0), (2, 1, -1), (0.5, 1, 1), (2, 0.5, 1)])
def test_regime_rejects_bad_exponents(args):
    with pytest.raises(ParameterError):
        regime_classify(*args)


# --- integral moment ------------------------------------------------------------------


def test_single_coordinate_moment_complex():
    T = DenseOperator(np.eye(4)[0], r=2)
    est = integral_moment(T, 2, n_samples=SAMPLES, seed=1, field="complex")
    assert abs(est.value - constant_c(2, 2, "complex").value) <= 3 * est.uncertainty


@pytest.mark.parametrize("p,r", [(1.0, 2), (1.5, 2)])
def test_phi_raw_moment(p, r):
    m, N = 2, 8
    est = integral_moment(make_phi(m, N, p, r=r), p, n_samples=SAMPLES, seed=2)
    oracle = constant_c(r / (r - 1), p).value ** m * N ** (1 / p)
    assert abs(est.value - oracle) <= 3 * est.uncertainty


def test_phi_raw_moment_heavy_tail():
    # infinite-variance integrand: compare at the 2% relative level
    m, N, p, r = 2, 8, 1.0, 3
    est = integral_moment(make_phi(m, N, p, r=r), p, n_samples=10**6, seed=2)
    oracle = constant_c(1.5, p).value ** m * N
    assert est.heavy_tail
    assert est.value == pytest.approx(oracle, rel=0.02)


def test_moment_homogeneity():
    T = random_dense_operator(2, 4, seed=3)
    base = integral_moment(T, 1, n_samples=SAMPLES, seed=4)
    for lam in (0.5, 2.0, -3.0):
        est = integral_moment(T.scaled(lam), 1, n_samples=SAMPLES, seed=4)
        assert est.value == pytest.approx(abs(lam) * base.value, rel=1e-12)


def test_pi_homogeneity_independent_streams():
    T = random_dense_operator(2, 4, seed=3, codomain=CodomainSpec.sequence(1.5, 3))
    base = estimate_pi(T, 1, n_samples=SAMPLES, seed=5)
    for i, lam in enumerate((0.5, 2.0, -3.0)):
        est = estimate_pi(T.scaled(lam), 1, n_samples=SAMPLES, seed=6 + i)
        tol = 3 * math.hypot(est.uncertainty, abs(lam) * base.uncertainty)
        assert abs(est.value - abs(lam) * base.value) <= tol


def test_permutation_invariance():
    T = random_dense_operator(2, 5, seed=8)
    perm = np.array([3, 0, 4, 1, 2])
    P = DenseOperator(T.coeffs[perm][:, perm], r=T.r, codomain=T.codomain)
    a = estimate_pi(T, 2, n_samples=SAMPLES, seed=1)
    b = estimate_pi(P, 2, n_samples=SAMPLES, seed=2)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.uncertainty, b.uncertainty)


def test_non_integrable_moment():
    with pytest.raises(DomainError):
        integral_moment(DenseOperator(np.ones(3), r=3), 1.6, n_samples=1000, blocks=10)


def test_no_stable_measure_for_r_below_two():
    with pytest.raises(DomainError):
        integral_moment(DenseOperator(np.ones(3), r=1.5), 1, n_samples=1000, blocks=10)


def test_too_few_samples():
    with pytest.raises(ParameterError):
        integral_moment(DenseOperator(np.ones(3)), 1, n_samples=10, blocks=64)


def test_complex_operator_needs_complex_field():
    T = random_dense_operator(1, 3, seed=0, field="complex")
    with pytest.raises(ParameterError):
        integral_moment(T, 1, n_samples=1000, blocks=10)


def test_heavy_tail_flag():
    T = DenseOperator(np.ones(3), r=3)
    assert integral_moment(T, 1, n_samples=1000, blocks=10).heavy_tail
    assert not integral_moment(T, 0.5, n_samples=1000, blocks=10).heavy_tail
    assert not integral_moment(T, 1, r=2, n_samples=1000, blocks=10).heavy_tail


# --- estimate_pi ---------------------------------------------------------------------


def test_linear_form_r3():
    T = DenseOperator(np.array([1.0, 1.0, 0.0, 0.0, 0.0]), r=3)
    est = estimate_pi(T, 1, n_samples=10**6, seed=3)
    assert est.regime.tag is Regime.EXACT
    assert abs(est.value - 2 ** (2 / 3)) <= 3 * est.uncertainty


def test_phi16_l1():
    est = estimate_pi(make_phi(2, 16, 1.0), 1, n_samples=SAMPLES, seed=4)
    assert abs(est.value - 16) <= 3 * est.uncertainty


def test_scalar_bilinear_p2_is_hilbert_schmidt():
    T = random_dense_operator(2, 5, seed=9)
    est = estimate_pi(T, 2, n_samples=SAMPLES, seed=5)
    assert abs(est.value - hilbert_schmidt_norm(T)) <= 3 * est.uncertainty


def test_complex_field_hilbert_schmidt():
    T = random_dense_operator(2, 3, seed=2, field="complex")
    est = estimate_pi(T, 2, n_samples=SAMPLES, seed=5, field="complex")
    assert abs(est.value - hilbert_schmidt_norm(T)) <= 3 * est.uncertainty


def test_unknown_regime_refused():
    with pytest.raises(RegimeRefusal, match="r' = 1.5"):
        estimate_pi(DenseOperator(np.ones(3), r=3), 1.6, n_samples=1000, blocks=10)
    T = random_dense_operator(1, 3, seed=0, codomain=CodomainSpec.sequence(1.5, 3), r=3)
    with pytest.raises(RegimeRefusal):
        estimate_pi(T, 1.6, n_samples=1000, blocks=10)


def test_estimate_round_trip():
    est = estimate_pi(make_phi(2, 3, 1.5), 1, n_samples=2000, blocks=20, seed=1)
    back = NormEstimate.from_dict(est.to_dict())
    assert back == est
    text = format(est.value, ".17g")
    assert float(text) == est.value


@pytest.mark.parametrize("workers", [2, 8])
def test_estimate_independent_of_workers(workers):
    T = make_phi(2, 6, 1.5)
    a = estimate_pi(T, 1, n_samples=20000, blocks=16, seed=3)
    b = estimate_pi(T, 1, n_samples=20000, blocks=16, seed=3, workers=workers)
    assert a == b and a.block_means == b.block_means


def test_estimate_resample_close():
    est = estimate_pi(make_phi(1, 4, 1.0), 1, n_samples=20000, blocks=32, seed=1)
    vals = [est.resample(np.random.default_rng(i)) for i in range(20)]
    assert max(abs(v - est.value) for v in vals) < 5 * est.uncertainty


# --- weak norms ------------------------------------------------------------------------


@pytest.mark.parametrize("p,r", [(1, 2), (1.5, 3), (2, 2), (0.8, 1.5)])
def test_weak_norm_single_vector(p, r):
    x = np.array([1.0, -2.0, 0.5])
    w = weak_p_norm(x, p, r)
    assert w.value == pytest.approx(lp_norm(x, r), rel=1e-12)
    assert w.exact


@pytest.mark.parametrize("p", [1.0, 1.7, 3.0])
def test_weak_norm_repeated_vector(p):
    x = np.array([1.0, 2.0, 2.0])
    assert weak_p_norm([x, x], p, 2).value == pytest.approx(2 ** (1 / p) * 3.0, rel=1e-12)


def test_weak_norm_basis():
    assert weak_p_norm(np.eye(4), 1, 2).value == pytest.approx(2.0, rel=1e-14)
    assert basis_weak_norm(16, 1, 2) == pytest.approx(4.0)
    assert basis_weak_norm(8, 3, 2) == 1.0


def test_weak_norm_certificate_attains_value(rng):
    Y = rng.standard_normal((5, 4))
    w = weak_p_norm(Y, 1.5, 3)
    assert lp_norm(w.certificate, 1.5) == pytest.approx(1.0, rel=1e-12)
    assert lp_norm(Y @ w.certificate, 1.5) == pytest.approx(w.value, rel=1e-12)


@pytest.mark.parametrize("p,r", [(1, 2), (1.5, 3), (2, 2), (0.7, 2), (3, 4), (1.3, 1.5)])
def test_weak_norm_dominates_random_functionals(rng, p, r):
    Y = rng.standard_normal((6, 4))
    w = weak_p_norm(Y, p, r)
    rc = r / (r - 1)
    G = rng.standard_normal((50000, 4))
    G /= lp_norm(G, rc)[:, None]
    brute = lp_norm(G @ Y.T, p).max()
    basis = lp_norm(Y, p, axis=0).max()
    assert w.value >= brute * (1 - 1e-9)
    assert w.value >= basis * (1 - 1e-12)


def test_weak_norm_sign_enumeration_matches_ascent(rng):
    Y = rng.standard_normal((5, 4))
    exact = weak_p_norm(Y, 1, 3)
    assert exact.method == "sign enumeration"
    approx = weak_p_norm(Y, 1 + 1e-12, 3)
    assert approx.value == pytest.approx(exact.value, rel=1e-6)


def test_weak_norm_complex(rng):
    Y = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    w = weak_p_norm(Y, 2, 2)
    assert w.value == pytest.approx(np.linalg.svd(Y, compute_uv=False)[0], rel=1e-12)
    w2 = weak_p_norm(Y, 2, 2 + 1e-9)
    assert w2.value == pytest.approx(w.value, rel=1e-6)


def test_weak_norm_empty():
    with pytest.raises(ParameterError):
        weak_p_norm(np.zeros((0, 3)), 1, 2)


# --- lower bounds -------------------------------------------------------------------------


def test_basis_bound_phi_m1():
    assert basis_lower_bound(make_phi(1, 16, 1.0), 1) == pytest.approx(4.0)


def test_basis_bound_rank_one():
    a, b = np.array([1.0, 2.0, 0.0]), np.array([0.0, 3.0, 4.0])
    T = DenseOperator(np.outer(a, b))
    assert basis_lower_bound(T, 2) == pytest.approx(np.linalg.norm(a) * np.linalg.norm(b))


def test_search_single_family_rank_one():
    a, b = np.array([1.0, 2.0, 0.0]), np.array([0.0, 3.0, 4.0])
    T = DenseOperator(np.outer(a, b))
    assert search_lower_bound(T, 2, J=1) == pytest.approx(np.linalg.norm(a) * np.linalg.norm(b), rel=1e-8)


def test_search_recovers_basis_bound():
    T = make_phi(2, 6, 1.0)
    assert search_lower_bound(T, 1, restarts=1) == pytest.approx(basis_lower_bound(T, 1), rel=1e-12)


def test_search_monotone_in_restarts():
    T = random_dense_operator(2, 3, seed=5)
    vals = [search_lower_bound(T, 1, restarts=k, seed=2) for k in (1, 2, 4)]
    assert vals[0] <= vals[1] <= vals[2]


def test_search_never_exceeds_estimate():
    T = random_dense_operator(2, 3, seed=6, codomain=CodomainSpec.sequence(1.5, 2))
    res = search_families(T, 1, restarts=3)
    est = estimate_pi(T, 1, n_samples=SAMPLES, seed=1)
    assert res.weak_norms_exact
    assert basis_lower_bound(T, 1) <= res.value * (1 + 1e-12)
    assert res.value <= est.value * (1 + 3 * est.rel_uncertainty)


def test_search_rejects_complex():
    with pytest.raises(ParameterError):
        search_lower_bound(random_dense_operator(1, 2, seed=0, field="complex"), 1)


# --- domination ---------------------------------------------------------------------------


def test_domination_constant_functions():
    T = make_phi(2, 8, 1.0)
    fs = [tuple(SimpleFunction(np.eye(8)[[0]], [1.0]) for _ in range(2))]
    rep = pietsch_domination_check(T, 1, functions=fs, n_samples=SAMPLES)
    assert rep.passed and rep.ratios[0] == pytest.approx(1.0)


def test_domination_random_two_point_on_phi8():
    rep = pietsch_domination_check(make_phi(2, 8, 1.0), 1, n_random=100, n_samples=SAMPLES)
    assert rep.passed and rep.n_checked == 100 and rep.min_margin > 0


def test_domination_identity_function_case():
    T = random_dense_operator(2, 4, seed=1, codomain=CodomainSpec.sequence(2, 4))
    rep = pietsch_domination_check(T, 2, n_random=10, n_samples=SAMPLES)
    tol = 3 * math.sqrt(2) * rep.pi_estimate.rel_uncertainty
    assert abs(rep.identity_ratio - 1) <= tol


def test_domination_requires_exact():
    T = random_dense_operator(2, 3, seed=0, codomain=CodomainSpec.sequence(1.2, 3))
    with pytest.raises(RegimeRefusal):
        pietsch_domination_check(T, 1.8, n_samples=1000, blocks=10)


def test_simple_function_validation():
    with pytest.raises(ParameterError):
        SimpleFunction(np.ones((2, 3)), [1.0])
