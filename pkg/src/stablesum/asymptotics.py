"""Growth rates of summing norms in the dimension, and related envelope checks."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .errors import DomainError, ParameterError, RegimeRefusal
from .multilinear import (
    CodomainSpec,
    MultilinearOperator,
    apply_multipliers,
    conjugate,
    make_phi,
    maximize_norm,
    random_dense_operator,
    random_sign_operator,
)
from .rng import derive_stream, make_generator
from .stable import Field, constant_c, lp_norm
from .summing import (
    DEFAULT_BLOCKS,
    DEFAULT_SAMPLES,
    NormEstimate,
    Regime,
    _regime_for,
    estimate_pi,
)

__all__ = [
    "LimitOrderQuery",
    "SlopeFit",
    "GammaBoundReport",
    "WitnessReport",
    "ContractionReport",
    "InclusionReport",
    "lambda_formula",
    "limit_order_fit",
    "gamma_ratio_bound",
    "gaussian_norm_moment",
    "optimality_witness",
    "contraction_check",
    "contraction_envelope",
    "inclusion_ratio",
    "sweep_csv",
    "SLOPE_TOLERANCE",
]

SLOPE_TOLERANCE = 0.1
BOOTSTRAP_DRAWS = 200


def _region(m: int, r: float, q: float) -> tuple[int, float]:
    if m < 1 or int(m) != m:
        raise ParameterError(f"m must be a positive integer, got {m}")
    if r < 1 or not 1 <= q <= 2:
        raise DomainError(f"limit orders are tabulated for r >= 1 and 1 <= q <= 2 (r={r}, q={q})")
    if r >= 2:
        rc = conjugate(r)
        if q <= rc:
            return 1, 1.0 / q
        return 2, 1.0 / rc
    threshold = 2.0 * m * q / (2.0 + m * q)
    if r > threshold:
        return 3, 1.0 / q + m / 2.0 - m / r
    return 4, 0.0


def lambda_formula(m: int, r: float, q: float) -> float:
    """Limit order of ``Phi_N`` for 1-summing norms, piecewise in ``(m, r, q)``.

    * ``1/q`` when ``q <= r' <= 2``;
    * ``1/r'`` when ``r' <= q <= 2``;
    * ``1/q + m/2 - m/r`` when ``2mq/(2+mq) < r <= 2``;
    * ``0`` when ``1 <= r <= 2mq/(2+mq)``.
    """
    return _region(int(m), float(r), float(q))[1]


@dataclass(frozen=True)
class LimitOrderQuery:
    m: int
    r: float
    q: float
    p: float = 1.0

    def __post_init__(self):
        _region(int(self.m), float(self.r), float(self.q))
        if not self.p > 0:
            raise ParameterError(f"p must be positive, got {self.p}")

    @property
    def region(self) -> int:
        return _region(self.m, self.r, self.q)[0]

    @property
    def predicted(self) -> float:
        return lambda_formula(self.m, self.r, self.q)


@dataclass(frozen=True)
class SlopeFit:
    """Weighted log-log fit of ``pi_p(Phi_N)`` against ``N``."""

    query: LimitOrderQuery
    N_list: tuple
    values: tuple
    uncertainties: tuple
    slope: float
    intercept: float
    slope_ci: tuple
    predicted: float
    seed: int
    n_samples: int
    blocks: int
    support: tuple = ()
    estimates: tuple = dc_field(default=(), repr=False, compare=False)

    @property
    def verdict(self) -> bool:
        if self.predicted == 0.0:
            return self.slope <= SLOPE_TOLERANCE
        return abs(self.slope - self.predicted) <= SLOPE_TOLERANCE

    def summary(self) -> dict:
        return {
            "m": self.query.m,
            "r": self.query.r,
            "q": self.query.q,
            "p": self.query.p,
            "region": self.query.region,
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "predicted": self.predicted,
            "tolerance": SLOPE_TOLERANCE,
            "verdict": "PASS" if self.verdict else "FAIL",
        }

    def rows(self) -> list[dict]:
        out = []
        for i, N in enumerate(self.N_list):
            row = {"N": N, "estimate": self.values[i], "uncertainty": self.uncertainties[i],
                   "seed": self.seed}
            if self.support:
                row["support"] = self.support[i]
            out.append(row)
        return out


def sweep_csv(rows: Sequence[dict]) -> str:
    """Render rows as CSV with 17 significant digits for floats."""
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: format(v, ".17g") if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _weighted_slope(logN, logv, weights) -> tuple[float, float]:
    slope, intercept = np.polyfit(logN, logv, 1, w=np.sqrt(weights))
    return float(slope), float(intercept)


def _supports(N: int) -> list[int]:
    ks = [1 << i for i in range(int(math.log2(N)) + 1)]
    if ks[-1] != N:
        ks.append(N)
    return ks


class _Point:
    """One sweep point: ``pi_p`` of ``Phi_N``, or a max over diagonal compositions."""

    def __init__(self, candidates: list[tuple[float, NormEstimate, int]]):
        # (scale, estimate, support size)
        self.candidates = candidates
        best = max(candidates, key=lambda c: c[0] * c[1].value)
        self.scale, self.estimate, self.support = best

    @property
    def value(self) -> float:
        return self.scale * self.estimate.value

    @property
    def uncertainty(self) -> float:
        return self.scale * self.estimate.uncertainty

    def resample(self, gen) -> float:
        return max(sc * est.resample(gen) for sc, est, _ in self.candidates)


def limit_order_fit(
    query: LimitOrderQuery,
    N_list: Sequence[int] = (8, 16, 32, 64),
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    blocks: int = DEFAULT_BLOCKS,
    workers: int = 1,
) -> SlopeFit:
    """Estimate ``pi_p(Phi_N)`` over ``N_list`` and fit the growth exponent.

    For ``r >= 2`` the stable integral of ``Phi_N`` is used directly.  For
    ``r < 2`` the domain has no stable measure; the point value is the largest of
    ``pi_p(Phi_N o D_sigma)`` on ``l_2``, with ``sigma`` flat on its first ``k``
    coordinates and normalized in ``l_t``, ``1/t = 1/r - 1/2``, over ``k`` in
    the powers of two up to ``N`` and ``N`` itself.
    """
    N_list = tuple(int(n) for n in N_list)
    if len(N_list) < 4 or any(b <= a for a, b in zip(N_list, N_list[1:])) or N_list[0] < 1:
        raise ParameterError(f"need at least 4 increasing dimensions, got {N_list}")
    m, r, q, p = query.m, float(query.r), float(query.q), float(query.p)
    domain_r = r if r >= 2 else 2.0
    probe = make_phi(m, 1, q, r=domain_r)
    regime = _regime_for(probe, domain_r, p)
    if not regime.usable:
        raise RegimeRefusal(f"limit order for {query} has no usable integral: {regime.branch}")

    def phi_estimate(n: int) -> NormEstimate:
        return estimate_pi(make_phi(m, n, q, r=domain_r), p, domain_r, n_samples, blocks, seed,
                           workers=workers, stream=derive_stream("limit-order", m, n))

    cache: dict[int, NormEstimate] = {}

    def cached(n):
        if n not in cache:
            cache[n] = phi_estimate(n)
        return cache[n]

    points = []
    for N in N_list:
        if r >= 2:
            points.append(_Point([(1.0, cached(N), N)]))
        else:
            inv_t = 1.0 / r - 0.5
            points.append(_Point([(k ** (-m * inv_t), cached(k), k) for k in _supports(N)]))

    logN = np.log(np.array(N_list, dtype=float))
    vals = np.array([pt.value for pt in points])
    rel = np.array([pt.uncertainty / pt.value if pt.value > 0 else 0.0 for pt in points])
    weights = 1.0 / np.maximum(rel, 1e-12) ** 2
    slope, intercept = _weighted_slope(logN, np.log(vals), weights)

    gen = make_generator(seed, derive_stream("slope-bootstrap"))
    boots = []
    for _ in range(BOOTSTRAP_DRAWS):
        bv = np.array([pt.resample(gen) for pt in points])
        if np.all(bv > 0):
            boots.append(_weighted_slope(logN, np.log(bv), weights)[0])
    if boots:
        lo, hi = np.percentile(boots, [2.5, 97.5])
        ci = (float(min(lo, slope)), float(max(hi, slope)))
    else:
        ci = (slope, slope)

    return SlopeFit(
        query=query,
        N_list=N_list,
        values=tuple(float(v) for v in vals),
        uncertainties=tuple(float(pt.uncertainty) for pt in points),
        slope=slope,
        intercept=intercept,
        slope_ci=ci,
        predicted=query.predicted,
        seed=int(seed),
        n_samples=int(n_samples),
        blocks=int(blocks),
        support=tuple(pt.support for pt in points) if r < 2 else (),
        estimates=tuple(pt.estimate for pt in points),
    )


# ---------------------------------------------------------------------------
# Gamma-ratio bound


def gaussian_norm_moment(N: int, p: float, field: Field | str = Field.COMPLEX) -> float:
    """``E ||g||_2^p`` for a standard Gaussian vector in ``K^N`` (``E|g_i|^2 = 1``)."""
    field = Field.coerce(field)
    lg = math.lgamma
    if field is Field.COMPLEX:
        return math.exp(lg(N + p / 2.0) - lg(N))
    return math.exp((p / 2.0) * math.log(2.0) + lg((N + p) / 2.0) - lg(N / 2.0))


@dataclass(frozen=True)
class GammaBoundReport:
    bound: float
    estimate: NormEstimate
    op_norm: float
    gamma_factor: float
    passed: bool

    @property
    def margin(self) -> float:
        return 1.0 - self.estimate.value / self.bound if self.bound > 0 else 0.0

    def to_dict(self) -> dict:
        return {"bound": self.bound, "estimate": self.estimate.to_dict(), "op_norm": self.op_norm,
                "gamma_factor": self.gamma_factor, "pass": self.passed, "margin": self.margin}


def gamma_ratio_bound(
    T: MultilinearOperator,
    p: float,
    r: float = 2.0,
    n_samples: int = DEFAULT_SAMPLES,
    blocks: int = DEFAULT_BLOCKS,
    seed: int = 0,
    field: Field | str = Field.COMPLEX,
    restarts: int = 32,
    workers: int = 1,
) -> GammaBoundReport:
    """Check ``pi_p(T) <= c_{2,p}^{-m} (E||g||^p)^{m/p} ||T||`` on ``l_2^N``.

    In the complex case ``E||g||^p = Gamma(N + p/2) / Gamma(N)``.  The estimate
    passes if it is below the bound inflated by ``1 + 3 * rel_uncertainty``.
    """
    if float(r) != 2.0:
        raise DomainError("the Gamma-ratio bound is stated on l_2 domains only")
    field = Field.coerce(field)
    est = estimate_pi(T, p, 2.0, n_samples, blocks, seed, field, workers)
    op = maximize_norm(T, restarts=restarts, seed=seed, field=field).value
    factor = (constant_c(2.0, p, field).value ** -T.m) * gaussian_norm_moment(T.N, p, field) ** (T.m / p)
    bound = factor * op
    slack = 1.0 + 3.0 * est.rel_uncertainty
    return GammaBoundReport(bound, est, op, factor, est.value <= bound * slack)


# ---------------------------------------------------------------------------
# optimality witness


@dataclass(frozen=True)
class WitnessReport:
    m: int
    N: int
    q: float
    p: float
    numerator: float
    op_norm: float
    ratio: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def optimality_witness(m: int, N: int, q: float, seed: int, p: float = 1.0,
                       restarts: int = 32) -> WitnessReport:
    """Random-sign ``T_N`` into ``l_q^N``: basis sum over ``N^(m/p) ||T_N||``.

    Each basis value is a +-1 column of norm ``N^(1/q)``, so the ratio equals
    ``N^(1/q) / ||T_N||``; it is at most 1.
    """
    T = random_sign_operator(m, N, q, seed)
    num = float(lp_norm(T.basis_values(), p))
    op = maximize_norm(T, restarts=restarts, seed=seed).value
    ratio = num / (float(N) ** (m / p) * op)
    return WitnessReport(m, N, float(q), float(p), num, op, ratio)


# ---------------------------------------------------------------------------
# contraction and inclusion


def _require_equivalence(T: MultilinearOperator, r: float, p: float):
    reg = _regime_for(T, r, p)
    if reg.tag not in (Regime.EXACT, Regime.EQUIVALENT):
        raise RegimeRefusal(f"needs an exact or equivalent regime, got {reg.branch}")
    return reg


@dataclass(frozen=True)
class ContractionReport:
    ratio: float
    rel_uncertainty: float
    alpha_sup: float
    base: NormEstimate
    multiplied: NormEstimate

    def to_dict(self) -> dict:
        return {"ratio": self.ratio, "rel_uncertainty": self.rel_uncertainty,
                "alpha_sup": self.alpha_sup, "base": self.base.to_dict(),
                "multiplied": self.multiplied.to_dict()}


def contraction_check(
    T: MultilinearOperator,
    alpha,
    p: float,
    r: float | None = None,
    seed: int = 0,
    n_samples: int = DEFAULT_SAMPLES,
    blocks: int = DEFAULT_BLOCKS,
    workers: int = 1,
    base: NormEstimate | None = None,
) -> ContractionReport:
    """``pi_p(T_alpha) / (||alpha||_inf pi_p(T))`` for coefficient multipliers ``alpha``.

    Both estimates share random numbers, so ``alpha = 1`` gives exactly 1.
    ``base`` may pass in a precomputed estimate for ``T`` with the same settings.
    """
    r = T.r if r is None else float(r)
    _require_equivalence(T, r, p)
    alpha = np.asarray(alpha)
    sup = float(np.max(np.abs(alpha)))
    if sup == 0:
        raise ParameterError("multipliers are all zero")
    Ta = apply_multipliers(T, alpha)
    field = T.field
    if base is None:
        base = estimate_pi(T, p, r, n_samples, blocks, seed, field, workers)
    mult = estimate_pi(Ta, p, r, n_samples, blocks, seed, field, workers)
    ratio = mult.value / (sup * base.value)
    rel = math.hypot(base.rel_uncertainty, mult.rel_uncertainty)
    return ContractionReport(ratio, rel, sup, base, mult)


def contraction_envelope(
    m: int,
    N: int,
    q: float,
    p: float = 1.0,
    r: float = 2.0,
    patterns: int = 50,
    seed: int = 0,
    n_samples: int = DEFAULT_SAMPLES,
    blocks: int = DEFAULT_BLOCKS,
    workers: int = 1,
) -> dict:
    """Largest contraction ratio over random +-1 patterns on a random dense ``T`` into ``l_q^N``."""
    T = random_dense_operator(m, N, seed, CodomainSpec.sequence(q, N), r=r)
    gen = make_generator(seed, derive_stream("sign-patterns", m, N))
    base = estimate_pi(T, p, r, n_samples, blocks, seed, T.field, workers)
    ratios = []
    for _ in range(patterns):
        alpha = 2.0 * gen.integers(0, 2, size=(N,) * m) - 1.0
        rep = contraction_check(T, alpha, p, r, seed, n_samples, blocks, workers, base=base)
        ratios.append(rep.ratio)
    return {"N": N, "max_ratio": max(ratios), "min_ratio": min(ratios), "ratios": ratios}


@dataclass(frozen=True)
class InclusionReport:
    p1: float
    p2: float
    N_list: tuple
    ratios: tuple
    envelope: tuple

    def to_dict(self) -> dict:
        return {"p1": self.p1, "p2": self.p2, "N": list(self.N_list),
                "ratios": list(self.ratios), "envelope": list(self.envelope)}


def inclusion_ratio(
    family: Sequence[MultilinearOperator],
    p1: float,
    p2: float,
    r: float = 2.0,
    family2: Sequence[MultilinearOperator] | None = None,
    seed: int = 0,
    n_samples: int = DEFAULT_SAMPLES,
    blocks: int = DEFAULT_BLOCKS,
    workers: int = 1,
) -> InclusionReport:
    """``pi_p1(T) / pi_p2(T')`` along a family indexed by dimension.

    ``family2`` defaults to ``family``; a separate second family allows e.g. the
    same map read into two different codomains.
    """
    family2 = family if family2 is None else family2
    if len(family2) != len(family) or not family:
        raise ParameterError("families must be nonempty and of equal length")
    ratios, Ns = [], []
    for T1, T2 in zip(family, family2):
        _require_equivalence(T1, r, p1)
        _require_equivalence(T2, r, p2)
        stream = derive_stream("inclusion", T1.N)
        e1 = estimate_pi(T1, p1, r, n_samples, blocks, seed, T1.field, workers, stream)
        e2 = estimate_pi(T2, p2, r, n_samples, blocks, seed, T2.field, workers, stream)
        ratios.append(e1.value / e2.value)
        Ns.append(T1.N)
    return InclusionReport(float(p1), float(p2), tuple(Ns), tuple(ratios),
                           (min(ratios), max(ratios)))
