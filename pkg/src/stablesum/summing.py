"""Multiple p-summing norms: integral estimates, regime logic and lower bounds."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import montecarlo
from .errors import DomainError, ParameterError, RegimeRefusal
from .multilinear import (
    CodomainSpec,
    DenseOperator,
    MultilinearOperator,
    conjugate,
    holder_extremal,
    maximize_norm,
)
from .rng import derive_stream, make_generator
from .stable import Field, StableLaw, constant_c, draw, lp_norm

__all__ = [
    "Regime",
    "RegimeTag",
    "NormEstimate",
    "WeakPNorm",
    "SimpleFunction",
    "PietschReport",
    "SearchResult",
    "regime_classify",
    "stability_index",
    "integral_moment",
    "estimate_pi",
    "weak_p_norm",
    "basis_weak_norm",
    "basis_lower_bound",
    "search_families",
    "search_lower_bound",
    "pietsch_domination_check",
]

DEFAULT_SAMPLES = 10**6
DEFAULT_BLOCKS = 64
Z95 = 1.959963984540054


class Regime(str, enum.Enum):
    EXACT = "Exact"
    EQUIVALENT = "Equivalent"
    LOWER_BOUND_ONLY = "LowerBoundOnly"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class RegimeTag:
    tag: Regime
    branch: str

    @property
    def usable(self) -> bool:
        return self.tag is not Regime.UNKNOWN

    def to_dict(self) -> dict:
        return {"tag": self.tag.value, "branch": self.branch}

    @classmethod
    def from_dict(cls, d: dict) -> "RegimeTag":
        return cls(Regime(d["tag"]), d["branch"])


def _positive(x, name) -> float:
    x = float(x)
    if not x > 0 or math.isnan(x):
        raise ParameterError(f"{name} must be positive, got {x}")
    return x


def regime_classify(r: float, q: float, p: float) -> RegimeTag:
    """Say what the stable integral means for ``(r, q, p)``.

    Boundary ties follow the non-strict inequalities literally; the strongest
    applicable tag wins.
    """
    r, q, p = _positive(r, "r"), _positive(q, "q"), _positive(p, "p")
    if r < 1 or q < 1:
        raise ParameterError(f"need r, q >= 1, got r={r}, q={q}")
    rc = conjugate(r)
    hilbert = r == 2.0
    stable_dom = p < rc < 2.0

    if hilbert and q == 2.0:
        return RegimeTag(Regime.EXACT, "exact: r = q = 2")
    if hilbert and (p < q < 2.0 or p == q):
        return RegimeTag(Regime.EXACT, "exact: r = 2, p < q < 2 or p = q")
    if stable_dom and (p < q <= 2.0 or p == q):
        return RegimeTag(Regime.EXACT, "exact: p < r' < 2, p < q <= 2 or p = q")
    if hilbert and p < 2.0 and q < 2.0:
        return RegimeTag(Regime.EQUIVALENT, "equivalent: r = 2, p, q < 2")
    if hilbert and q <= p:
        return RegimeTag(Regime.EQUIVALENT, "equivalent: r = 2, q <= p")
    if stable_dom and q <= 2.0:
        return RegimeTag(Regime.EQUIVALENT, "equivalent: p < r' < 2, q <= 2")
    if hilbert or stable_dom:
        return RegimeTag(Regime.LOWER_BOUND_ONLY, "lower bound: r = 2 or p < r' < 2")
    return RegimeTag(Regime.UNKNOWN, "unknown: no integral formula applies")


def _regime_for(T: MultilinearOperator, r: float, p: float) -> RegimeTag:
    if T.codomain.is_scalar:
        rc = conjugate(r)
        if r == 2.0 or p < rc < 2.0:
            return RegimeTag(Regime.EXACT, "exact: scalar form, r = 2 or p < r' < 2")
        return RegimeTag(Regime.UNKNOWN, "unknown: no integral formula applies")
    return regime_classify(r, T.codomain.q, p)


def stability_index(r: float) -> float:
    """The stable index ``r'`` used for domain ``l_r``; only ``r >= 2`` has one."""
    r = float(r)
    if r < 2.0:
        raise DomainError(f"no stable measure realizes l_{r:g}: r' = {conjugate(r):g} > 2")
    return conjugate(r)


@dataclass(frozen=True)
class NormEstimate:
    """Monte Carlo estimate with its provenance.

    ``uncertainty`` is the half-width of a nominal 95% interval derived from the
    spread of the block means; ``heavy_tail`` marks integrands without finite
    variance, whose block means carry a Pareto tail correction and whose
    uncertainty comes from the median-of-means spread alone.
    """

    value: float
    uncertainty: float
    n_samples: int
    blocks: int
    seed: int
    regime: RegimeTag
    p: float
    r: float
    q: float | None
    kind: str = "pi"
    field: str = "real"
    stream: int = 0
    heavy_tail: bool = False
    scale: float = dc_field(default=1.0, repr=False)
    block_means: tuple = dc_field(default=(), repr=False, compare=False)

    @property
    def rel_uncertainty(self) -> float:
        if self.value == 0:
            return 0.0
        return self.uncertainty / self.value

    def resample(self, gen: np.random.Generator) -> float:
        """Value recomputed from one bootstrap resample of the block means."""
        med = montecarlo.bootstrap_median(np.asarray(self.block_means), gen)
        return self.scale * max(med, 0.0) ** (1.0 / self.p)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "uncertainty": self.uncertainty,
            "n_samples": self.n_samples,
            "blocks": self.blocks,
            "seed": self.seed,
            "stream": self.stream,
            "regime": self.regime.to_dict(),
            "p": self.p,
            "r": _enc(self.r),
            "q": _enc(self.q),
            "kind": self.kind,
            "field": self.field,
            "heavy_tail": self.heavy_tail,
            "scale": self.scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormEstimate":
        return cls(
            value=float(d["value"]),
            uncertainty=float(d["uncertainty"]),
            n_samples=int(d["n_samples"]),
            blocks=int(d["blocks"]),
            seed=int(d["seed"]),
            stream=int(d.get("stream", 0)),
            regime=RegimeTag.from_dict(d["regime"]),
            p=float(d["p"]),
            r=_dec(d["r"]),
            q=_dec(d["q"]),
            kind=d.get("kind", "pi"),
            field=d.get("field", "real"),
            heavy_tail=bool(d.get("heavy_tail", False)),
            scale=float(d.get("scale", 1.0)),
        )


def _enc(x):
    if x is None:
        return None
    return "inf" if x == math.inf else x


def _dec(x):
    if x is None:
        return None
    return math.inf if x == "inf" else float(x)


def _chunk_rows(T: MultilinearOperator) -> int:
    # fixed per operator shape, never per worker count
    return int(max(256, min(65536, 2**21 // (T.m * T.N * max(1, T.codomain.dim // T.N + 1)))))


def integral_moment(
    T: MultilinearOperator,
    p: float,
    r: float | None = None,
    n_samples: int = DEFAULT_SAMPLES,
    blocks: int = DEFAULT_BLOCKS,
    seed: int = 0,
    field: Field | str = Field.REAL,
    workers: int = 1,
    stream: int = 0,
) -> NormEstimate:
    """Median-of-means estimate of ``(E ||T(z^1, ..., z^m)||^p)^(1/p)`` under ``mu_{r'}``."""
    p = _positive(p, "p")
    r = T.r if r is None else float(r)
    s = stability_index(r)
    if s < 2.0 and p >= s:
        raise DomainError(f"||T(z)||^p is not integrable for p >= r' (p={p}, r'={s:g})")
    field = Field.coerce(field)
    if field is Field.REAL and T.field is Field.COMPLEX:
        raise ParameterError("complex operator needs field='complex'")
    law = StableLaw(s, field)
    shape_tail = (T.N,)

    def integrand(gen, rows):
        Z = draw(law, gen, (T.m, rows) + shape_tail)
        vals = T.codomain.norm(T.evaluate_batch(Z))
        return vals if p == 1.0 else vals**p

    heavy = bool(s < 2.0 and 2 * p >= s)
    # ||T(z)||^p has tail index s/p; only the infinite-variance case needs the correction
    means = montecarlo.block_means(
        integrand, n_samples, blocks, seed, stream, chunk_rows=_chunk_rows(T), workers=workers,
        tail_index=s / p if heavy else None,
    )
    med, se = montecarlo.median_of_means(means)
    med = max(med, 0.0)
    value = med ** (1.0 / p)
    # delta method through the 1/p power
    unc = 0.0 if med == 0 else Z95 * value * se / (p * med)
    return NormEstimate(
        value=value,
        uncertainty=unc,
        n_samples=int(n_samples),
        blocks=int(blocks),
        seed=int(seed),
        regime=_regime_for(T, r, p),
        p=p,
        r=r,
        q=None if T.codomain.is_scalar else T.codomain.q,
        kind="moment",
        field=field.value,
        stream=int(stream),
        heavy_tail=heavy,
        scale=1.0,
        block_means=tuple(means.tolist()),
    )


def estimate_pi(
    T: MultilinearOperator,
    p: float,
    r: float | None = None,
    n_samples: int = DEFAULT_SAMPLES,
    blocks: int = DEFAULT_BLOCKS,
    seed: int = 0,
    field: Field | str = Field.REAL,
    workers: int = 1,
    stream: int = 0,
) -> NormEstimate:
    """``c_{r',p}^{-m} (E ||T(z)||^p)^(1/p)``, tagged with what that number means.

    Exact regimes give ``pi_p(T)``; equivalent regimes give a quantity within
    dimension-free constants of it; lower-bound regimes give a lower bound.
    """
    p = _positive(p, "p")
    r = T.r if r is None else float(r)
    regime = _regime_for(T, r, p)
    if not regime.usable:
        q = "scalar" if T.codomain.is_scalar else f"{T.codomain.q:g}"
        raise RegimeRefusal(
            f"refusing (r={r:g}, q={q}, p={p:g}): needs r = 2 or p < r' < 2, "
            f"here r' = {conjugate(r):g}"
        )
    raw = integral_moment(T, p, r, n_samples, blocks, seed, field, workers, stream)
    c = constant_c(stability_index(r), p, field).value
    scale = c ** (-T.m)
    return NormEstimate(
        value=raw.value * scale,
        uncertainty=raw.uncertainty * scale,
        n_samples=raw.n_samples,
        blocks=raw.blocks,
        seed=raw.seed,
        regime=regime,
        p=p,
        r=r,
        q=raw.q,
        kind="pi",
        field=raw.field,
        stream=raw.stream,
        heavy_tail=raw.heavy_tail,
        scale=scale,
        block_means=raw.block_means,
    )


# ---------------------------------------------------------------------------
# weak norms


@dataclass(frozen=True)
class WeakPNorm:
    """``w_p`` of a finite family, attained at the functional ``certificate``."""

    p: float
    value: float
    certificate: np.ndarray = dc_field(repr=False)
    exact: bool = False
    method: str = ""

    def __float__(self):
        return self.value


def _family_value(Y: np.ndarray, gamma: np.ndarray, p: float) -> float:
    return float(lp_norm(Y @ gamma, p))


def basis_weak_norm(N: int, p: float, r: float) -> float:
    """``w_p(e_1, ..., e_N)`` in ``l_r^N``: ``N^(1/p - 1/r')`` when ``p < r'``, else 1."""
    rc = conjugate(r)
    return float(N) ** max(0.0, 1.0 / p - 1.0 / rc)


def _is_basis(Y: np.ndarray) -> bool:
    J, N = Y.shape
    if J != N:
        return False
    nz = Y != 0
    return bool(
        np.all(nz.sum(axis=1) == 1)
        and np.all(nz.sum(axis=0) == 1)
        and np.allclose(np.abs(Y[nz]), 1.0, rtol=0, atol=0)
    )


def _rank_one(Y: np.ndarray):
    """Return ``(lam, x)`` with ``Y = lam[:, None] * x`` exactly, or ``None``."""
    j = int(np.argmax(np.max(np.abs(Y), axis=1)))
    x = Y[j]
    i = int(np.argmax(np.abs(x)))
    if x[i] == 0:
        return None
    lam = Y[:, i] / x[i]
    if np.allclose(lam[:, None] * x, Y, rtol=1e-14, atol=0):
        return lam, x
    return None


def _ascent_grad(Y, g, p):
    u = Y @ g
    a = np.abs(u)
    w = np.where(a > 0, a ** (p - 2.0) if p != 2.0 else 1.0, 0.0)
    return (w * u) @ Y.conj()


def _ascend(Y, g, p, dual, tol):
    """Monotone ascent on the dual sphere from ``g``.

    For ``p >= 1`` the objective is convex, so jumping to the Hoelder extremal of
    the gradient never decreases it; otherwise take backtracked gradient steps.
    """
    g = g / lp_norm(g, dual)
    val = _family_value(Y, g, p)
    eta = 1.0
    for _ in range(5000):
        grad = _ascent_grad(Y, g, p)
        if not np.any(grad):
            break
        cand = None
        if p >= 1.0:
            cand = holder_extremal(np.conj(grad), dual)
            cval = _family_value(Y, cand, p)
            if not cval > val:
                cand = None
        if cand is None:
            gn = np.linalg.norm(grad)
            while eta > 1e-14:
                c = g + eta * grad / gn
                c = c / lp_norm(c, dual)
                cv = _family_value(Y, c, p)
                if cv > val:
                    cand, cval = c, cv
                    eta = min(2.0 * eta, 4.0)
                    break
                eta *= 0.5
        if cand is None:
            break
        gain = cval - val
        g, val = cand, cval
        if gain <= tol * val:
            break
    return val, g


def _pga(Y, p, dual, restarts, seed, complex_field, tol):
    J, N = Y.shape
    dtype = np.complex128 if complex_field else np.float64
    starts = [np.eye(N, dtype=dtype)[i] for i in range(N)]
    starts += [holder_extremal(y, dual).astype(dtype) for y in Y if np.any(y)]
    for i in range(restarts):
        gen = make_generator(seed, derive_stream("weak-norm", i))
        g = gen.standard_normal(N)
        if complex_field:
            g = g + 1j * gen.standard_normal(N)
        starts.append(g.astype(dtype))
    best_val, best = -1.0, None
    for g in starts:
        val, g = _ascend(Y, g, p, dual, tol)
        if val > best_val:
            best_val, best = val, g
    return best_val, best


def weak_p_norm(
    vectors,
    p: float,
    r: float,
    restarts: int = 64,
    seed: int = 0,
    field: Field | str | None = None,
    tol: float = 1e-9,
) -> WeakPNorm:
    """``w_p((y_j)_j) = sup { (sum_j |gamma(y_j)|^p)^(1/p) : ||gamma||_{l_r'} <= 1 }``.

    Closed forms are used for rank-one families, the canonical basis, ``p = r = 2``
    (largest singular value) and real ``p = 1`` (sign enumeration, up to 20
    vectors); these carry ``exact=True``.  Otherwise projected gradient ascent
    with ``restarts`` random starts gives a value attained at ``certificate``.
    """
    p = _positive(p, "p")
    Y = np.atleast_2d(np.asarray(vectors))
    if Y.size == 0:
        raise ParameterError("weak norm of an empty family")
    field = Field.coerce(field) if field is not None else (
        Field.COMPLEX if np.iscomplexobj(Y) else Field.REAL
    )
    cplx = field is Field.COMPLEX
    Y = Y.astype(np.complex128 if cplx else np.float64)
    J, N = Y.shape
    dual = conjugate(r)

    def done(gamma, exact, method):
        gamma = gamma / max(float(lp_norm(gamma, dual)), 1e-300)
        return WeakPNorm(p, _family_value(Y, gamma, p), gamma, exact, method)

    if not np.any(Y):
        return done(np.eye(N, dtype=Y.dtype)[0], True, "zero family")
    ro = _rank_one(Y)
    if ro is not None:
        return done(holder_extremal(ro[1], dual), True, "rank one")
    if _is_basis(Y):
        if p < dual:
            gamma = np.ones(N, dtype=Y.dtype)
            perm = np.argmax(np.abs(Y), axis=1)
            gamma = np.conj(Y[np.arange(N), perm])[np.argsort(perm)]
            return done(gamma, True, "canonical basis")
        return done(np.conj(Y[0]), True, "canonical basis")
    if p == 2.0 and r == 2.0:
        _, _, vh = np.linalg.svd(Y)
        return done(np.conj(vh[0]), True, "singular value")
    if p == 1.0 and not cplx and J <= 20:
        eps = np.array(list(itertools.product((1.0, -1.0), repeat=J - 1)))
        eps = np.hstack([np.ones((len(eps), 1)), eps])
        sums = eps @ Y
        k = int(np.argmax(lp_norm(sums, r)))
        return done(holder_extremal(sums[k], dual), True, "sign enumeration")
    _, gamma = _pga(Y, p, dual, restarts, seed, cplx, tol)
    return done(gamma, False, "projected gradient")


# ---------------------------------------------------------------------------
# definition-based lower bounds


def basis_lower_bound(T: MultilinearOperator, p: float, r: float | None = None) -> float:
    """``(sum ||T(e_j1, ..., e_jm)||^p)^(1/p) / w_p(basis)^m``, a lower bound for ``pi_p``."""
    p = _positive(p, "p")
    r = T.r if r is None else float(r)
    num = float(lp_norm(T.basis_values(), p))
    return num / basis_weak_norm(T.N, p, r) ** T.m


def _tuple_values(A: np.ndarray, families: list[np.ndarray]) -> np.ndarray:
    """``T(x^1_j1, ..., x^m_jm)`` for all tuples, shape ``(J1, ..., Jm, dim)``."""
    out = A
    for X in families:
        # contract the leading domain axis; the new family axis goes last
        out = np.tensordot(out, X, axes=([0], [1]))
    # axes now: (dim, J1, ..., Jm)
    return np.moveaxis(out, 0, -1)


def _norm_grad(V: np.ndarray, q: float, p: float) -> np.ndarray:
    """Gradient of ``sum_t ||V_t||_q^p`` with respect to real ``V``."""
    if q == math.inf:
        a = np.abs(V)
        n = a.max(axis=-1, keepdims=True)
        mask = (a == n) & (n > 0)
        first = np.cumsum(mask, axis=-1) == 1
        G = np.where(mask & first, np.sign(V), 0.0)
        return p * n ** (p - 1.0) * G
    n = lp_norm(V, q)[..., None]
    a = np.abs(V)
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.where(a > 0, np.sign(V) * a ** (q - 1.0) * n ** (p - q), 0.0)
    return p * G


def _family_grad(A: np.ndarray, families: list[np.ndarray], G: np.ndarray, k: int) -> np.ndarray:
    """Gradient of the summed norms with respect to family ``k``, shape ``(J_k, N)``."""
    m = len(families)
    dom = "abcdefgh"[:m]
    fam = "ijklmnop"[:m]
    terms = [f"{dom}z", f"{fam}z"]
    ops = [A, G]
    for j, X in enumerate(families):
        if j != k:
            terms.append(fam[j] + dom[j])
            ops.append(X)
    subscripts = ",".join(terms) + "->" + fam[k] + dom[k]
    return np.real(np.einsum(subscripts, *ops, optimize=True))


@dataclass(frozen=True)
class SearchResult:
    value: float
    families: tuple = dc_field(repr=False)
    weak_norms_exact: bool = True


def search_families(
    T: MultilinearOperator,
    p: float,
    r: float | None = None,
    J: int | None = None,
    restarts: int = 8,
    seed: int = 0,
    sweeps: int = 60,
    tol: float = 1e-9,
    weak_restarts: int = 64,
) -> SearchResult:
    """Coordinate ascent over real vector families for the summing ratio.

    Each family is updated by a gradient step on the numerator and renormalized
    by its recomputed weak norm; steps are kept only if the ratio improves.
    Restart 0 starts from the canonical basis (or, for ``J = 1``, from the
    operator-norm maximizer); the others from Gaussian families.
    """
    p = _positive(p, "p")
    r = T.r if r is None else float(r)
    if T.field is Field.COMPLEX:
        raise ParameterError("family search runs over real families; operator is complex")
    J = T.N if J is None else int(J)
    if J < 1:
        raise ParameterError(f"family size must be >= 1, got {J}")
    A = T.to_dense().coeffs
    q = T.codomain.exponent
    m, N = T.m, T.N

    def weak(X, precise=False):
        return weak_p_norm(X, p, r, restarts=weak_restarts if precise else 16, seed=seed,
                           field=Field.REAL)

    def ratio(fams):
        V = _tuple_values(A, fams)
        return float(lp_norm(T.codomain.norm(V).ravel(), p))

    def normalize(X):
        w = weak(X)
        return X / w.value, w.exact

    best = None
    for i in range(max(1, restarts)):
        gen = make_generator(seed, derive_stream("family-search", i))
        if i == 0 and J == 1:
            start = maximize_norm(T, restarts=8, seed=seed, field=Field.REAL).maximizer
            fams = [np.real(v)[None, :] for v in start]
        elif i == 0:
            fams = [np.eye(N)[np.arange(J) % N] for _ in range(m)]
        else:
            fams = [gen.standard_normal((J, N)) for _ in range(m)]
        fams = [normalize(X)[0] for X in fams]
        cur = ratio(fams)
        for _ in range(sweeps):
            start_val = cur
            for k in range(m):
                G = _norm_grad(_tuple_values(A, fams), q, p)
                grad = _family_grad(A, fams, G, k)
                gn = np.linalg.norm(grad)
                if gn == 0:
                    continue
                eta = np.linalg.norm(fams[k])
                for _ in range(30):
                    cand = fams[k] + eta * grad / gn
                    cand, _ex = normalize(cand)
                    trial = fams[:k] + [cand] + fams[k + 1 :]
                    val = ratio(trial)
                    if val > cur * (1 + 1e-12):
                        fams, cur = trial, val
                        break
                    eta *= 0.5
            if cur - start_val <= tol * cur:
                break
        if best is None or cur > best[0]:
            best = (cur, fams)

    # final certification with the most careful weak-norm computation
    fams = best[1]
    weaks = [weak(X, precise=True) for X in fams]
    value = ratio(fams) / float(np.prod([w.value for w in weaks]))
    return SearchResult(value, tuple(fams), all(w.exact for w in weaks))


def search_lower_bound(
    T: MultilinearOperator,
    p: float,
    r: float | None = None,
    J: int | None = None,
    restarts: int = 8,
    seed: int = 0,
) -> float:
    """Best summing ratio found by :func:`search_families`; never above ``pi_p`` when
    the weak norms are exact."""
    return search_families(T, p, r, J, restarts, seed).value


# ---------------------------------------------------------------------------
# domination check


@dataclass(frozen=True)
class SimpleFunction:
    """A finitely valued map on a probability space: ``values[i]`` with mass ``weights[i]``."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (v.shape[0],) or np.any(w < 0):
            raise ParameterError("need one nonnegative weight per value")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    def scaled_family(self, p: float) -> np.ndarray:
        return self.weights[:, None] ** (1.0 / p) * self.values


@dataclass(frozen=True)
class PietschReport:
    passed: bool
    n_checked: int
    pi_estimate: NormEstimate
    ratios: tuple
    min_margin: float
    identity_ratio: float


def pietsch_domination_check(
    T: MultilinearOperator,
    p: float,
    r: float | None = None,
    functions: list | None = None,
    n_random: int = 100,
    atoms: int = 2,
    seed: int = 0,
    n_samples: int = DEFAULT_SAMPLES,
    blocks: int = DEFAULT_BLOCKS,
    estimate: NormEstimate | None = None,
) -> PietschReport:
    """Check ``||T(f_1, ..., f_m)||_{L_p} <= pi_p(T) prod_j w_p(f_j)`` on simple functions.

    For simple functions the left side is the summing sum over the atoms scaled by
    ``weight^(1/p)`` and the weak ``L_p`` norm is the weak norm of that scaled
    family.  ``functions`` is a list of m-tuples of :class:`SimpleFunction`; by
    default ``n_random`` tuples with ``atoms`` Gaussian atoms are drawn.
    ``identity_ratio`` is the case ``f_j(z) = z`` under ``mu_{r'}``: an independent
    raw moment divided by ``c^m`` times the estimate, which should be 1.
    """
    r = T.r if r is None else float(r)
    regime = _regime_for(T, r, p)
    if regime.tag is not Regime.EXACT:
        raise RegimeRefusal(f"domination check needs an exact regime, got {regime.branch}")
    est = estimate or estimate_pi(T, p, r, n_samples, blocks, seed)
    bound = est.value * (1.0 + 3.0 * est.rel_uncertainty)
    if functions is None:
        gen = make_generator(seed, derive_stream("pietsch"))
        functions = [
            tuple(
                SimpleFunction(gen.standard_normal((atoms, T.N)), gen.dirichlet(np.ones(atoms)))
                for _ in range(T.m)
            )
            for _ in range(n_random)
        ]
    A = T.to_dense().coeffs
    ratios = []
    for fs in functions:
        fams = [f.scaled_family(p) for f in fs]
        lhs = float(lp_norm(T.codomain.norm(_tuple_values(A, fams)).ravel(), p))
        rhs = float(np.prod([weak_p_norm(X, p, r, seed=seed, field=Field.REAL).value for X in fams]))
        ratios.append(lhs / rhs if rhs > 0 else 0.0)
    margins = [1.0 - x / bound if bound > 0 else 0.0 for x in ratios]
    c = constant_c(stability_index(r), p, est.field).value
    # f_j(z) = z under mu_{r'}: weak L_p norm is c, so the raw moment should equal c^m pi_p
    raw = integral_moment(T, p, r, est.n_samples, est.blocks, seed, est.field,
                          stream=derive_stream("pietsch-identity", est.stream))
    identity = raw.value / (c**T.m * est.value) if est.value > 0 else 1.0
    return PietschReport(
        passed=all(x <= bound for x in ratios),
        n_checked=len(ratios),
        pi_estimate=est,
        ratios=tuple(ratios),
        min_margin=min(margins) if margins else 1.0,
        identity_ratio=identity,
    )
