"""m-linear operators on ``l_r^N`` with scalar or ``l_q^M`` values.

Two representations are supported:

* :class:`DenseOperator` stores the coefficient tensor ``a[j1, ..., jm, :]``
  (the value ``T(e_j1, ..., e_jm)``) with shape ``(N,)*m + (M,)``;
* :class:`DiagonalOperator` stores weight rows ``sigma[k, j]`` and represents
  ``(x^1, ..., x^m) -> sum_j sigma_1(j) x^1_j ... sigma_m(j) x^m_j e_j`` into ``l_q^N``.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ParameterError
from .rng import derive_stream, make_generator
from .stable import Field, lp_norm

__all__ = [
    "CodomainSpec",
    "MultilinearOperator",
    "DenseOperator",
    "DiagonalOperator",
    "NormSearch",
    "conjugate",
    "holder_extremal",
    "evaluate",
    "maximize_norm",
    "sup_norm",
    "hilbert_schmidt_norm",
    "make_phi",
    "compose_diagonal",
    "apply_multipliers",
    "random_sign_operator",
    "random_dense_operator",
    "to_document",
    "from_document",
    "dumps",
    "loads",
    "save",
    "load",
]

MAX_ENTRIES = 10**8
FORMAT_TAG = "stablesum.operator/1"


def conjugate(r: float) -> float:
    """Hoelder conjugate exponent, with ``1 <-> inf``."""
    r = float(r)
    if r < 1:
        raise ParameterError(f"exponent must be >= 1, got {r}")
    if r == 1.0:
        return math.inf
    if r == math.inf:
        return 1.0
    return r / (r - 1.0)


def _check_exponent(r, name="r") -> float:
    try:
        r = float(r)
    except (TypeError, ValueError):
        raise ParameterError(f"{name} must be a number, got {r!r}") from None
    if math.isnan(r) or r < 1:
        raise ParameterError(f"{name} must lie in [1, inf], got {r}")
    return r


@dataclass(frozen=True)
class CodomainSpec:
    """Scalar field, or ``l_q^M``."""

    kind: str = "scalar"
    q: float | None = None
    M: int | None = None

    def __post_init__(self):
        if self.kind == "scalar":
            if self.q is not None or self.M is not None:
                raise ParameterError("scalar codomain takes no (q, M)")
        elif self.kind == "sequence":
            object.__setattr__(self, "q", _check_exponent(self.q, "q"))
            if self.M is None or int(self.M) != self.M or self.M < 1:
                raise ParameterError(f"sequence codomain needs M >= 1, got {self.M!r}")
            object.__setattr__(self, "M", int(self.M))
        else:
            raise ParameterError(f"unknown codomain kind {self.kind!r}")

    @classmethod
    def scalar(cls) -> "CodomainSpec":
        return cls("scalar")

    @classmethod
    def sequence(cls, q: float, M: int) -> "CodomainSpec":
        return cls("sequence", q, M)

    @property
    def is_scalar(self) -> bool:
        return self.kind == "scalar"

    @property
    def dim(self) -> int:
        return 1 if self.is_scalar else self.M

    @property
    def exponent(self) -> float:
        """Norm exponent used on values; the scalar case is ``|.|``."""
        return 2.0 if self.is_scalar else self.q

    def norm(self, values: np.ndarray) -> np.ndarray:
        """Norms of value vectors stacked along the last axis."""
        if self.is_scalar:
            return np.abs(values[..., 0])
        return lp_norm(values, self.q)


class MultilinearOperator:
    """Common interface; see :class:`DenseOperator` and :class:`DiagonalOperator`."""

    representation = ""
    m: int
    N: int
    r: float
    codomain: CodomainSpec

    @property
    def field(self) -> Field:
        return Field.COMPLEX if np.iscomplexobj(self._data) else Field.REAL

    def evaluate_batch(self, Z: np.ndarray) -> np.ndarray:
        """Evaluate at ``Z[k, b, :]`` (slot ``k``, sample ``b``); returns shape ``(B, dim)``."""
        raise NotImplementedError

    def to_dense(self) -> "DenseOperator":
        raise NotImplementedError

    def scaled(self, lam: complex) -> "MultilinearOperator":
        raise NotImplementedError

    def basis_values(self) -> np.ndarray:
        """Norms ``||T(e_j1, ..., e_jm)||`` for all index tuples, flattened."""
        raise NotImplementedError

    def _check_inputs(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z)
        if Z.ndim != 3 or Z.shape[0] != self.m or Z.shape[2] != self.N:
            raise ParameterError(
                f"expected inputs of shape ({self.m}, B, {self.N}), got {Z.shape}"
            )
        return Z

    def __repr__(self):
        cod = "K" if self.codomain.is_scalar else f"l_{self.codomain.q:g}^{self.codomain.M}"
        return (
            f"{type(self).__name__}(m={self.m}, N={self.N}, r={self.r:g}, "
            f"codomain={cod}, field={self.field.value})"
        )


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    if not (np.issubdtype(a.dtype, np.floating) or np.issubdtype(a.dtype, np.complexfloating)):
        a = a.astype(np.float64)
    if np.iscomplexobj(a):
        a = a.astype(np.complex128)
    else:
        a = a.astype(np.float64)
    a.setflags(write=False)
    return a


class DenseOperator(MultilinearOperator):
    representation = "dense"

    def __init__(self, coeffs, r: float = 2.0, codomain: CodomainSpec | None = None):
        a = np.asarray(coeffs)
        codomain = codomain or CodomainSpec.scalar()
        if codomain.is_scalar and a.ndim >= 1 and a.shape[-1:] != (1,):
            a = a[..., None]
        if a.ndim < 2:
            raise ParameterError("dense coefficients need at least one domain slot")
        m = a.ndim - 1
        N = a.shape[0]
        if any(n != N for n in a.shape[:-1]):
            raise ParameterError(f"all domain slots must share dimension N, got shape {a.shape}")
        if a.shape[-1] != codomain.dim:
            raise ParameterError(
                f"last axis ({a.shape[-1]}) must match codomain dimension ({codomain.dim})"
            )
        if a.size > MAX_ENTRIES:
            raise ParameterError(f"dense tensor with {a.size} entries exceeds {MAX_ENTRIES}")
        self.m, self.N = m, N
        self.r = _check_exponent(r)
        self.codomain = codomain
        self._data = _frozen(a)

    @property
    def coeffs(self) -> np.ndarray:
        return self._data

    def evaluate_batch(self, Z):
        Z = self._check_inputs(Z)
        B = Z.shape[1]
        out = Z[0] @ self._data.reshape(self.N, -1)
        for k in range(1, self.m):
            out = np.matmul(Z[k][:, None, :], out.reshape(B, self.N, -1))[:, 0, :]
        return out.reshape(B, self.codomain.dim)

    def to_dense(self):
        return self

    def scaled(self, lam):
        return DenseOperator(self._data * lam, self.r, self.codomain)

    def basis_values(self):
        return self.codomain.norm(self._data).ravel()


class DiagonalOperator(MultilinearOperator):
    representation = "diagonal"

    def __init__(self, weights, q: float, r: float = 2.0):
        w = np.asarray(weights)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ParameterError(f"diagonal weights must have shape (m, N), got {w.shape}")
        self.m, self.N = w.shape
        self.r = _check_exponent(r)
        self.codomain = CodomainSpec.sequence(q, self.N)
        self._data = _frozen(w)

    @property
    def weights(self) -> np.ndarray:
        return self._data

    def evaluate_batch(self, Z):
        Z = self._check_inputs(Z)
        out = self._data[0] * Z[0]
        for k in range(1, self.m):
            out = out * (self._data[k] * Z[k])
        return out

    def to_dense(self):
        N, m = self.N, self.m
        size = N ** (m + 1)
        if size > MAX_ENTRIES:
            raise ParameterError(f"dense expansion with {size} entries exceeds {MAX_ENTRIES}")
        a = np.zeros((N,) * (m + 1), dtype=self._data.dtype)
        idx = np.arange(N)
        a[(idx,) * (m + 1)] = np.prod(self._data, axis=0)
        return DenseOperator(a, self.r, self.codomain)

    def scaled(self, lam):
        w = np.array(self._data)
        w[0] = w[0] * lam
        return DiagonalOperator(w, self.codomain.q, self.r)

    def basis_values(self):
        # only the diagonal tuples are nonzero
        return np.abs(np.prod(self._data, axis=0))


def evaluate(T: MultilinearOperator, *z) -> np.ndarray | complex | float:
    """``T(z^1, ..., z^m)``: a scalar for forms, otherwise a codomain vector."""
    if len(z) == 1 and np.ndim(z[0]) == 2 and T.m != 1:
        z = tuple(z[0])
    if len(z) != T.m:
        raise ParameterError(f"operator takes {T.m} inputs, got {len(z)}")
    vecs = [np.asarray(v) for v in z]
    for v in vecs:
        if v.shape != (T.N,):
            raise ParameterError(f"input has shape {v.shape}, expected ({T.N},)")
    dtype = np.result_type(*vecs, np.float64)
    Z = np.stack([v.astype(dtype) for v in vecs])[:, None, :]
    out = T.evaluate_batch(Z)[0]
    if T.codomain.is_scalar:
        return out[0]
    return out


# ---------------------------------------------------------------------------
# operator norm by alternating maximization


def holder_extremal(c: np.ndarray, ball: float) -> np.ndarray:
    """Unit vector ``x`` of ``l_ball`` maximizing ``|sum_j c_j x_j|`` (value ``||c||_ball'``)."""
    c = np.asarray(c)
    a = np.abs(c)
    peak = a.max() if a.size else 0.0
    if peak == 0.0:
        x = np.zeros_like(c)
        x[0] = 1.0
        return x
    phase = np.where(a > 0, np.conj(c) / np.where(a > 0, a, 1.0), 1.0)
    dual = conjugate(ball)
    if dual == math.inf:
        x = np.zeros_like(c)
        j = int(np.argmax(a))
        x[j] = phase[j]
        return x
    if dual == 1.0:
        return phase.astype(c.dtype)
    # rescale by the peak first so |c|^(dual-1) cannot overflow
    b = a / peak
    w = b ** (dual - 1.0)
    w = w / lp_norm(w, ball)
    return (phase * w).astype(c.dtype)


def _letters(n):
    return string.ascii_lowercase[:n]


def _partial(A: np.ndarray, vecs: list[np.ndarray], k: int) -> np.ndarray:
    """Contract ``A`` with every vector in ``vecs`` except slot ``k``."""
    idx = _letters(A.ndim)
    operands, subs = [A], [idx]
    for j, v in enumerate(vecs):
        if j != k:
            operands.append(v)
            subs.append(idx[j])
    return np.einsum(",".join(subs) + "->" + idx[k], *operands)


@dataclass(frozen=True)
class NormSearch:
    """Outcome of :func:`maximize_norm`; ``value`` is attained at ``maximizer``."""

    value: float
    converged: bool
    iterations: int
    maximizer: tuple


def maximize_norm(
    T: MultilinearOperator,
    restarts: int = 32,
    tol: float = 1e-10,
    seed: int = 0,
    field: Field | str | None = None,
    max_iter: int = 500,
) -> NormSearch:
    """Certified lower estimate of ``sup ||T(x^1, ..., x^m)||`` over ``l_r`` unit balls.

    The codomain norm is dualized into an extra slot, so each update is a linear
    functional maximized exactly by :func:`holder_extremal`.  The best of
    ``restarts`` random starts is returned; restart ``i`` depends only on
    ``(seed, i)``.
    """
    if restarts < 1:
        raise ParameterError(f"restarts must be >= 1, got {restarts}")
    field = Field.coerce(field) if field is not None else T.field
    if field is Field.REAL and T.field is Field.COMPLEX:
        raise ParameterError("complex operator needs field='complex'")
    A = T.to_dense().coeffs.astype(field.dtype)
    dual_slot = not T.codomain.is_scalar
    if not dual_slot:
        A = A[..., 0]
    balls = [T.r] * T.m + ([conjugate(T.codomain.q)] if dual_slot else [])
    dims = A.shape

    best = None
    for i in range(restarts):
        gen = make_generator(seed, derive_stream("sup-norm", i))
        vecs = []
        for d, ball in zip(dims, balls):
            v = gen.standard_normal(d)
            if field is Field.COMPLEX:
                v = v + 1j * gen.standard_normal(d)
            vecs.append(v / lp_norm(v, ball))
        value, converged, it = 0.0, False, 0
        for it in range(1, max_iter + 1):
            prev = value
            for k in range(len(vecs)):
                c = _partial(A, vecs, k)
                vecs[k] = holder_extremal(c, balls[k])
                value = float(lp_norm(c, conjugate(balls[k])))
            if value - prev <= tol * max(value, 1e-300):
                converged = True
                break
        # re-evaluate at the final point so the value is attained, not extrapolated
        X = np.stack(vecs[: T.m])[:, None, :]
        attained = float(T.codomain.norm(T.evaluate_batch(X))[0])
        attained /= float(np.prod([lp_norm(v, T.r) for v in vecs[: T.m]]))
        if best is None or attained > best.value:
            best = NormSearch(attained, converged, it, tuple(vecs[: T.m]))
    return best


def sup_norm(
    T: MultilinearOperator,
    restarts: int = 32,
    tol: float = 1e-10,
    seed: int = 0,
    field: Field | str | None = None,
) -> float:
    """Lower estimate of the operator norm ``||T||``; see :func:`maximize_norm`."""
    return maximize_norm(T, restarts=restarts, tol=tol, seed=seed, field=field).value


def hilbert_schmidt_norm(T: MultilinearOperator) -> float:
    """``(sum ||T(e_j1, ..., e_jm)||_2^2)^(1/2)``; needs a scalar or ``l_2`` codomain."""
    if not T.codomain.is_scalar and T.codomain.q != 2.0:
        raise DomainError("Hilbert-Schmidt norm needs a scalar or l_2 codomain")
    if isinstance(T, DiagonalOperator):
        return float(np.sqrt(np.sum(np.abs(np.prod(T.weights, axis=0)) ** 2)))
    return float(np.sqrt(np.sum(np.abs(T.to_dense().coeffs) ** 2)))


# ---------------------------------------------------------------------------
# constructors


def make_phi(m: int, N: int, q: float, r: float = 2.0) -> DiagonalOperator:
    """``Phi_N(x^1, ..., x^m) = sum_j x^1_j ... x^m_j e_j`` into ``l_q^N``."""
    if m < 1 or N < 1:
        raise ParameterError(f"need m, N >= 1, got m={m}, N={N}")
    return DiagonalOperator(np.ones((m, N)), q=q, r=r)


def _weight_rows(T: MultilinearOperator, sigma) -> np.ndarray:
    s = np.asarray(sigma)
    if s.ndim == 1:
        s = np.broadcast_to(s, (T.m, s.shape[0]))
    if s.shape != (T.m, T.N):
        raise ParameterError(f"need {T.m} weight rows of length {T.N}, got shape {s.shape}")
    return s


def compose_diagonal(T: MultilinearOperator, sigma) -> MultilinearOperator:
    """``(x^1, ..., x^m) -> T(sigma_1 x^1, ..., sigma_m x^m)`` with coordinatewise products.

    A single row is broadcast to every slot.
    """
    s = _weight_rows(T, sigma)
    if isinstance(T, DiagonalOperator):
        return DiagonalOperator(T.weights * s, q=T.codomain.q, r=T.r)
    a = T.coeffs
    for k in range(T.m):
        shape = [1] * a.ndim
        shape[k] = T.N
        a = a * s[k].reshape(shape)
    return DenseOperator(a, T.r, T.codomain)


def apply_multipliers(T: MultilinearOperator, alpha) -> MultilinearOperator:
    """Multiply each coefficient ``T(e_j1, ..., e_jm)`` by ``alpha[j1, ..., jm]``.

    For a diagonal operator a length-``N`` ``alpha`` acts on the diagonal tuples.
    """
    alpha = np.asarray(alpha)
    if isinstance(T, DiagonalOperator) and alpha.shape == (T.N,):
        w = np.array(T.weights, dtype=np.result_type(T.weights, alpha))
        w[0] = w[0] * alpha
        return DiagonalOperator(w, q=T.codomain.q, r=T.r)
    if alpha.shape != (T.N,) * T.m:
        raise ParameterError(f"multipliers must have shape {(T.N,) * T.m}, got {alpha.shape}")
    D = T.to_dense()
    return DenseOperator(D.coeffs * alpha[..., None], D.r, D.codomain)


def random_sign_operator(m: int, N: int, q: float, seed: int, r: float = 2.0) -> DenseOperator:
    """i.i.d. +-1 coefficients ``(m+1)``-tensor read as an m-linear map into ``l_q^N``."""
    if m < 1 or N < 1:
        raise ParameterError(f"need m, N >= 1, got m={m}, N={N}")
    gen = make_generator(seed, derive_stream("sign-tensor", m, N))
    signs = 2.0 * gen.integers(0, 2, size=(N,) * (m + 1)) - 1.0
    return DenseOperator(signs, r=r, codomain=CodomainSpec.sequence(q, N))


def random_dense_operator(
    m: int,
    N: int,
    seed: int,
    codomain: CodomainSpec | None = None,
    r: float = 2.0,
    field: Field | str = Field.REAL,
) -> DenseOperator:
    """Dense operator with i.i.d. standard Gaussian coefficients."""
    codomain = codomain or CodomainSpec.scalar()
    field = Field.coerce(field)
    gen = make_generator(seed, derive_stream("dense-operator", m, N, codomain.dim))
    shape = (N,) * m + (codomain.dim,)
    a = gen.standard_normal(shape)
    if field is Field.COMPLEX:
        a = (a + 1j * gen.standard_normal(shape)) / math.sqrt(2)
    return DenseOperator(a, r=r, codomain=codomain)


# ---------------------------------------------------------------------------
# structured text documents


def _num(x: float):
    return "inf" if x == math.inf else x


def _unnum(x) -> float:
    if x == "inf":
        return math.inf
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParameterError(f"expected a number or 'inf', got {x!r}")
    return float(x)


def to_document(T: MultilinearOperator) -> dict:
    data = T._data
    doc = {
        "format": FORMAT_TAG,
        "m": T.m,
        "N": T.N,
        "r": _num(T.r),
        "codomain": {"kind": T.codomain.kind}
        if T.codomain.is_scalar
        else {"kind": "sequence", "q": _num(T.codomain.q), "M": T.codomain.M},
        "representation": T.representation,
        "field": T.field.value,
        "coefficients": [float(v) for v in np.real(data).ravel()],
    }
    if T.field is Field.COMPLEX:
        doc["coefficients_imag"] = [float(v) for v in np.imag(data).ravel()]
    return doc


def from_document(doc: dict) -> MultilinearOperator:
    try:
        if doc.get("format") != FORMAT_TAG:
            raise ParameterError(f"unsupported operator format {doc.get('format')!r}")
        m, N = int(doc["m"]), int(doc["N"])
        r = _unnum(doc["r"])
        cod = doc["codomain"]
        re = np.asarray(doc["coefficients"], dtype=float)
        data = re + 1j * np.asarray(doc["coefficients_imag"], dtype=float) if doc.get(
            "field", "real"
        ) == "complex" else re
        rep = doc["representation"]
        if rep == "dense":
            codomain = (
                CodomainSpec.scalar()
                if cod["kind"] == "scalar"
                else CodomainSpec.sequence(_unnum(cod["q"]), int(cod["M"]))
            )
            expected = N**m * codomain.dim
            if data.size != expected:
                raise ParameterError(f"expected {expected} coefficients, got {data.size}")
            return DenseOperator(data.reshape((N,) * m + (codomain.dim,)), r, codomain)
        if rep == "diagonal":
            if cod["kind"] != "sequence" or int(cod["M"]) != N:
                raise ParameterError("diagonal operators map into l_q^N")
            if data.size != m * N:
                raise ParameterError(f"expected {m * N} weights, got {data.size}")
            return DiagonalOperator(data.reshape(m, N), q=_unnum(cod["q"]), r=r)
        raise ParameterError(f"unknown representation {rep!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"malformed operator document: {exc}") from exc


def dumps(T: MultilinearOperator) -> str:
    return json.dumps(to_document(T), indent=1)


def loads(text: str) -> MultilinearOperator:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"operator document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParameterError("operator document must be a JSON object")
    return from_document(doc)


def save(T: MultilinearOperator, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(T))


def load(path) -> MultilinearOperator:
    with open(path) as fh:
        return loads(fh.read())
