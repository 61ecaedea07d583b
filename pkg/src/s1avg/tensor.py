"""Pointwise tensor fields on a single coordinate chart.

Fields are scalars, k-vector fields or k-forms.  Components are stored
densely over the strictly increasing multi-indices of the field's degree,
in lexicographic order, and every evaluation is batched: a field maps an
array of points of shape ``(P, dim)`` to components of shape ``(P, ncomp)``.
Jacobians are returned with shape ``(P, dim, ncomp)`` where entry
``[p, i, c]`` is the partial derivative of component ``c`` along axis ``i``.

The exterior algebra conventions are the usual alternating ones:
``dx ^ dy`` has component 1 on the index ``(0, 1)`` and the interior
product contracts the first slot.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Callable, Optional, Sequence

import numpy as np
import sympy as sp

from .errors import DomainError, ValenceError

__all__ = [
    "Valence",
    "CoordChart",
    "FDPolicy",
    "TensorField",
    "CallableField",
    "ConstantField",
    "PointwiseField",
    "combos",
    "wedge",
    "interior_form",
    "interior_multivector",
    "exterior_derivative",
    "lie_bracket",
    "lie_derivative",
    "from_sympy",
    "constant",
    "zero",
    "as_points",
    "to_dense",
    "from_dense",
    "transport",
]


# ---------------------------------------------------------------------------
# valences and multi-indices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Valence:
    kind: str  # "scalar", "vector" or "form"
    degree: int = 0

    def __post_init__(self):
        if self.kind not in ("scalar", "vector", "form"):
            raise ValenceError(f"unknown valence kind {self.kind!r}")
        if self.kind == "scalar" and self.degree != 0:
            raise ValenceError("scalars have degree 0")
        if self.kind != "scalar" and self.degree < 1:
            raise ValenceError("k-vectors and k-forms need k >= 1; use Valence.scalar()")

    @classmethod
    def scalar(cls) -> "Valence":
        return cls("scalar", 0)

    @classmethod
    def vector(cls, k: int = 1) -> "Valence":
        return cls.scalar() if k == 0 else cls("vector", k)

    @classmethod
    def form(cls, k: int = 1) -> "Valence":
        return cls.scalar() if k == 0 else cls("form", k)

    def with_degree(self, k: int, kind: Optional[str] = None) -> "Valence":
        kind = kind or self.kind
        if k == 0:
            return Valence.scalar()
        if kind == "scalar":
            raise ValenceError("cannot raise the degree of a scalar without a kind")
        return Valence(kind, k)

    def ncomp(self, dim: int) -> int:
        return comb(dim, self.degree)

    def __str__(self):
        if self.kind == "scalar":
            return "scalar"
        return f"{self.degree}-{self.kind}"


@lru_cache(maxsize=None)
def combos(dim: int, k: int) -> tuple[tuple[int, ...], ...]:
    """Sorted multi-indices of length ``k`` over ``range(dim)``."""
    return tuple(itertools.combinations(range(dim), k))


@lru_cache(maxsize=None)
def _combo_index(dim: int, k: int) -> dict:
    return {c: i for i, c in enumerate(combos(dim, k))}


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def _wedge_table(dim: int, p: int, q: int):
    out_idx, a_idx, b_idx, signs = [], [], [], []
    ia, ib = _combo_index(dim, p), _combo_index(dim, q)
    for I_pos, I in enumerate(combos(dim, p + q)):
        for A in itertools.combinations(I, p):
            B = tuple(i for i in I if i not in A)
            out_idx.append(I_pos)
            a_idx.append(ia[A])
            b_idx.append(ib[B])
            signs.append(_perm_sign(A + B))
    return (np.array(out_idx, dtype=int), np.array(a_idx, dtype=int),
            np.array(b_idx, dtype=int), np.array(signs, dtype=float))


@lru_cache(maxsize=None)
def _contract_table(dim: int, k: int):
    # (i_v w)_J = sum_i v_i w_{(i, J)}
    out_idx, v_idx, w_idx, signs = [], [], [], []
    iw = _combo_index(dim, k)
    for J_pos, J in enumerate(combos(dim, k - 1)):
        for i in range(dim):
            if i in J:
                continue
            I = tuple(sorted((i,) + J))
            out_idx.append(J_pos)
            v_idx.append(i)
            w_idx.append(iw[I])
            signs.append((-1) ** I.index(i))
    return (np.array(out_idx, dtype=int), np.array(v_idx, dtype=int),
            np.array(w_idx, dtype=int), np.array(signs, dtype=float))


@lru_cache(maxsize=None)
def _dense_table(dim: int, k: int):
    flat, comp, signs = [], [], []
    for c_pos, c in enumerate(combos(dim, k)):
        for perm in itertools.permutations(range(k)):
            idx = tuple(c[p] for p in perm)
            flat.append(np.ravel_multi_index(idx, (dim,) * k) if k else 0)
            comp.append(c_pos)
            signs.append(_perm_sign(perm))
    return np.array(flat, dtype=int), np.array(comp, dtype=int), np.array(signs, dtype=float)


def to_dense(comps: np.ndarray, dim: int, k: int) -> np.ndarray:
    """Expand sorted components to a full antisymmetric array ``(..., dim, ..., dim)``."""
    comps = np.asarray(comps)
    lead = comps.shape[:-1]
    if k == 0:
        return comps[..., 0]
    flat, comp, signs = _dense_table(dim, k)
    out = np.zeros(lead + (dim ** k,), dtype=comps.dtype)
    out[..., flat] = comps[..., comp] * signs
    return out.reshape(lead + (dim,) * k)


def from_dense(arr: np.ndarray, dim: int, k: int) -> np.ndarray:
    """Extract sorted components from a full antisymmetric array."""
    arr = np.asarray(arr)
    if k == 0:
        return arr[..., None]
    lead = arr.shape[: arr.ndim - k]
    flat = arr.reshape(lead + (dim ** k,))
    idx = [np.ravel_multi_index(c, (dim,) * k) for c in combos(dim, k)]
    return flat[..., idx]


def wedge_components(a: np.ndarray, b: np.ndarray, dim: int, p: int, q: int) -> np.ndarray:
    a, b = np.asarray(a, float), np.asarray(b, float)
    lead = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    if p == 0:
        return np.broadcast_to(a[..., :1], lead + (1,)) * np.broadcast_to(b, lead + b.shape[-1:])
    if q == 0:
        return np.broadcast_to(a, lead + a.shape[-1:]) * np.broadcast_to(b[..., :1], lead + (1,))
    out_idx, a_idx, b_idx, signs = _wedge_table(dim, p, q)
    terms = signs * a[..., a_idx] * b[..., b_idx]
    out = np.zeros(lead + (comb(dim, p + q),))
    _scatter_add(out, out_idx, terms)
    return out


def _scatter_add(out: np.ndarray, idx: np.ndarray, terms: np.ndarray) -> None:
    # np.add.at is slow on large leading shapes; loop over output slots instead
    for pos in np.unique(idx):
        sel = idx == pos
        out[..., pos] = terms[..., sel].sum(axis=-1)


def contract_components(v: np.ndarray, w: np.ndarray, dim: int, k: int) -> np.ndarray:
    """Contract a 1-slot object ``v`` into the first slot of a degree-``k`` object ``w``."""
    v = np.asarray(v, float)
    w = np.asarray(w, float)
    lead = np.broadcast_shapes(v.shape[:-1], w.shape[:-1])
    if k == 0:
        return np.zeros(lead + (1,))
    out_idx, v_idx, w_idx, signs = _contract_table(dim, k)
    terms = signs * v[..., v_idx] * w[..., w_idx]
    out = np.zeros(lead + (comb(dim, k - 1),))
    _scatter_add(out, out_idx, terms)
    return out


def compound(M: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix: the minors ``det M[I, J]`` over sorted multi-indices."""
    M = np.asarray(M)
    dim = M.shape[-1]
    if k == 0:
        return np.ones(M.shape[:-2] + (1, 1))
    if k == 1:
        return M
    cs = np.array(combos(dim, k))
    if k == 2:
        a, b = cs[:, 0], cs[:, 1]
        Maa = M[..., a[:, None], a[None, :]]
        Mbb = M[..., b[:, None], b[None, :]]
        Mab = M[..., a[:, None], b[None, :]]
        Mba = M[..., b[:, None], a[None, :]]
        return Maa * Mbb - Mab * Mba
    sub = M[..., cs[:, None, :, None], cs[None, :, None, :]]
    return np.linalg.det(sub)


def transport(comps: np.ndarray, valence: Valence, jac: np.ndarray, inv_jac: np.ndarray) -> np.ndarray:
    """Pull back components evaluated at ``F(m)`` to ``m``.

    ``jac`` is ``D_m F`` with ``jac[..., a, b] = dF^a/dx^b``.  Forms are
    transported with the k-fold differential, multivectors with the k-fold
    inverse differential, scalars are just composed.
    """
    k = valence.degree
    if valence.kind == "scalar":
        return comps
    if valence.kind == "form":
        C = compound(jac, k)  # C[J, I] = det(dF^J / dx^I)
        return np.einsum("...ji,...j->...i", C, comps)
    C = compound(inv_jac, k)
    return np.einsum("...ij,...j->...i", C, comps)


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoordChart:
    """An axis-aligned box in R^n with named coordinates.

    ``excluded`` is an optional vectorized predicate marking points removed
    from the box (e.g. the origin).  ``periodic`` maps axis indices to their
    period; such axes are wrapped before the box test.
    """

    names: tuple
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None
    excluded: Optional[Callable[[np.ndarray], np.ndarray]] = None
    periodic: tuple = ()  # ((axis, period), ...)

    def __post_init__(self):
        names = tuple(self.names)
        if len(names) < 1:
            raise ValueError("a chart needs at least one coordinate")
        if len(set(names)) != len(names):
            raise ValueError(f"coordinate names must be distinct: {names}")
        object.__setattr__(self, "names", names)
        n = len(names)
        lo = (-np.inf,) * n if self.lower is None else tuple(float(x) for x in self.lower)
        hi = (np.inf,) * n if self.upper is None else tuple(float(x) for x in self.upper)
        if len(lo) != n or len(hi) != n:
            raise ValueError("bounds must have one entry per coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "periodic", tuple((int(a), float(p)) for a, p in dict(self.periodic).items()))

    @property
    def dim(self) -> int:
        return len(self.names)

    def symbols(self):
        return sp.symbols(self.names, real=True)

    def wrap(self, pts: np.ndarray) -> np.ndarray:
        if not self.periodic:
            return pts
        pts = np.array(pts, dtype=float, copy=True)
        for axis, period in self.periodic:
            base = self.lower[axis] if np.isfinite(self.lower[axis]) else 0.0
            pts[..., axis] = base + np.mod(pts[..., axis] - base, period)
        return pts

    def displacement(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``b - a`` with periodic axes reduced to ``[-period/2, period/2)``."""
        d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        for axis, period in self.periodic:
            d[..., axis] = np.mod(d[..., axis] + 0.5 * period, period) - 0.5 * period
        return d

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = self.wrap(np.asarray(pts, dtype=float))
        ok = np.all(np.isfinite(pts), axis=-1)
        ok &= np.all(pts >= np.array(self.lower), axis=-1)
        ok &= np.all(pts <= np.array(self.upper), axis=-1)
        if self.excluded is not None:
            ok &= ~np.asarray(self.excluded(pts), dtype=bool)
        return ok

    def check(self, pts: np.ndarray, what: str = "point") -> None:
        ok = self.contains(pts)
        if not np.all(ok):
            bad = np.asarray(pts).reshape(-1, self.dim)[~np.ravel(ok)][0]
            raise DomainError(f"{what} {bad.tolist()} lies outside the chart {self.names}")

    def product(self, other: "CoordChart") -> "CoordChart":
        n = self.dim
        e1, e2 = self.excluded, other.excluded

        def excluded(pts):
            out = np.zeros(pts.shape[:-1], dtype=bool)
            if e1 is not None:
                out |= np.asarray(e1(pts[..., :n]), dtype=bool)
            if e2 is not None:
                out |= np.asarray(e2(pts[..., n:]), dtype=bool)
            return out

        return CoordChart(
            self.names + other.names,
            self.lower + other.lower,
            self.upper + other.upper,
            None if e1 is None and e2 is None else excluded,
            self.periodic + tuple((a + n, p) for a, p in other.periodic),
        )


def as_points(pts, dim: int) -> np.ndarray:
    arr = np.asarray(pts, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {np.shape(pts)}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("points must have finite coordinates")
    return arr


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FDPolicy:
    """Central-difference step policy: ``h = max(abs_step, rel_step * |x|)`` per axis."""

    order: int = 2
    rel_step: float = 1e-6
    abs_step: float = 1e-6

    def __post_init__(self):
        if self.order not in (2, 4):
            raise ValueError("finite-difference order must be 2 or 4")


DEFAULT_FD = FDPolicy()
# fields produced by orbit integration are smooth but carry ~1e-13 noise
OPERATOR_FD = FDPolicy(order=4, rel_step=1e-3, abs_step=1e-3)

_STENCILS = {
    2: (np.array([-1.0, 1.0]), np.array([-0.5, 0.5])),
    4: (np.array([-2.0, -1.0, 1.0, 2.0]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
}


def fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], pts: np.ndarray, policy: FDPolicy,
                chart: Optional[CoordChart] = None) -> np.ndarray:
    P, dim = pts.shape
    offs, wts = _STENCILS[policy.order]
    h = np.maximum(policy.abs_step, policy.rel_step * np.abs(pts))  # (P, dim)
    S = len(offs)
    stencil = np.repeat(pts[:, None, None, :], dim, axis=1).repeat(S, axis=2)  # (P, dim, S, dim)
    for i in range(dim):
        stencil[:, i, :, i] += offs[None, :] * h[:, i, None]
    flat = stencil.reshape(-1, dim)
    if chart is not None:
        chart.check(flat, "finite-difference stencil point")
    vals = fn(flat)
    vals = vals.reshape(P, dim, S, -1)
    return np.einsum("pisc,s->pic", vals, wts) / h[:, :, None]


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


class TensorField:
    """A pointwise-evaluable scalar, k-vector or k-form field on a chart.

    Subclasses implement ``_evaluate`` and may override ``_jacobian`` (the
    default is the finite-difference policy) and ``orbit_signal``.
    Fields are immutable once built; arithmetic returns new fields.
    """

    fd_policy: FDPolicy = DEFAULT_FD

    def __init__(self, chart: CoordChart, valence: Valence, label: str = "",
                 fd_policy: Optional[FDPolicy] = None):
        self.chart = chart
        self.valence = valence
        self.label = label or type(self).__name__
        if fd_policy is not None:
            self.fd_policy = fd_policy

    # -- basic properties -------------------------------------------------
    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def ncomp(self) -> int:
        return self.valence.ncomp(self.dim)

    @property
    def degree(self) -> int:
        return self.valence.degree

    def __repr__(self):
        return f"<{type(self).__name__} {self.label!r}: {self.valence} on {self.chart.names}>"

    # -- evaluation -------------------------------------------------------
    def __call__(self, pts) -> np.ndarray:
        single = np.ndim(pts) == 1
        out = self.evaluate(pts)
        return out[0] if single else out

    def evaluate(self, pts) -> np.ndarray:
        pts = as_points(pts, self.dim)
        self.chart.check(pts)
        out = np.asarray(self._evaluate(pts), dtype=float)
        return out.reshape(pts.shape[0], self.ncomp)

    def jacobian(self, pts) -> np.ndarray:
        pts = as_points(pts, self.dim)
        self.chart.check(pts)
        return np.asarray(self._jacobian(pts), dtype=float).reshape(pts.shape[0], self.dim, self.ncomp)

    def value_and_jacobian(self, pts):
        return self.evaluate(pts), self.jacobian(pts)

    def _evaluate(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _jacobian(self, pts: np.ndarray) -> np.ndarray:
        return fd_jacobian(self._evaluate, pts, self.fd_policy, self.chart)

    def components(self, pts) -> dict:
        """Components at a single point as ``{multi-index: value}``."""
        vals = self.evaluate(pts)[0]
        return {c: float(v) for c, v in zip(combos(self.dim, self.degree), vals)}

    # -- orbit data -------------------------------------------------------
    def orbit_signal(self, orbit) -> np.ndarray:
        """Pulled-back components along sampled orbits, shape ``(P, N, ncomp)``."""
        return pullback_by_evaluation(orbit, self)

    # -- arithmetic -------------------------------------------------------
    def _same_space(self, other: "TensorField"):
        if other.chart is not self.chart and other.chart.names != self.chart.names:
            raise ValenceError("fields live on different charts")
        if other.valence != self.valence:
            raise ValenceError(f"cannot add {self.valence} and {other.valence}")

    def __add__(self, other):
        if not isinstance(other, TensorField):
            return NotImplemented
        self._same_space(other)
        return LinearCombination([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        if not isinstance(other, TensorField):
            return NotImplemented
        self._same_space(other)
        return LinearCombination([(1.0, self), (-1.0, other)])

    def __neg__(self):
        return LinearCombination([(-1.0, self)])

    def __mul__(self, other):
        if isinstance(other, TensorField):
            if other.valence.kind != "scalar" and self.valence.kind != "scalar":
                raise ValenceError("use wedge() for products of non-scalar fields")
            return wedge(self, other)
        if np.isscalar(other):
            return LinearCombination([(float(other), self)])
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TensorField):
            if other.valence.kind != "scalar":
                raise ValenceError("can only divide by a scalar field")
            return wedge(other.apply(lambda s: 1.0 / s, lambda s: -1.0 / s ** 2, "1/"), self)
        if np.isscalar(other):
            return LinearCombination([(1.0 / float(other), self)])
        return NotImplemented

    def apply(self, fn: Callable, dfn: Callable, name: str = "f") -> "TensorField":
        """Compose a scalar field with a smooth real function (``dfn`` is its derivative)."""
        if self.valence.kind != "scalar":
            raise ValenceError("apply() needs a scalar field")
        return ScalarMap(self, fn, dfn, name)


def pullback_by_evaluation(orbit, Xi: TensorField) -> np.ndarray:
    """Evaluate ``Xi`` at every orbit node and transport back to the base point."""
    P, N, dim = orbit.nodes.shape
    vals = Xi.evaluate(orbit.nodes.reshape(-1, dim)).reshape(P, N, Xi.ncomp)
    return transport(vals, Xi.valence, orbit.jacobians, orbit.inverse_jacobians)


class CallableField(TensorField):
    """Field given by vectorized callables ``fn(pts) -> (P, ncomp)``.

    ``jac(pts) -> (P, dim, ncomp)`` is optional; without it the
    finite-difference policy is used.
    """

    def __init__(self, chart, valence, fn, jac=None, label="", fd_policy=None):
        super().__init__(chart, valence, label, fd_policy)
        self._fn = fn
        self._jac = jac

    def _evaluate(self, pts):
        return self._fn(pts)

    def _jacobian(self, pts):
        if self._jac is None:
            return super()._jacobian(pts)
        return self._jac(pts)


class ConstantField(TensorField):
    def __init__(self, chart, valence, values, label=""):
        super().__init__(chart, valence, label or "const")
        self.values = np.broadcast_to(np.asarray(values, dtype=float), (valence.ncomp(chart.dim),)).copy()

    def _evaluate(self, pts):
        return np.broadcast_to(self.values, (pts.shape[0], self.ncomp)).copy()

    def _jacobian(self, pts):
        return np.zeros((pts.shape[0], self.dim, self.ncomp))


def constant(chart: CoordChart, valence: Valence, values, label: str = "") -> ConstantField:
    return ConstantField(chart, valence, values, label)


def zero(chart: CoordChart, valence: Valence) -> ConstantField:
    return ConstantField(chart, valence, 0.0, "0")


class LinearCombination(TensorField):
    def __init__(self, terms):
        first = terms[0][1]
        super().__init__(first.chart, first.valence,
                         " + ".join(f"{c:g}*{f.label}" for c, f in terms))
        self.terms = [(float(c), f) for c, f in terms]

    def _evaluate(self, pts):
        return sum(c * f.evaluate(pts) for c, f in self.terms)

    def _jacobian(self, pts):
        return sum(c * f.jacobian(pts) for c, f in self.terms)

    def orbit_signal(self, orbit):
        return sum(c * f.orbit_signal(orbit) for c, f in self.terms)


class Bilinear(TensorField):
    """A natural bilinear combination of two fields (wedge, contraction).

    Because pullbacks commute with natural operations, orbit signals are
    combined from the operands' signals; the Jacobian follows the product rule.
    """

    def __init__(self, a: TensorField, b: TensorField, op: Callable, valence: Valence, label: str):
        super().__init__(a.chart, valence, label)
        self.a, self.b, self.op = a, b, op

    def _evaluate(self, pts):
        return self.op(self.a.evaluate(pts), self.b.evaluate(pts))

    def _jacobian(self, pts):
        a, ja = self.a.value_and_jacobian(pts)
        b, jb = self.b.value_and_jacobian(pts)
        return self.op(ja, b[:, None, :]) + self.op(a[:, None, :], jb)

    def orbit_signal(self, orbit):
        return self.op(self.a.orbit_signal(orbit), self.b.orbit_signal(orbit))


class ScalarMap(TensorField):
    def __init__(self, s: TensorField, fn, dfn, name="f"):
        super().__init__(s.chart, Valence.scalar(), f"{name}({s.label})")
        self.s, self.fn, self.dfn = s, fn, dfn

    def _evaluate(self, pts):
        return self.fn(self.s.evaluate(pts))

    def _jacobian(self, pts):
        v, j = self.s.value_and_jacobian(pts)
        return self.dfn(v)[:, None, :] * j

    def orbit_signal(self, orbit):
        return self.fn(self.s.orbit_signal(orbit))


class PointwiseField(TensorField):
    """Field computed pointwise from other fields' components by ``fn``.

    Set ``natural=True`` only when ``fn`` commutes with changes of
    coordinates (e.g. solving a linear system against a frame); then orbit
    signals are built from the children's signals instead of re-evaluating.
    """

    def __init__(self, children: Sequence[TensorField], fn: Callable, valence: Valence,
                 label: str = "", natural: bool = False, fd_policy=None):
        chart = children[0].chart
        super().__init__(chart, valence, label, fd_policy)
        self.children = list(children)
        self.fn = fn
        self.natural = natural
        if fd_policy is None:
            self.fd_policy = max((c.fd_policy for c in self.children), key=lambda p: p.rel_step)

    def _evaluate(self, pts):
        return self.fn(*[c.evaluate(pts) for c in self.children])

    def orbit_signal(self, orbit):
        if not self.natural:
            return super().orbit_signal(orbit)
        return self.fn(*[c.orbit_signal(orbit) for c in self.children])


# ---------------------------------------------------------------------------
# exterior algebra operations
# ---------------------------------------------------------------------------


def _check_chart(a: TensorField, b: TensorField):
    if a.chart is not b.chart and a.chart.names != b.chart.names:
        raise ValenceError("fields live on different charts")


def wedge(a: TensorField, b: TensorField) -> TensorField:
    """Exterior product of two k-vector fields or two k-forms (scalars act by multiplication)."""
    _check_chart(a, b)
    ka, kb = a.valence.kind, b.valence.kind
    if "scalar" not in (ka, kb) and ka != kb:
        raise ValenceError(f"cannot wedge a {a.valence} with a {b.valence}")
    p, q = a.degree, b.degree
    dim = a.dim
    if p + q > dim:
        raise ValenceError(f"degree overflow: {p} + {q} > {dim}")
    kind = kb if ka == "scalar" else ka
    valence = Valence.scalar() if p + q == 0 else Valence(kind, p + q)

    def op(x, y):
        return wedge_components(x, y, dim, p, q)

    return Bilinear(a, b, op, valence, f"({a.label})^({b.label})")


def interior_form(Y: TensorField, eta: TensorField) -> TensorField:
    """``i_Y eta``: contraction of a vector field into the first slot of a k-form."""
    _check_chart(Y, eta)
    if Y.valence != Valence.vector(1):
        raise ValenceError("interior_form needs a vector field as first argument")
    if eta.valence.kind != "form":
        raise ValenceError("interior_form needs a k-form with k >= 1")
    k, dim = eta.degree, eta.dim

    def op(v, w):
        return contract_components(v, w, dim, k)

    return Bilinear(Y, eta, op, Valence.form(k - 1), f"i[{Y.label}]({eta.label})")


def interior_multivector(alpha: TensorField, A: TensorField) -> TensorField:
    """``i_alpha A``: contraction of a 1-form into the first slot of a k-vector field.

    For a 0-vector field (a scalar) the result is the zero scalar.
    """
    _check_chart(alpha, A)
    if alpha.valence != Valence.form(1):
        raise ValenceError("interior_multivector needs a 1-form as first argument")
    if A.valence.kind == "form":
        raise ValenceError("interior_multivector needs a k-vector field")
    if A.valence.kind == "scalar":
        return zero(A.chart, Valence.scalar())
    k, dim = A.degree, A.dim

    def op(v, w):
        return contract_components(v, w, dim, k)

    return Bilinear(alpha, A, op, Valence.vector(k - 1), f"i[{alpha.label}]({A.label})")


def _d_components(jac: np.ndarray, dim: int, k: int) -> np.ndarray:
    # (d eta)_I = sum_r (-1)^r d_{i_r} eta_{I \ i_r}
    idx = _combo_index(dim, k)
    out = np.zeros(jac.shape[:-2] + (comb(dim, k + 1),))
    for pos, I in enumerate(combos(dim, k + 1)):
        for r, i in enumerate(I):
            rest = I[:r] + I[r + 1:]
            out[..., pos] += (-1) ** r * jac[..., i, idx[rest]]
    return out


class ExteriorDerivative(TensorField):
    def __init__(self, eta: TensorField):
        super().__init__(eta.chart, Valence.form(eta.degree + 1), f"d({eta.label})",
                         eta.fd_policy)
        self.eta = eta

    def _evaluate(self, pts):
        return _d_components(self.eta.jacobian(pts), self.dim, self.eta.degree)


def exterior_derivative(eta: TensorField) -> TensorField:
    if eta.valence.kind == "vector":
        raise ValenceError("exterior derivative is defined on forms and scalars")
    if eta.degree >= eta.dim:
        raise ValenceError(f"d of a {eta.degree}-form vanishes identically in dimension {eta.dim}")
    return ExteriorDerivative(eta)


def _lie_components(Yv, DY, T, DT, valence: Valence, dim: int) -> np.ndarray:
    """Coordinate Lie derivative ``L_Y T`` from values and Jacobians.

    ``DY[..., i, a] = d_i Y^a`` and ``DT[..., i, c] = d_i T_c``.
    """
    k = valence.degree
    transported = np.einsum("...i,...ic->...c", Yv, DT)
    if valence.kind == "scalar":
        return transported
    dense = to_dense(T, dim, k)
    corr = np.zeros_like(dense)
    # align the batch axes of DY with the remaining k-1 slot axes of T
    DY = DY.reshape(DY.shape[:-2] + (1,) * (k - 1) + DY.shape[-2:])
    for slot in range(k):
        moved = np.moveaxis(dense, -k + slot, -1)  # slot index last
        if valence.kind == "form":
            # + (d_{a_r} Y^j) T_{.. j ..}
            term = np.einsum("...aj,...j->...a", DY, moved)
        else:
            # - (d_j Y^{a_r}) T^{.. j ..}
            term = -np.einsum("...ja,...j->...a", DY, moved)
        corr += np.moveaxis(term, -1, -k + slot)
    return transported + from_dense(corr, dim, k)


class LieDerivative(TensorField):
    def __init__(self, Y: TensorField, T: TensorField):
        fd = max((Y.fd_policy, T.fd_policy), key=lambda p: p.rel_step)
        super().__init__(T.chart, T.valence, f"L[{Y.label}]({T.label})", fd)
        self.Y, self.T = Y, T

    def _evaluate(self, pts):
        Yv, DY = self.Y.value_and_jacobian(pts)
        Tv, DT = self.T.value_and_jacobian(pts)
        return _lie_components(Yv, DY, Tv, DT, self.T.valence, self.dim)


def lie_derivative(Y: TensorField, T: TensorField) -> TensorField:
    """Lie derivative of any scalar, k-vector or k-form field along the vector field ``Y``."""
    _check_chart(Y, T)
    if Y.valence != Valence.vector(1):
        raise ValenceError("Lie derivative needs a vector field")
    return LieDerivative(Y, T)


def lie_bracket(X: TensorField, Z: TensorField) -> TensorField:
    """``[X, Z] = (DZ) X - (DX) Z``."""
    if Z.valence != Valence.vector(1):
        raise ValenceError("lie_bracket needs two vector fields")
    return lie_derivative(X, Z)


# ---------------------------------------------------------------------------
# symbolic construction
# ---------------------------------------------------------------------------


def _lambdify_columns(exprs, syms):
    fn = sp.lambdify(syms, list(exprs), "numpy", cse=True)

    def call(pts):
        cols = fn(*[pts[:, i] for i in range(pts.shape[1])])
        P = pts.shape[0]
        return np.stack([np.broadcast_to(np.asarray(c, dtype=float), (P,)) for c in cols], axis=-1)

    return call


class SympyField(CallableField):
    """Field whose components are sympy expressions in the chart coordinates.

    Values and analytic Jacobians are compiled together so that shared
    subexpressions are evaluated once per call.
    """

    def __init__(self, chart, valence, exprs, label=""):
        syms = chart.symbols()
        exprs = [sp.sympify(e) for e in exprs]
        if len(exprs) != valence.ncomp(chart.dim):
            raise ValenceError(f"{valence} on a {chart.dim}-dim chart needs "
                               f"{valence.ncomp(chart.dim)} components, got {len(exprs)}")
        self.exprs = exprs
        self.symbols = syms
        fn = _lambdify_columns(exprs, syms)
        jac_exprs = [sp.diff(e, s) for s in syms for e in exprs]
        jfn = _lambdify_columns(jac_exprs, syms)
        both = _lambdify_columns(list(exprs) + jac_exprs, syms)
        nc, dim = len(exprs), chart.dim

        def jac(pts):
            return jfn(pts).reshape(pts.shape[0], dim, nc)

        def value_and_jac(pts):
            out = both(pts)
            return out[:, :nc], out[:, nc:].reshape(pts.shape[0], dim, nc)

        self._both = value_and_jac
        super().__init__(chart, valence, fn, jac, label or str(exprs))

    def value_and_jacobian(self, pts):
        pts = as_points(pts, self.dim)
        self.chart.check(pts)
        return self._both(pts)


def from_sympy(chart: CoordChart, valence: Valence, components, label: str = "") -> SympyField:
    """Build a field from sympy expressions.

    ``components`` is a list over the sorted multi-indices, or a dict keyed by
    multi-index tuples (missing entries are zero).  Scalars accept a bare
    expression.
    """
    nc = valence.ncomp(chart.dim)
    if isinstance(components, dict):
        idx = _combo_index(chart.dim, valence.degree)
        exprs = [sp.Integer(0)] * nc
        for key, e in components.items():
            key = (key,) if isinstance(key, int) else tuple(key)
            s = tuple(sorted(key))
            exprs[idx[s]] = _perm_sign(key) * sp.sympify(e)
    elif valence.kind == "scalar" and not isinstance(components, (list, tuple)):
        exprs = [components]
    else:
        exprs = list(components)
    return SympyField(chart, valence, exprs, label)
