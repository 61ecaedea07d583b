"""Exterior algebra, Lie derivatives and component transport."""
import itertools
from math import comb

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from s1avg.errors import DomainError, ValenceError
from s1avg.tensor import (CoordChart, Valence, combos, compound, contract_components, constant,
                          exterior_derivative, from_dense, from_sympy, interior_form,
                          interior_multivector, lie_bracket, lie_derivative, to_dense, transport,
                          wedge, wedge_components, zero)

from conftest import maxabs

PLANE = CoordChart(("q", "p"))
SPACE = CoordChart(("x", "y", "z"), (-3, -3, -3), (3, 3, 3))
finite = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)


def comps(dim, k):
    return arrays(float, (comb(dim, k),), elements=finite)


# -- oracles -----------------------------------------------------------------


def test_coframe_wedge():
    q, p = PLANE.symbols()
    dq = from_sympy(PLANE, Valence.form(1), [1, 0])
    dp = from_sympy(PLANE, Valence.form(1), [0, 1])
    assert wedge(dq, dp).components([5.0, -1.0]) == {(0, 1): 1.0}


def test_wedge_hand_expansion():
    q, p = PLANE.symbols()
    a = from_sympy(PLANE, Valence.form(1), [0, q])
    b = from_sympy(PLANE, Valence.form(1), [p, 0])
    assert wedge(a, b).components([2.0, 3.0]) == {(0, 1): -6.0}


def test_interior_of_area_form():
    q, p = PLANE.symbols()
    area = from_sympy(PLANE, Valence.form(2), [1])
    dq_vec = from_sympy(PLANE, Valence.vector(1), [1, 0])
    np.testing.assert_allclose(interior_form(dq_vec, area)([0.3, 0.2]), [0.0, 1.0])
    X = from_sympy(PLANE, Valence.vector(1), [p, -q])
    np.testing.assert_allclose(interior_form(X, area)([1.0, 2.0]), [1.0, 2.0])
    np.testing.assert_allclose(interior_form(zero(PLANE, Valence.vector(1)), area)([1.0, 2.0]), 0.0)


def test_interior_multivector_oracles():
    q, p = PLANE.symbols()
    dq = from_sympy(PLANE, Valence.form(1), [1, 0])
    biv = from_sympy(PLANE, Valence.vector(2), [1])
    np.testing.assert_allclose(interior_multivector(dq, biv)([0.1, 0.1]), [0.0, 1.0])
    X = from_sympy(PLANE, Valence.vector(1), [p, -q])
    dH = exterior_derivative(from_sympy(PLANE, Valence.scalar(), (q ** 2 + p ** 2) / 2))
    assert abs(interior_multivector(dH, X)([1.0, 1.0])[0]) < 1e-12
    s = from_sympy(PLANE, Valence.scalar(), q * p)
    np.testing.assert_allclose(interior_multivector(dq, s)([1.0, 1.0]), [0.0])


def test_exterior_derivative_oracles():
    q, p = PLANE.symbols()
    qdp = from_sympy(PLANE, Valence.form(1), [0, q])
    np.testing.assert_allclose(exterior_derivative(qdp)([0.7, -1.1]), [1.0], atol=1e-9)
    H = from_sympy(PLANE, Valence.scalar(), (q ** 2 + p ** 2) / 2)
    assert maxabs(exterior_derivative(exterior_derivative(H))([[0.3, 0.4], [1.0, -2.0]])) < 1e-8


def test_bracket_oracles():
    q, p = PLANE.symbols()
    dq = from_sympy(PLANE, Valence.vector(1), [1, 0])
    dp = from_sympy(PLANE, Valence.vector(1), [0, 1])
    X = from_sympy(PLANE, Valence.vector(1), [p, -q])
    E = from_sympy(PLANE, Valence.vector(1), [q, 0])
    pt = np.array([[1.0, 0.0], [0.4, 1.3]])
    assert maxabs(lie_bracket(dq, dp).evaluate(pt)) < 1e-12
    assert maxabs(lie_bracket(X, X).evaluate(pt)) < 1e-12
    # brute force: [X, E]^a = X^i d_i E^a - E^i d_i X^a
    xv, ev = X.evaluate(pt), E.evaluate(pt)
    dX = np.array([[[0, -1], [1, 0]]] * 2, dtype=float)  # d_i X^a
    dE = np.array([[[1, 0], [0, 0]]] * 2, dtype=float)
    expected = np.einsum("pi,pia->pa", xv, dE) - np.einsum("pi,pia->pa", ev, dX)
    np.testing.assert_allclose(lie_bracket(X, E).evaluate(pt), expected, atol=1e-9)
    np.testing.assert_allclose(lie_bracket(X, E)([1.0, 0.0]), [0.0, 1.0], atol=1e-9)


def test_valence_errors():
    q, p = PLANE.symbols()
    v = from_sympy(PLANE, Valence.vector(1), [p, -q])
    a = from_sympy(PLANE, Valence.form(1), [0, q])
    with pytest.raises(ValenceError):
        wedge(v, a)
    with pytest.raises(ValenceError):
        v + a
    with pytest.raises(ValenceError):
        exterior_derivative(v)
    with pytest.raises(ValenceError):
        interior_form(a, a)
    with pytest.raises(ValenceError):
        Valence("spinor", 1)
    with pytest.raises(ValenceError):
        from_sympy(PLANE, Valence.form(1), [q])


def test_chart_domain_and_wrapping():
    ch = CoordChart(("s", "phi"), (0.0, 0.0), (1.0, 2 * np.pi), periodic=((1, 2 * np.pi),))
    assert ch.contains(np.array([[0.5, 7.0]]))[0]
    assert not ch.contains(np.array([[1.5, 0.0]]))[0]
    d = ch.displacement(np.array([0.2, 6.2]), np.array([0.2, 0.1]))
    assert abs(d[1] - (0.1 - 6.2 + 2 * np.pi)) < 1e-12
    f = constant(ch, Valence.scalar(), [1.0])
    with pytest.raises(DomainError):
        f([2.0, 0.0])
    with pytest.raises(ValueError):
        CoordChart(("a", "a"))


def test_product_chart_exclusion():
    holed = CoordChart(("q", "p"), excluded=lambda x: np.hypot(x[..., 0], x[..., 1]) < 0.1)
    prod = holed.product(SPACE)
    assert prod.dim == 5
    assert not prod.contains(np.array([[0.0, 0.0, 1.0, 1.0, 1.0]]))[0]
    assert prod.contains(np.array([[1.0, 0.0, 1.0, 1.0, 1.0]]))[0]
    assert PLANE.product(PLANE.__class__(("u",))).excluded is None


# -- algebraic properties on components --------------------------------------


@given(comps(4, 1), comps(4, 1))
def test_wedge_alternation(a, b):
    ab = wedge_components(a, b, 4, 1, 1)
    ba = wedge_components(b, a, 4, 1, 1)
    np.testing.assert_allclose(ab, -ba, atol=1e-12)
    np.testing.assert_allclose(wedge_components(a, a, 4, 1, 1), 0.0, atol=1e-12)


@given(comps(5, 2), comps(5, 1), comps(5, 2))
def test_wedge_associative_and_graded(a, b, c):
    left = wedge_components(wedge_components(a, b, 5, 2, 1), c, 5, 3, 2)
    right = wedge_components(a, wedge_components(b, c, 5, 1, 2), 5, 2, 3)
    np.testing.assert_allclose(left, right, atol=1e-10)
    # graded commutativity: a ^ b = (-1)^{pq} b ^ a
    np.testing.assert_allclose(wedge_components(a, b, 5, 2, 1),
                               wedge_components(b, a, 5, 1, 2), atol=1e-12)


@given(comps(4, 1), comps(4, 2), comps(4, 1))
def test_interior_is_antiderivation(v, a, b):
    # i_v (a ^ b) = (i_v a) ^ b + (-1)^2 a ^ (i_v b), a a 2-form, b a 1-form
    lhs = contract_components(v, wedge_components(a, b, 4, 2, 1), 4, 3)
    t1 = wedge_components(contract_components(v, a, 4, 2), b, 4, 1, 1)
    t2 = wedge_components(a, contract_components(v, b, 4, 1), 4, 2, 0)
    np.testing.assert_allclose(lhs, t1 + t2, atol=1e-10)


@given(comps(4, 1), comps(4, 2))
def test_double_contraction_vanishes(v, a):
    once = contract_components(v, a, 4, 2)
    np.testing.assert_allclose(contract_components(v, once, 4, 1), 0.0, atol=1e-12)


@given(comps(4, 2))
def test_dense_roundtrip(a):
    dense = to_dense(a, 4, 2)
    np.testing.assert_allclose(dense, -dense.T)
    np.testing.assert_allclose(from_dense(dense, 4, 2), a)


@given(arrays(float, (4, 4), elements=finite), arrays(float, (4, 4), elements=finite),
       st.integers(1, 3))
def test_compound_is_multiplicative(A, B, k):
    np.testing.assert_allclose(compound(A @ B, k), compound(A, k) @ compound(B, k), atol=1e-8)


def test_compound_top_degree_is_determinant():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(3, 4, 4))
    np.testing.assert_allclose(compound(M, 4)[:, 0, 0], np.linalg.det(M))


@given(comps(3, 2), arrays(float, (3, 3), elements=finite), arrays(float, (3, 3), elements=finite))
def test_transport_group_property(w, A, B):
    A = A + 3 * np.eye(3)
    B = B + 3 * np.eye(3)
    for val in (Valence.form(2), Valence.vector(2)):
        step = transport(transport(w, val, A, np.linalg.inv(A)), val, B, np.linalg.inv(B))
        direct = transport(w, val, A @ B, np.linalg.inv(A @ B))
        np.testing.assert_allclose(step, direct, atol=1e-8)


def test_pairing_invariant_under_transport():
    # <F^* alpha, F^* v> = <alpha, v> with F^* v = (DF)^{-1} v
    rng = np.random.default_rng(1)
    A = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    a, v = rng.normal(size=6), rng.normal(size=6)
    fa = transport(a, Valence.form(2), A, np.linalg.inv(A))
    fv = transport(v, Valence.vector(2), A, np.linalg.inv(A))
    assert abs(fa @ fv - a @ v) < 1e-10


# -- calculus properties on polynomial fields ---------------------------------

coeffs = st.lists(st.integers(-3, 3), min_size=10, max_size=10)
points = arrays(float, (3, 3), elements=st.floats(-1.5, 1.5))


def poly(c):
    x, y, z = SPACE.symbols()
    monos = [1, x, y, z, x * y, y * z, x * z, x ** 2, y ** 2, z ** 3]
    return sum(ci * m for ci, m in zip(c, monos))


def field(kind, k, cs):
    n = comb(3, k)
    return from_sympy(SPACE, Valence(kind, k), [poly(cs[i::n] * 4 + [0] * 10) for i in range(n)])


@given(coeffs, coeffs, points)
def test_d_squared_zero(c1, c2, pts):
    f = from_sympy(SPACE, Valence.scalar(), poly(c1))
    a = field("form", 1, c1 + c2)
    assert maxabs(exterior_derivative(exterior_derivative(f)).evaluate(pts)) < 1e-6
    assert maxabs(exterior_derivative(exterior_derivative(a)).evaluate(pts)) < 1e-6


@given(coeffs, coeffs, coeffs, points)
def test_leibniz_rule(c1, c2, c3, pts):
    a = field("form", 1, c1 + c2)
    b = field("form", 1, c2 + c3)
    lhs = exterior_derivative(wedge(a, b))
    rhs = wedge(exterior_derivative(a), b) - wedge(a, exterior_derivative(b))
    assert maxabs(lhs.evaluate(pts) - rhs.evaluate(pts)) < 1e-6


@given(coeffs, coeffs, points)
def test_cartan_formula(c1, c2, pts):
    Y = field("vector", 1, c1)
    eta = field("form", 2, c2 + c1)
    cartan = interior_form(Y, exterior_derivative(eta)) + exterior_derivative(interior_form(Y, eta))
    assert maxabs(lie_derivative(Y, eta).evaluate(pts) - cartan.evaluate(pts)) < 1e-5


@settings(max_examples=6)
@given(coeffs, coeffs, coeffs, points)
def test_jacobi_identity(c1, c2, c3, pts):
    A, B, C = field("vector", 1, c1), field("vector", 1, c2), field("vector", 1, c3)
    syms = SPACE.symbols()

    def br(U, V):
        return [sum(U[i] * sp.diff(V[a], syms[i]) - V[i] * sp.diff(U[a], syms[i])
                    for i in range(3)) for a in range(3)]

    a, b, c = A.exprs, B.exprs, C.exprs
    total = [sp.expand(u + v + w) for u, v, w in zip(br(a, br(b, c)), br(b, br(c, a)), br(c, br(a, b)))]
    assert total == [0, 0, 0]
    ab = from_sympy(SPACE, Valence.vector(1), br(a, b))
    # the numeric bracket agrees with the symbolic one
    assert maxabs(lie_bracket(A, B).evaluate(pts) - ab.evaluate(pts)) < 1e-5


@given(coeffs, coeffs, coeffs, points)
def test_lie_derivative_is_derivation_of_wedge(c1, c2, c3, pts):
    Y = field("vector", 1, c3)
    a, b = field("vector", 1, c1), field("vector", 2, c2 + c1)
    lhs = lie_derivative(Y, wedge(a, b))
    rhs = wedge(lie_derivative(Y, a), b) + wedge(a, lie_derivative(Y, b))
    assert maxabs(lhs.evaluate(pts) - rhs.evaluate(pts)) < 1e-5


def test_combos_are_sorted():
    for dim, k in itertools.product(range(1, 6), range(0, 4)):
        cs = combos(dim, k)
        assert list(cs) == sorted(cs)
        assert all(all(i < j for i, j in zip(c, c[1:])) and all(i < dim for i in c) for c in cs)
