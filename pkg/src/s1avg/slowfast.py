"""Slow-fast Hamiltonian systems on products of symplectic manifolds.

The phase space is ``M = M1 x M2`` with the 2-form
``sigma = pi1^* sigma1 + eps pi2^* sigma2``.  A Hamiltonian
``H_eps = f o pi1 + eps F`` has the vector field ``V + eps W`` where
``V = v_f^ + V_F^(2)`` and ``W = V_F^(1)`` are obtained from partial
symplectic gradients on the two factors.

Conventions: a 2-form is stored through its matrix ``S[i, j] = sigma(e_i, e_j)``
and the Hamiltonian vector field solves ``i_V sigma = -dH``, which for that
matrix reads ``S V = dH``.  With coordinates ``(q, p)`` and ``sigma = dp ^ dq``
this gives ``V = H_p d/dq - H_q d/dp``.

Everything here is symbolic in the chart coordinates (sympy) so that the
vector fields carry exact Jacobians; averaging, solving and residual checks
go through the numerical layers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
import sympy as sp
from scipy.integrate import quad

from .averaging import averaged, s2_field, s_field
from .errors import DegenerateError, SolvabilityError, ValenceError
from .flows import IntegratorConfig, PeriodicFlow, detect_period, flow, flow_with_jacobian
from .homological import check_invariant, homological_residual
from .tensor import (CoordChart, SympyField, TensorField, Valence, as_points, combos,
                     exterior_derivative, from_sympy, interior_form, lie_derivative, to_dense,
                     wedge)

__all__ = [
    "ProductPhaseSpace",
    "SlowFastHamiltonian",
    "MonodromyRecord",
    "HamiltonizationResult",
    "InvariantSymplecticResult",
    "partial_derivatives",
    "hamiltonian_split",
    "monodromy",
    "periodicity_certificate",
    "check_frequency_preservation",
    "hamiltonize",
    "invariant_symplectic",
    "quartic_constant_c",
    "resonance_lhs",
    "is_resonant",
    "rational_resonance",
    "delta_from_r",
    "in_delta_set",
    "resonance_table",
]


# ---------------------------------------------------------------------------
# symbolic helpers
# ---------------------------------------------------------------------------


def _two_form_matrix(form: SympyField) -> sp.Matrix:
    if form.valence != Valence.form(2):
        raise ValenceError("expected a 2-form")
    n = form.dim
    S = sp.zeros(n, n)
    for (i, j), e in zip(combos(n, 2), form.exprs):
        S[i, j] = e
        S[j, i] = -e
    return S


def _solve_symbolic(S: sp.Matrix, rhs: sp.Matrix):
    """``S V = rhs`` symbolically; falls back to the pseudo-inverse when ``S`` is singular."""
    det = sp.simplify(S.det())
    if det != 0:
        return sp.simplify(S.LUsolve(rhs)), False
    return sp.simplify(S.pinv() * rhs), True


@dataclass
class ProductPhaseSpace:
    """``(M1 x M2, pi1^* sigma1 + eps pi2^* sigma2)`` on a product chart.

    ``fast_frame`` optionally maps fast coordinates ``(P, n2)`` to a basis of
    the tangent space of ``M2`` as columns ``(P, n2, r)``; it is needed when
    ``M2`` is a submanifold represented in ambient coordinates.
    """

    chart1: CoordChart
    sigma1: SympyField
    chart2: CoordChart
    sigma2: SympyField
    epsilon: float = 1.0
    fast_frame: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if set(self.chart1.names) & set(self.chart2.names):
            raise ValueError("slow and fast coordinates must have distinct names")
        self.chart = self.chart1.product(self.chart2)
        self.n1, self.n2 = self.chart1.dim, self.chart2.dim
        self.symbols = self.chart.symbols()
        self.S1 = _two_form_matrix(self.sigma1)
        self.S2 = _two_form_matrix(self.sigma2)

    # -- fields on M -----------------------------------------------------------
    def scalar(self, expr, label: str = "") -> SympyField:
        return from_sympy(self.chart, Valence.scalar(), sp.sympify(expr), label)

    def vector(self, comps, label: str = "") -> SympyField:
        return from_sympy(self.chart, Valence.vector(1), list(comps), label)

    def form1(self, comps, label: str = "") -> SympyField:
        return from_sympy(self.chart, Valence.form(1), list(comps), label)

    def sigma_matrix(self, eps: Optional[float] = None) -> sp.Matrix:
        eps = self.epsilon if eps is None else eps
        S = sp.zeros(self.chart.dim, self.chart.dim)
        S[:self.n1, :self.n1] = self.S1
        S[self.n1:, self.n1:] = eps * self.S2
        return S

    def sigma(self, eps: Optional[float] = None) -> SympyField:
        S = self.sigma_matrix(eps)
        comps = [S[i, j] for i, j in combos(self.chart.dim, 2)]
        return from_sympy(self.chart, Valence.form(2), comps, "sigma")

    def slow_form(self) -> SympyField:
        return self.sigma(0.0)

    def fast_form(self) -> SympyField:
        S = self.sigma_matrix(1.0) - self.sigma_matrix(0.0)
        return from_sympy(self.chart, Valence.form(2),
                          [S[i, j] for i, j in combos(self.chart.dim, 2)], "sigma2")

    # -- tangent frames ------------------------------------------------------------
    def tangent_frame(self, pts) -> np.ndarray:
        """Basis of ``T_m M`` as columns, shape ``(P, dim, r)``."""
        pts = as_points(pts, self.chart.dim)
        P = pts.shape[0]
        if self.fast_frame is None:
            return np.broadcast_to(np.eye(self.chart.dim), (P, self.chart.dim, self.chart.dim)).copy()
        fast = self.fast_frame(pts[:, self.n1:])
        r = fast.shape[-1]
        T = np.zeros((P, self.chart.dim, self.n1 + r))
        T[:, :self.n1, :self.n1] = np.eye(self.n1)
        T[:, self.n1:, self.n1:] = fast
        return T

    def restrict(self, T: TensorField, pts) -> np.ndarray:
        """Components of a 1-form or 2-form on the tangent frame (a vector or matrix per point)."""
        pts = as_points(pts, self.chart.dim)
        fr = self.tangent_frame(pts)
        vals = T.evaluate(pts)
        if T.valence == Valence.form(1):
            return np.einsum("pi,pir->pr", vals, fr)
        if T.valence == Valence.form(2):
            dense = to_dense(vals, self.chart.dim, 2)
            return np.einsum("pir,pij,pjs->prs", fr, dense, fr)
        if T.valence == Valence.scalar():
            return vals
        raise ValenceError("restriction is implemented for scalars, 1-forms and 2-forms")

    def check_factors(self, pts, tol: float = 1e-9) -> dict:
        """Closedness and nondegeneracy of both factor forms at points of ``M``."""
        pts = as_points(pts, self.chart.dim)
        out = {}
        for name, form, n in (("sigma1", self.sigma1, self.n1), ("sigma2", self.sigma2, self.n2)):
            sub = pts[:, :self.n1] if name == "sigma1" else pts[:, self.n1:]
            closed = 0.0
            if n >= 3 and not (name == "sigma2" and self.fast_frame is not None):
                closed = float(np.max(np.abs(exterior_derivative(form).evaluate(sub))))
            S = to_dense(form.evaluate(sub), n, 2)
            if name == "sigma2" and self.fast_frame is not None:
                fr = self.fast_frame(sub)
                S = np.einsum("pir,pij,pjs->prs", fr, S, fr)
            dets = np.abs(np.linalg.det(S))
            out[name] = {"closed": closed, "min_abs_det": float(dets.min())}
            if closed > tol:
                raise DegenerateError(f"{name} is not closed (|d sigma| = {closed:.3g})")
            if dets.min() < tol:
                raise DegenerateError(f"{name} is degenerate at a probe point")
        return out


def partial_derivatives(pps: ProductPhaseSpace, H) -> tuple:
    """``(d1 H, d2 H)``: the differential split along the two factors."""
    H = sp.sympify(H)
    syms = pps.symbols
    g = [sp.diff(H, s) for s in syms]
    n1 = pps.n1
    d1 = [g[i] if i < n1 else sp.Integer(0) for i in range(len(syms))]
    d2 = [sp.Integer(0) if i < n1 else g[i] for i in range(len(syms))]
    return pps.form1(d1, "d1H"), pps.form1(d2, "d2H")


def _split_exprs(pps: ProductPhaseSpace, H):
    H = sp.sympify(H)
    syms = pps.symbols
    n1 = pps.n1
    d1 = sp.Matrix([sp.diff(H, s) for s in syms[:n1]])
    d2 = sp.Matrix([sp.diff(H, s) for s in syms[n1:]])
    V1, deg1 = _solve_symbolic(pps.S1, d1)
    V2, deg2 = _solve_symbolic(pps.S2, d2)
    zeros1 = [sp.Integer(0)] * n1
    zeros2 = [sp.Integer(0)] * pps.n2
    return list(V1) + zeros2, zeros1 + list(V2), deg1 or deg2


def hamiltonian_split(pps: ProductPhaseSpace, H) -> tuple:
    """``(V_H^(1), V_H^(2))`` with ``i_{V1}(pi1^* sigma1) = -d1 H`` and ``i_{V2}(pi2^* sigma2) = -d2 H``.

    Each part is tangent to its factor.  A degenerate factor form (a
    submanifold in ambient coordinates) is inverted by the pseudo-inverse,
    which returns the tangent solution.
    """
    v1, v2, _ = _split_exprs(pps, H)
    return pps.vector(v1, "V1"), pps.vector(v2, "V2")


# ---------------------------------------------------------------------------
# slow-fast Hamiltonians
# ---------------------------------------------------------------------------


class SlowFastHamiltonian:
    """``H_eps = f o pi1 + eps F`` with ``V = v_f^ + V_F^(2)`` and ``W = V_F^(1)``."""

    def __init__(self, pps: ProductPhaseSpace, f, F, label: str = ""):
        self.pps = pps
        self.f_expr = sp.sympify(f)
        self.F_expr = sp.sympify(F)
        fast = set(pps.symbols[pps.n1:])
        if self.f_expr.free_symbols & fast:
            raise ValenceError("f must depend on the slow coordinates only")
        self.label = label
        self.f = pps.scalar(self.f_expr, "f")
        self.F = pps.scalar(self.F_expr, "F")
        vf, _, _ = _split_exprs(pps, self.f_expr)
        F1, F2, _ = _split_exprs(pps, self.F_expr)
        self.vf_exprs = vf
        self.V_exprs = [sp.simplify(a + b) for a, b in zip(vf, F2)]
        self.W_exprs = F1
        self.v_f_hat = pps.vector(vf, "v_f")
        self.V_F1 = pps.vector(F1, "V_F1")
        self.V_F2 = pps.vector(F2, "V_F2")
        self.VV = pps.vector(self.V_exprs, "V")
        self.WW = pps.vector(self.W_exprs, "W")
        self.v_f = from_sympy(pps.chart1, Valence.vector(1), vf[:pps.n1], "v_f on M1")

    def hamiltonian(self, eps: float) -> SympyField:
        return self.pps.scalar(self.f_expr + eps * self.F_expr, "H_eps")

    def full_field(self, eps: float) -> SympyField:
        return self.pps.vector([a + eps * b for a, b in zip(self.V_exprs, self.W_exprs)], "V+eps W")

    def direct_field(self, eps: float) -> TensorField:
        """Hamiltonian field of ``H_eps`` solved against the full ``sigma`` (second route)."""
        S = self.pps.sigma_matrix(eps)
        H = self.f_expr + eps * self.F_expr
        dH = sp.Matrix([sp.diff(H, s) for s in self.pps.symbols])
        V, _ = _solve_symbolic(S, dH)
        return self.pps.vector(list(V), "V_H(direct)")

    def periodic_flow(self, omega, **kw) -> PeriodicFlow:
        om = self.pps.scalar(omega, "omega")
        return PeriodicFlow(self.VV, om, label="V", **kw)

    def slow_flow(self, varpi, **kw) -> PeriodicFlow:
        om = from_sympy(self.pps.chart1, Valence.scalar(), sp.sympify(varpi), "varpi")
        return PeriodicFlow(self.v_f, om, label="v_f", **kw)


# ---------------------------------------------------------------------------
# monodromy
# ---------------------------------------------------------------------------


@dataclass
class MonodromyRecord:
    """Fiber map after one slow period, as an affine map ``m2 -> A m2 + b``."""

    base1: np.ndarray
    tau: float
    matrix: np.ndarray
    offset: np.ndarray
    k_tested: int
    errors: np.ndarray  # ||g^j - id|| for j = 1..k_tested
    tol: float
    linearity_error: float
    symplectic_error: float

    @property
    def is_k_periodic(self) -> bool:
        return bool(np.any(self.errors < self.tol))

    @property
    def minimal_k(self) -> Optional[int]:
        hits = np.flatnonzero(self.errors < self.tol)
        return int(hits[0]) + 1 if hits.size else None

    def error(self, j: int) -> float:
        return float(self.errors[j - 1])


def _affine_power_errors(A: np.ndarray, b: np.ndarray, k_max: int) -> np.ndarray:
    n = A.shape[0]
    P = np.eye(n)
    c = np.zeros(n)
    out = []
    for _ in range(k_max):
        P, c = A @ P, A @ c + b
        out.append(max(np.linalg.norm(P - np.eye(n), 2), np.linalg.norm(c)))
    return np.array(out)


def monodromy(sfh: SlowFastHamiltonian, m1, k_max: int = 8, tau: Optional[float] = None,
              hint: Optional[float] = None, m2_ref=None, tol: float = 1e-5,
              config: IntegratorConfig = IntegratorConfig(rtol=1e-12, atol=1e-12)) -> MonodromyRecord:
    """Monodromy ``g = G^tau`` of the skew-product flow over ``m1``.

    The slow period ``tau`` is detected from ``v_f`` unless given.  The fiber
    map is read off the fast block of the flow Jacobian, which is exact for
    fast dynamics that are affine in the fast coordinates; the affine model
    is validated at a second fast point (``linearity_error``).
    """
    pps = sfh.pps
    m1 = np.asarray(m1, dtype=float)
    if tau is None:
        if hint is None:
            raise ValueError("need the slow period or a hint for detecting it")
        tau = detect_period(sfh.v_f, m1, hint, config)
    m2 = np.zeros(pps.n2) if m2_ref is None else np.asarray(m2_ref, dtype=float)
    x, J = flow_with_jacobian(sfh.VV, np.concatenate([m1, m2]), tau, config)
    n1 = pps.n1
    A = J[n1:, n1:]
    b = x[n1:] - A @ m2
    probe = m2 + 0.5 * (1.0 + np.abs(m2))
    y = flow(sfh.VV, np.concatenate([m1, probe]), tau, config)
    lin = float(np.linalg.norm(y[n1:] - (A @ probe + b)))
    S2 = to_dense(pps.sigma2.evaluate(m2[None])[0][None], pps.n2, 2)[0]
    sym = float(np.max(np.abs(A.T @ S2 @ A - S2)))
    return MonodromyRecord(m1, float(tau), A, b, k_max, _affine_power_errors(A, b, k_max), tol,
                           lin, sym)


def periodicity_certificate(sfh: SlowFastHamiltonian, m1_list, k: int, tol: float = 1e-6,
                            **kw):
    """``g_{m1}^k = id`` at every listed slow point.  Returns ``(holds, records)``."""
    recs = [monodromy(sfh, m1, k_max=k, tol=tol, **kw) for m1 in m1_list]
    return all(r.error(k) < tol for r in recs), recs


def check_frequency_preservation(sfh: SlowFastHamiltonian, pf: PeriodicFlow, probes,
                                 tol: float = 1e-6) -> dict:
    """``L_<W> omega = 0`` plus the two identities used in its proof.

    ``L_V F = -L_W (f o pi1)`` and ``d omega ^ d(f o pi1) = 0``.
    """
    pts = as_points(probes, pf.chart.dim)
    avgW = averaged(pf, sfh.WW)
    main = float(np.max(np.abs(lie_derivative(avgW, pf.omega).evaluate(pts))))
    lvf = lie_derivative(sfh.VV, sfh.F).evaluate(pts)
    lwf = lie_derivative(sfh.WW, sfh.f).evaluate(pts)
    ident1 = float(np.max(np.abs(lvf + lwf)))
    ident2 = float(np.max(np.abs(wedge(pf.d_omega, exterior_derivative(sfh.f)).evaluate(pts))))
    return {"L_avgW_omega": main, "LvF_plus_LwF": ident1, "domega_wedge_df": ident2,
            "holds": main < tol and ident1 < tol and ident2 < tol}


# ---------------------------------------------------------------------------
# Hamiltonization of the unperturbed field
# ---------------------------------------------------------------------------


@dataclass
class HamiltonizationResult:
    theta: TensorField
    sigma_tilde: dict  # eps -> 2-form
    H_tilde: dict  # eps -> scalar
    residuals: dict  # eps -> max |i_V sigma~ + dH~|
    homological_residual: float  # max |L_V theta - d1 F|
    asp_residual: float
    first_integrals: dict  # name -> max |L_V(.)|
    poisson: dict  # eps -> max |{f o pi, F - i_vf theta}|


def _slow_differential(pps: ProductPhaseSpace, omega_expr) -> SympyField:
    d1, _ = partial_derivatives(pps, omega_expr)
    return d1


def hamiltonize(sfh: SlowFastHamiltonian, pf: PeriodicFlow, mu: Optional[SympyField], probes,
                epsilons: Sequence[float] = (1e-2, 1e-3), asp_tol: float = 1e-7,
                N: Optional[int] = None) -> HamiltonizationResult:
    """Symplectic form and Hamiltonian making the unperturbed field ``V`` Hamiltonian.

    ``theta = S(d1F)/omega - S2(L_{v_f} F) d1 omega/omega^3 + mu`` solves
    ``L_V theta = d1 F`` provided ``<d1 F> = (i_{v_f} mu) d1 omega / omega``;
    then ``sigma~ = sigma - eps d theta`` and ``H~ = f o pi + eps (F - i_{v_f} theta)``.
    """
    pps = sfh.pps
    pts = as_points(probes, pps.chart.dim)
    if not isinstance(pf.omega, SympyField):
        raise ValenceError("hamiltonize needs the frequency as a symbolic field")
    d1F, _ = partial_derivatives(pps, sfh.F_expr)
    d1w = _slow_differential(pps, pf.omega.exprs[0])
    inv = lambda k: pf.omega.apply(lambda w: w ** (-k), lambda w: -k * w ** (-k - 1), f"omega^-{k}")

    if mu is not None:
        if any(e != 0 for e in mu.exprs[pps.n1:]):
            raise ValenceError("mu must be horizontal (no fast components)")
        check_invariant(pf, mu, pts, what="mu")
    # solvability: <d1F> = (i_{v_f} mu) d1 omega / omega
    avg_d1F = averaged(pf, d1F, N).evaluate(pts)
    rhs = np.zeros_like(avg_d1F)
    if mu is not None:
        coef = interior_form(sfh.v_f_hat, mu).evaluate(pts) / pf.omega.evaluate(pts)
        rhs = coef * d1w.evaluate(pts)
    asp = float(np.max(np.abs(avg_d1F - rhs)))
    if asp > asp_tol:
        raise SolvabilityError(f"the averaged slow differential of F is not of the required form "
                               f"(residual {asp:.3g})")

    LvF = lie_derivative(sfh.v_f_hat, sfh.F)
    theta = wedge(inv(1), s_field(pf, d1F, N)) \
        - wedge(wedge(inv(3), s2_field(pf, LvF, N)), d1w)
    if mu is not None:
        theta = theta + mu
    theta.label = "theta"
    hom = homological_residual(pf, theta, d1F, pps.form1([0] * pps.chart.dim), pts)

    first = {"f": float(np.max(np.abs(lie_derivative(sfh.VV, sfh.f).evaluate(pts))))}
    G = sfh.F - interior_form(sfh.v_f_hat, theta)
    first["F - i_vf theta"] = float(np.max(np.abs(lie_derivative(sfh.VV, G).evaluate(pts))))

    dtheta = exterior_derivative(theta)
    sig_t, H_t, res, poisson = {}, {}, {}, {}
    for eps in epsilons:
        st = pps.sigma(eps) - eps * dtheta
        Ht = sfh.f + eps * G
        sig_t[eps], H_t[eps] = st, Ht
        r = interior_form(sfh.VV, st) + exterior_derivative(Ht)
        res[eps] = float(np.max(np.abs(r.evaluate(pts))))
        S = to_dense(st.evaluate(pts), pps.chart.dim, 2)
        if np.any(np.abs(np.linalg.det(S)) < 1e-14):
            raise DegenerateError(f"sigma~ is degenerate at a probe for eps={eps:g}")
        da = exterior_derivative(sfh.f).evaluate(pts)
        db = exterior_derivative(G).evaluate(pts)
        Va = np.linalg.solve(S, da[..., None])[..., 0]
        Vb = np.linalg.solve(S, db[..., None])[..., 0]
        poisson[eps] = float(np.max(np.abs(np.einsum("pi,pij,pj->p", Va, S, Vb))))
    return HamiltonizationResult(theta, sig_t, H_t, res, hom, asp, first, poisson)


# ---------------------------------------------------------------------------
# averaged symplectic structure
# ---------------------------------------------------------------------------


@dataclass
class InvariantSymplecticResult:
    pf: PeriodicFlow
    beta: TensorField
    sigma_avg_direct: TensorField
    sigma_avg_rep: TensorField
    generator_split_error: float
    iss_residual: float
    representation_difference: float
    adiabatic_residual: float
    adiabatic_ok: bool
    momentum: Optional[TensorField]
    momentum_residual: float


def invariant_symplectic(pps: ProductPhaseSpace, h, J, probes, eps: Optional[float] = None,
                         generator: Optional[TensorField] = None, N: Optional[int] = None,
                         adiabatic_tol: float = 1e-8, **flow_kw) -> InvariantSymplecticResult:
    """Average of ``sigma`` over the circle action generated by ``U = v_h^ + V_J^(2)``.

    ``<sigma>`` is computed twice: by direct tensor averaging and as
    ``sigma - eps d beta`` with ``beta = S(d1 J)``.  All 1- and 2-forms are
    compared on the tangent frame of ``M``.  When ``<d1 J> = 0`` the momentum
    map ``h o pi1 + eps (J - i_{v_h} beta)`` is returned and checked.
    """
    eps = pps.epsilon if eps is None else eps
    pts = as_points(probes, pps.chart.dim)
    h = sp.sympify(h)
    J = sp.sympify(J)
    vh = _split_exprs(pps, h)[0]
    vJ2 = _split_exprs(pps, J)[1]
    U_split = pps.vector([a + b for a, b in zip(vh, vJ2)], "U(split)")
    U = generator if generator is not None else U_split
    fr = pps.tangent_frame(pts)
    # tangent parts of the given generator and of the split must agree
    diff = U.evaluate(pts) - U_split.evaluate(pts)
    split_err = float(np.max(np.abs(np.einsum("pi,pir->pr", diff, fr))))

    pf = PeriodicFlow(U, pps.scalar(1, "omega=1"), label="U", **flow_kw)
    sigma = pps.sigma(eps)
    d1J, d2J = partial_derivatives(pps, J)
    d1h, _ = partial_derivatives(pps, h)
    iss = interior_form(U, sigma) + d1h + eps * d2J
    iss_res = float(np.max(np.abs(pps.restrict(iss, pts))))

    beta = s_field(pf, d1J, N)
    direct = averaged(pf, sigma, N)
    rep = sigma - eps * exterior_derivative(beta)
    rep_diff = float(np.max(np.abs(pps.restrict(direct, pts) - pps.restrict(rep, pts))))

    adb = float(np.max(np.abs(pps.restrict(averaged(pf, d1J, N), pts))))
    ok = adb < adiabatic_tol
    momentum, mom_res = None, float("nan")
    if ok:
        v_h = pps.vector(vh, "v_h")
        momentum = pps.scalar(h) + eps * (pps.scalar(J) - interior_form(v_h, beta))
        r = interior_form(U, direct) + exterior_derivative(momentum)
        mom_res = float(np.max(np.abs(pps.restrict(r, pts))))
    return InvariantSymplecticResult(pf, beta, direct, rep, split_err, iss_res, rep_diff, adb, ok,
                                     momentum, mom_res)


# ---------------------------------------------------------------------------
# the quartic resonance example
# ---------------------------------------------------------------------------


def quartic_constant_c() -> float:
    """``c = (sqrt 2/pi) int_0^1 dz/sqrt(1 - z^4)`` by endpoint-weighted quadrature.

    The integrand is written as ``(1 - z)^(-1/2) / sqrt((1 + z)(1 + z^2))`` and
    the algebraic endpoint singularity is handled by the QAWS rule.
    """
    val, err = quad(lambda z: 1.0 / math.sqrt((1.0 + z) * (1.0 + z * z)), 0.0, 1.0,
                    weight="alg", wvar=(0.0, -0.5), epsabs=1e-15, epsrel=1e-14)
    return math.sqrt(2.0) / math.pi * val


def resonance_lhs(delta: float) -> float:
    """``sqrt 2 cos((pi/4) sqrt(1 + 8 delta))``."""
    return math.sqrt(2.0) * math.cos(0.25 * math.pi * math.sqrt(1.0 + 8.0 * delta))


def is_resonant(delta: float, n: int, k: int, tol: float = 1e-12) -> bool:
    """Whether ``(delta, n/k)`` satisfies the resonance relation (``0 < n < k`` coprime)."""
    if not (0 < n < k) or math.gcd(n, k) != 1:
        return False
    return abs(resonance_lhs(delta) - math.cos(math.pi * n / k)) <= tol


def rational_resonance(delta: float, k_max: int = 64, tol: float = 1e-12):
    """The coprime ``(n, k)`` with ``k <= k_max`` solving the relation, or ``None``."""
    lhs = resonance_lhs(delta)
    for k in range(2, k_max + 1):
        for n in range(1, k):
            if math.gcd(n, k) == 1 and abs(lhs - math.cos(math.pi * n / k)) <= tol:
                return n, k
    return None


def delta_from_r(r) -> Fraction:
    r = Fraction(r)
    return r * (r + 1) / 2


def in_delta_set(r) -> bool:
    """``r`` rational with ``4s < r < 4s + 1`` for some integer ``s >= 0``."""
    r = Fraction(r)
    if r <= 0:
        return False
    s = math.floor(r / 4)
    return 4 * s < r < 4 * s + 1


def resonance_table(r_values, k_max: int = 64) -> list:
    """Rows ``(r, delta, in_Delta, lhs, n, k)`` for the given ``r`` (only those in the set)."""
    rows = []
    for r in r_values:
        r = Fraction(r)
        if not in_delta_set(r):
            continue
        d = delta_from_r(r)
        nk = rational_resonance(float(d), k_max)
        rows.append({"r": str(r), "delta": str(d), "delta_float": float(d),
                     "lhs": resonance_lhs(float(d)),
                     "n": None if nk is None else nk[0], "k": None if nk is None else nk[1]})
    return rows
