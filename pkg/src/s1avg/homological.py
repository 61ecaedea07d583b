"""Global solutions of homological equations ``L_X(unknown) = rhs - remainder``.

For a periodic flow with frequency ``omega`` and ``Upsilon = X/omega`` the
solutions are assembled from the averaging operators:

functions     F = S(G)/omega + K,                         Gbar = <G>
k-vectors     A = S(B)/omega + X ^ S2(i_{d omega} B)/omega^3 + C,
              Bbar = <B> + X ^ i_{d omega} C / omega
k-forms       theta = S(eta)/omega - d omega ^ S2(i_X eta)/omega^3 + mu,
              etabar = <eta> - d omega ^ i_X mu / omega

where ``K``, ``C`` and ``mu`` are invariant gauge fields.  Every solver
returns a :class:`SolutionBundle` whose residual is measured with the
coordinate Lie derivative, a route independent of the spectral operators.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .averaging import averaged, s2_field, s_field
from .errors import DomainError, NotInvariantError, ValenceError
from .flows import PeriodicFlow
from .tensor import (TensorField, Valence, as_points, exterior_derivative, interior_form,
                     interior_multivector, lie_derivative, pullback_by_evaluation, wedge)

__all__ = [
    "SolutionBundle",
    "ConditionReport",
    "probe_points",
    "invariance_defect",
    "check_invariant",
    "homological_residual",
    "solve_function",
    "solve_kvector",
    "solve_vector",
    "solve_kform",
    "necessary_conditions_kvector",
    "necessary_conditions_kform",
    "commuting_remainder_condition",
    "kernel_membership",
    "decompose_closed_form",
]


# ---------------------------------------------------------------------------
# probes and diagnostics
# ---------------------------------------------------------------------------


def probe_points(chart, n: int = 20, box=None, seed: int = 0, pf: Optional[PeriodicFlow] = None,
                 accept=None) -> np.ndarray:
    """``n`` scrambled-Sobol points in ``box = (lower, upper)`` inside the chart.

    Points outside the chart, below the flow's regularity floor or rejected
    by the optional ``accept`` predicate are skipped.
    """
    if box is None:
        box = (chart.lower, chart.upper)
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    if lo.shape != (chart.dim,) or hi.shape != (chart.dim,) or not np.all(np.isfinite(lo + hi)):
        raise DomainError("probe box must be finite and match the chart dimension")
    sampler = qmc.Sobol(d=chart.dim, scramble=True, seed=seed)
    found = []
    total = 0
    size = 2 ** max(5, int(np.ceil(np.log2(2 * n))))
    for _ in range(8):
        # keep the running total a power of two so the Sobol points stay balanced
        draw = qmc.scale(sampler.random(max(size, sampler.num_generated)), lo, hi)
        ok = chart.contains(draw)
        if pf is not None:
            ok[ok] &= pf.speed_ok(draw[ok])
        if accept is not None:
            ok[ok] &= np.asarray(accept(draw[ok]), dtype=bool)
        found.append(draw[ok])
        total += int(ok.sum())
        if total >= n:
            break
    pts = np.concatenate(found)[:n]
    if len(pts) < n:
        raise DomainError(f"only {len(pts)} of {n} probe points fall inside the chart")
    return pts


def invariance_defect(pf: PeriodicFlow, T: TensorField, probes, n_check: int = 16) -> float:
    """``max |(Fl_U^t)^* T - T|`` over ``n_check`` orbit nodes, by direct evaluation."""
    probes = as_points(probes, pf.chart.dim)
    orbit = pf.sample(probes, n_check)
    sig = pullback_by_evaluation(orbit, T)
    return float(np.max(np.abs(sig - T.evaluate(probes)[:, None, :])))


def check_invariant(pf: PeriodicFlow, T: TensorField, probes, tol: float = 1e-7,
                    repair: bool = False, what: str = "gauge") -> TensorField:
    """Return ``T`` if ``L_U T`` vanishes at the probes (relative ``tol``).

    With ``repair=True`` a non-invariant field is replaced by its average.
    """
    probes = as_points(probes, pf.chart.dim)
    lu = lie_derivative(pf.upsilon, T).evaluate(probes)
    scale = 1.0 + np.max(np.abs(T.evaluate(probes)))
    defect = float(np.max(np.abs(lu)))
    if defect <= tol * scale:
        return T
    if repair:
        return averaged(pf, T)
    raise NotInvariantError(f"{what} {T.label} is not invariant (|L_U| = {defect:.3g})")


def homological_residual(pf: PeriodicFlow, solution: TensorField, rhs: TensorField,
                         remainder: TensorField, probes) -> float:
    """``max |L_X(solution) - (rhs - remainder)|`` with the coordinate Lie derivative."""
    probes = as_points(probes, pf.chart.dim)
    lx = lie_derivative(pf.X, solution).evaluate(probes)
    return float(np.max(np.abs(lx - rhs.evaluate(probes) + remainder.evaluate(probes))))


@dataclass
class SolutionBundle:
    """A solution/remainder pair of a homological equation with diagnostics."""

    kind: str
    rhs: TensorField
    solution: TensorField
    remainder: TensorField
    gauge: Optional[TensorField]
    terms: dict = field(default_factory=dict)
    residual: float = float("nan")
    invariance: float = float("nan")
    probes: Optional[np.ndarray] = None

    def check(self, pf: PeriodicFlow, probes, n_check: int = 16) -> "SolutionBundle":
        self.probes = as_points(probes, pf.chart.dim)
        self.residual = homological_residual(pf, self.solution, self.rhs, self.remainder, self.probes)
        self.invariance = invariance_defect(pf, self.remainder, self.probes, n_check)
        return self

    def passed(self, residual_tol: float = 1e-6, invariance_tol: float = 1e-8) -> bool:
        return self.residual < residual_tol and self.invariance < invariance_tol


def _inv_power(pf: PeriodicFlow, k: int) -> TensorField:
    return pf.omega.apply(lambda w: w ** (-k), lambda w: -k * w ** (-k - 1), f"omega^-{k}")


def _sum(fields):
    fields = [f for f in fields if f is not None]
    out = fields[0]
    for f in fields[1:]:
        out = out + f
    return out


def _prepare_gauge(pf, gauge, valence, probes, repair):
    if gauge is None:
        return None
    if gauge.valence != valence:
        raise ValenceError(f"gauge must be a {valence}, got {gauge.valence}")
    if probes is not None:
        gauge = check_invariant(pf, gauge, probes, repair=repair)
    return gauge


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


def solve_function(pf: PeriodicFlow, G: TensorField, K: Optional[TensorField] = None,
                   probes=None, repair_gauge: bool = False, N: Optional[int] = None) -> SolutionBundle:
    """``L_X F = G - Gbar`` with ``Gbar = <G>`` and ``F = S(G)/omega + K``."""
    if G.valence.kind != "scalar":
        raise ValenceError("solve_function needs a scalar field")
    K = _prepare_gauge(pf, K, G.valence, probes, repair_gauge)
    main = wedge(_inv_power(pf, 1), s_field(pf, G, N))
    bundle = SolutionBundle("function", G, _sum([main, K]), averaged(pf, G, N), K,
                            terms={"S": main})
    return bundle.check(pf, probes) if probes is not None else bundle


def solve_kvector(pf: PeriodicFlow, B: TensorField, C: Optional[TensorField] = None,
                  probes=None, repair_gauge: bool = False, N: Optional[int] = None) -> SolutionBundle:
    """``L_X A = B - Bbar`` for a k-vector field ``B`` (``k = 0`` allowed)."""
    if B.valence.kind == "form":
        raise ValenceError("solve_kvector needs a k-vector field")
    if B.valence.kind == "scalar":
        return solve_function(pf, B, C, probes, repair_gauge, N)
    C = _prepare_gauge(pf, C, B.valence, probes, repair_gauge)
    inv1 = _inv_power(pf, 1)
    main = wedge(inv1, s_field(pf, B, N))
    corr = wedge(_inv_power(pf, 3), wedge(pf.X, s2_field(pf, interior_multivector(pf.d_omega, B), N)))
    rem = averaged(pf, B, N)
    if C is not None:
        rem = rem + wedge(inv1, wedge(pf.X, interior_multivector(pf.d_omega, C)))
    bundle = SolutionBundle(f"{B.degree}-vector", B, _sum([main, corr, C]), rem, C,
                            terms={"S": main, "S2": corr})
    return bundle.check(pf, probes) if probes is not None else bundle


def solve_vector(pf: PeriodicFlow, W: TensorField, Y: Optional[TensorField] = None,
                 probes=None, repair_gauge: bool = False, N: Optional[int] = None) -> SolutionBundle:
    """``[X, Z] = W - Wbar`` with ``Wbar = <W> + L_Y(omega) X/omega`` and
    ``Z = S(W)/omega + S2(L_W omega) X/omega^3 + Y``."""
    if W.valence != Valence.vector(1):
        raise ValenceError("solve_vector needs a vector field")
    Y = _prepare_gauge(pf, Y, W.valence, probes, repair_gauge)
    inv1 = _inv_power(pf, 1)
    main = wedge(inv1, s_field(pf, W, N))
    lw_omega = lie_derivative(W, pf.omega)
    corr = wedge(wedge(_inv_power(pf, 3), s2_field(pf, lw_omega, N)), pf.X)
    rem = averaged(pf, W, N)
    if Y is not None:
        rem = rem + wedge(wedge(inv1, lie_derivative(Y, pf.omega)), pf.X)
    bundle = SolutionBundle("vector", W, _sum([main, corr, Y]), rem, Y,
                            terms={"S": main, "S2": corr})
    return bundle.check(pf, probes) if probes is not None else bundle


def solve_kform(pf: PeriodicFlow, eta: TensorField, mu: Optional[TensorField] = None,
                probes=None, repair_gauge: bool = False, N: Optional[int] = None) -> SolutionBundle:
    """``L_X theta = eta - etabar`` for a k-form ``eta`` (``k = 0`` allowed)."""
    if eta.valence.kind == "vector":
        raise ValenceError("solve_kform needs a k-form")
    if eta.valence.kind == "scalar":
        return solve_function(pf, eta, mu, probes, repair_gauge, N)
    mu = _prepare_gauge(pf, mu, eta.valence, probes, repair_gauge)
    inv1 = _inv_power(pf, 1)
    main = wedge(inv1, s_field(pf, eta, N))
    # for k = 1 the contraction is the scalar i_X eta and the wedge is a product
    corr = -wedge(_inv_power(pf, 3), wedge(pf.d_omega, s2_field(pf, interior_form(pf.X, eta), N)))
    rem = averaged(pf, eta, N)
    if mu is not None:
        rem = rem - wedge(inv1, wedge(pf.d_omega, interior_form(pf.X, mu)))
    bundle = SolutionBundle(f"{eta.degree}-form", eta, _sum([main, corr, mu]), rem, mu,
                            terms={"S": main, "S2": corr})
    return bundle.check(pf, probes) if probes is not None else bundle


# ---------------------------------------------------------------------------
# solvability and kernel diagnostics
# ---------------------------------------------------------------------------


@dataclass
class ConditionReport:
    """Values of named pointwise conditions at probe points."""

    names: tuple
    values: dict  # name -> (P,) array of max-abs violations
    probes: np.ndarray
    tol: float

    def violations(self, name: str) -> np.ndarray:
        return self.probes[self.values[name] > self.tol]

    def holds(self, name: str) -> bool:
        return bool(np.all(self.values[name] <= self.tol))

    @property
    def all_hold(self) -> bool:
        return all(self.holds(n) for n in self.names)

    def flagged(self) -> list:
        return [n for n in self.names if not self.holds(n)]

    def summary(self) -> dict:
        return {n: {"max": float(np.max(self.values[n])), "holds": self.holds(n),
                    "violations": int(np.sum(self.values[n] > self.tol))} for n in self.names}


def _maxabs(field: TensorField, pts) -> np.ndarray:
    return np.max(np.abs(field.evaluate(pts)), axis=1)


def _fixed_point_condition(pf, avg, pts):
    # at zeros of X the average itself must vanish; vacuous at regular points
    fixed = ~pf.speed_ok(pts)
    out = np.zeros(len(pts))
    if np.any(fixed):
        out[fixed] = _maxabs(avg, pts[fixed])
    return out


def necessary_conditions_kvector(pf: PeriodicFlow, B: TensorField, probes,
                                 tol: float = 1e-7) -> ConditionReport:
    """Conditions on the averaged right-hand side.

    ``fixed_point``: ``X(m)=0 => <B>(m)=0``; ``X_wedge_avg``: ``X ^ <B> = 0``;
    ``d_omega_interior_avg``: ``i_{d omega}<B> = 0``.
    """
    pts = as_points(probes, pf.chart.dim)
    avg = averaged(pf, B)
    regular = pts[pf.speed_ok(pts)]
    vals = {"fixed_point": _fixed_point_condition(pf, avg, pts)}
    vals["X_wedge_avg"] = _pad(pf, pts, _maxabs(wedge(pf.X, avg), regular)
                               if B.degree < pf.chart.dim else np.zeros(len(regular)))
    vals["d_omega_interior_avg"] = _pad(pf, pts, _maxabs(interior_multivector(pf.d_omega, avg), regular))
    return ConditionReport(("fixed_point", "X_wedge_avg", "d_omega_interior_avg"), vals, pts, tol)


def necessary_conditions_kform(pf: PeriodicFlow, eta: TensorField, probes,
                               tol: float = 1e-7) -> ConditionReport:
    """Conditions on the averaged k-form.

    ``form_fixed_point``: ``X(m)=0 => <eta>(m)=0``; ``d_omega_wedge_avg``:
    ``d omega ^ <eta> = 0``; ``X_interior_avg``: ``i_X <eta> = 0``.
    """
    pts = as_points(probes, pf.chart.dim)
    avg = averaged(pf, eta)
    regular = pts[pf.speed_ok(pts)]
    vals = {"form_fixed_point": _fixed_point_condition(pf, avg, pts)}
    vals["d_omega_wedge_avg"] = _pad(pf, pts, _maxabs(wedge(pf.d_omega, avg), regular)
                                     if eta.degree < pf.chart.dim else np.zeros(len(regular)))
    if eta.valence.kind == "scalar":
        vals["X_interior_avg"] = np.zeros(len(pts))
    else:
        vals["X_interior_avg"] = _pad(pf, pts, _maxabs(interior_form(pf.X, avg), regular))
    return ConditionReport(("form_fixed_point", "d_omega_wedge_avg", "X_interior_avg"), vals, pts,
                           tol)


def _pad(pf, pts, regular_vals):
    out = np.zeros(len(pts))
    out[pf.speed_ok(pts)] = regular_vals
    return out


def _remainder_obstruction(pf: PeriodicFlow, T: TensorField) -> TensorField:
    if T.valence.kind == "form":
        return wedge(pf.d_omega, interior_form(pf.X, T))
    if T.valence.kind == "vector":
        return wedge(pf.X, interior_multivector(pf.d_omega, T))
    raise ValenceError("needs a k-vector field or a k-form")


def commuting_remainder_condition(pf: PeriodicFlow, T: TensorField, probes, tol: float = 1e-7):
    """Obstruction to a remainder commuting with ``X``.

    k-vectors: ``X ^ i_{d omega} <B> = 0``; k-forms: ``d omega ^ i_X <eta> = 0``.
    Returns ``(holds, witness_point_or_None, max_value)``.
    """
    pts = as_points(probes, pf.chart.dim)
    vals = _maxabs(_remainder_obstruction(pf, averaged(pf, T)), pts)
    worst = int(np.argmax(vals))
    holds = bool(vals[worst] <= tol)
    return holds, (None if holds else pts[worst]), float(vals[worst])


def kernel_membership(pf: PeriodicFlow, T: TensorField, probes, tol: float = 1e-7):
    """Whether ``T`` lies in the kernel of ``L_X``: invariant and obstruction-free.

    Returns ``(member, details)`` where ``details`` holds the invariance
    defect, the obstruction value and the direct ``|L_X T|`` witness value.
    """
    pts = as_points(probes, pf.chart.dim)
    inv = float(np.max(np.abs(lie_derivative(pf.upsilon, T).evaluate(pts))))
    if T.valence.kind == "scalar":
        obstruction = 0.0
    else:
        obstruction = float(np.max(_maxabs(_remainder_obstruction(pf, T), pts)))
    lx = _maxabs(lie_derivative(pf.X, T), pts)
    details = {"invariance": inv, "obstruction": obstruction, "lie_X": float(np.max(lx)),
               "witness": pts[int(np.argmax(lx))]}
    return bool(inv <= tol and obstruction <= tol), details


@dataclass
class ClosedFormDecomposition:
    average: TensorField
    primitive: TensorField
    residual: float


def decompose_closed_form(pf: PeriodicFlow, eta: TensorField, probes,
                          closed_tol: float = 1e-6) -> ClosedFormDecomposition:
    """Split a closed k-form as ``eta = <eta> + d(i_U S(eta))``."""
    if eta.valence.kind != "form":
        raise ValenceError("decompose_closed_form needs a k-form with k >= 1")
    pts = as_points(probes, pf.chart.dim)
    if eta.degree < pf.chart.dim:
        d_eta = float(np.max(np.abs(exterior_derivative(eta).evaluate(pts))))
        if d_eta > closed_tol:
            raise ValenceError(f"form is not closed (|d eta| = {d_eta:.3g})")
    avg = averaged(pf, eta)
    primitive = interior_form(pf.upsilon, s_field(pf, eta))
    recon = avg + exterior_derivative(primitive)
    res = float(np.max(np.abs(eta.evaluate(pts) - recon.evaluate(pts))))
    return ClosedFormDecomposition(avg, primitive, res)
