"""The acceptance suite: eleven numbered criteria shared by the CLI and the tests.

Each criterion returns a :class:`CriterionResult` with the measured values,
the thresholds they were compared against and a pass flag.  ``tol_scale``
multiplies every upper threshold; values far below 1 demonstrate the
expected failures.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .averaging import averaged, s2_field, s_field
from .errors import S1AvgError
from .flows import detect_period
from .homological import (decompose_closed_form, homological_residual, probe_points,
                          solve_function, solve_kform, solve_kvector, solve_vector)
from .normal_forms import PerturbedSystem, normalize_first_order
from .report import Report
from .scenarios import get_scenario, sphere_probes
from .slowfast import (check_frequency_preservation, hamiltonize, invariant_symplectic, is_resonant,
                       monodromy, quartic_constant_c, resonance_lhs)
from .tensor import Valence, from_sympy, lie_derivative

__all__ = ["CRITERIA", "CriterionResult", "run_criterion", "run_acceptance", "summary_lines"]


@dataclass
class CriterionResult:
    number: int
    title: str
    tag: str
    passed: bool
    values: dict
    runtime: float = 0.0
    error: Optional[str] = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.error})" if self.error else ""
        return f"criterion {self.number:2d} {status}: {self.title}{extra}"


class _Checker:
    """Collects ``value < threshold`` comparisons."""

    def __init__(self, scale: float):
        self.scale = scale
        self.values: dict = {}
        self.ok = True

    def below(self, name: str, value: float, bound: float) -> bool:
        bound = bound * self.scale
        good = bool(np.isfinite(value) and value < bound)
        self.values[name] = {"value": float(value), "bound": bound, "ok": good}
        self.ok &= good
        return good

    def above(self, name: str, value: float, bound: float) -> bool:
        good = bool(np.isfinite(value) and value > bound)
        self.values[name] = {"value": float(value), "lower": bound, "ok": good}
        self.ok &= good
        return good

    def within(self, name: str, value: float, lo: float, hi: float) -> bool:
        good = bool(lo <= value <= hi)
        self.values[name] = {"value": float(value), "range": [lo, hi], "ok": good}
        self.ok &= good
        return good

    def flag(self, name: str, good: bool, **info) -> bool:
        self.values[name] = {"ok": bool(good), **info}
        self.ok &= bool(good)
        return good


def _maxabs(field, pts) -> float:
    return float(np.max(np.abs(field.evaluate(pts))))


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

_C1_FIELDS = {
    "harmonic": ("q2", "qp3", "W_q4", "vq2", "qdp", "q2dqdp"),
    "quartic": ("q2", "qp3", "dq_vec", "euler", "qdp", "q2dqdp"),
}


def crit1(ck: _Checker, seed: int):
    """Operator identities on the harmonic and quartic flows."""
    t0 = time.perf_counter()
    for name, fields in _C1_FIELDS.items():
        sc = get_scenario(name)
        pf = sc.pf
        pts = sc.probes(50, seed)
        U = pf.upsilon
        for fname in fields:
            Xi = sc.field(fname)
            vals = Xi.evaluate(pts)
            avg = averaged(pf, Xi, 256)
            S = s_field(pf, Xi, 256)
            a = avg.evaluate(pts)
            # L_U S = id - A, with the Lie derivative taken in coordinates
            ck.below(f"{name}.{fname}.LS", float(np.max(np.abs(
                lie_derivative(U, S).evaluate(pts) - (vals - a)))), 1e-7)
            ck.below(f"{name}.{fname}.AS", _maxabs(averaged(pf, S, 256), pts), 1e-7)
            ck.below(f"{name}.{fname}.SA", _maxabs(s_field(pf, avg, 256), pts), 1e-7)
            ck.below(f"{name}.{fname}.AL", _maxabs(averaged(pf, lie_derivative(U, Xi), 256), pts),
                     1e-7)
            ck.below(f"{name}.{fname}.LA", _maxabs(lie_derivative(U, avg), pts), 1e-7)
            ck.below(f"{name}.{fname}.AA", float(np.max(np.abs(
                averaged(pf, avg, 256).evaluate(pts) - a))), 1e-7)
            ck.below(f"{name}.{fname}.S=LS2", float(np.max(np.abs(
                lie_derivative(U, s2_field(pf, Xi, 256)).evaluate(pts) - S.evaluate(pts)))), 1e-7)
    runtime = time.perf_counter() - t0
    ck.flag("runtime_under_60s", runtime < 60.0)


def crit2(ck: _Checker, seed: int):
    """Residuals and remainder invariance of the default solver suite."""
    h = get_scenario("harmonic")
    q = get_scenario("quartic")
    ph, pq = h.probes(20, seed), q.probes(20, seed)
    bivector = _bivector(h)
    suite = [
        ("harmonic.function.q2", lambda: solve_function(h.pf, h.field("q2"), probes=ph)),
        ("harmonic.function.qp3", lambda: solve_function(h.pf, h.field("qp3"), probes=ph)),
        ("harmonic.vector.W_q4", lambda: solve_vector(h.pf, h.field("W_q4"), probes=ph)),
        ("harmonic.2vector", lambda: solve_kvector(h.pf, bivector, probes=ph)),
        ("harmonic.1form.qdp", lambda: solve_kform(h.pf, h.field("qdp"), probes=ph)),
        ("harmonic.2form", lambda: solve_kform(h.pf, h.field("q2dqdp"), probes=ph)),
        ("quartic.function.q2", lambda: solve_function(q.pf, q.field("q2"), probes=pq)),
        ("quartic.vector.dq", lambda: solve_vector(q.pf, q.field("dq_vec"), probes=pq)),
        ("quartic.vector.euler.gauged", lambda: solve_vector(
            q.pf, q.field("euler"), q.field("homog"), probes=pq, repair_gauge=True)),
        ("quartic.vector.W_q6", lambda: solve_vector(q.pf, q.field("W_q6"), probes=pq)),
        ("quartic.1vector.kvector", lambda: solve_kvector(q.pf, q.field("euler"), probes=pq)),
        ("quartic.1form.qdp", lambda: solve_kform(q.pf, q.field("qdp"), probes=pq)),
        ("quartic.1form.gauged", lambda: solve_kform(
            q.pf, q.field("qdp"), _invariant_form(q), probes=pq)),
        ("quartic.2form", lambda: solve_kform(q.pf, q.field("q2dqdp"), probes=pq)),
    ]
    for name, run in suite:
        b = run()
        ck.below(f"{name}.residual", b.residual, 1e-6)
        ck.below(f"{name}.invariance", b.invariance, 1e-8)
    b = solve_function(h.pf, h.field("q2"))
    one_one = np.array([[1.0, 1.0]])
    ck.below("harmonic.Gbar(1,1)-1", abs(float(b.remainder.evaluate(one_one)[0, 0]) - 1.0), 1e-9)
    ck.below("harmonic.F(1,1)+0.5", abs(float(b.solution.evaluate(one_one)[0, 0]) + 0.5), 1e-9)


def _bivector(sc):
    q, p = sc.chart.symbols()
    return from_sympy(sc.chart, Valence.vector(2), [1 + q * p ** 2], "(1+qp^2) d/dq ^ d/dp")


def _invariant_form(sc):
    """``d H0`` is invariant under the flow."""
    q, p = sc.chart.symbols()
    return from_sympy(sc.chart, Valence.form(1), [q ** 3, p], "dH0")


def crit3(ck: _Checker, seed: int):
    """Dropping the S^2 term breaks the vector solution when L_W omega != 0."""
    q = get_scenario("quartic")
    pts = q.probes(20, seed)
    W = q.field("dq_vec")
    lw = _maxabs(lie_derivative(W, q.pf.omega), pts)
    ck.above("L_W_omega", lw, 1e-3)
    b = solve_vector(q.pf, W, probes=pts)
    ck.below("full.residual", b.residual, 1e-6)
    truncated = homological_residual(q.pf, b.terms["S"], W, b.remainder, pts)
    ck.above("truncated.residual", truncated, 1e-3)


def crit4(ck: _Checker, seed: int):
    """Slopes of the normal-form residual and of the negative control."""
    t0 = time.perf_counter()
    h = get_scenario("harmonic")
    pts = h.probes(10, seed, box=((-1.0, -1.0), (1.0, 1.0)))
    r = normalize_first_order(PerturbedSystem(h.pf, h.field("W_q4"), nodes=64), pts,
                              control_offset=[1.0, 0.0])
    ck.values["harmonic.residuals"] = r.residuals.tolist()
    ck.within("harmonic.slope", r.fitted_order, 1.8, 2.2)
    ck.within("harmonic.control_slope", r.control_order, 0.8, 1.2)

    q = get_scenario("quartic", delta="3/8")
    pf4 = q.extras["pf4"]
    pts = probe_points(pf4.chart, 8, ((-1.0, -1.0, -0.8, -0.8), (1.0, 1.0, 0.8, 0.8)), seed, pf4,
                       q.extras["accept4"])
    r = normalize_first_order(PerturbedSystem(pf4, q.sfh.WW, nodes=64), pts,
                              control_offset=[1.0, 0.0, 0.0, 0.0])
    ck.values["quartic.residuals"] = r.residuals.tolist()
    ck.within("quartic.slope", r.fitted_order, 1.8, 2.2)
    ck.within("quartic.control_slope", r.control_order, 0.8, 1.2)
    ck.flag("runtime_under_120s", time.perf_counter() - t0 < 120.0)


def crit5(ck: _Checker, seed: int):
    """The constant c by quadrature and by the detected period."""
    c = quartic_constant_c()
    c_gamma = math.sqrt(2.0) / math.pi * math.gamma(0.25) ** 2 / (4.0 * math.sqrt(2.0 * math.pi))
    ck.values["c"] = c
    ck.below("c_vs_gamma_closed_form", abs(c - c_gamma), 1e-10)
    q = get_scenario("quartic")
    T = detect_period(q.pf.X, [1.0, 0.0], 4.0)
    omega = float(q.pf.omega.evaluate(np.array([[1.0, 0.0]]))[0, 0])
    ck.values["detected_period"] = T
    ck.below("period_vs_2pi_over_omega", abs(T - 2 * math.pi / omega), 1e-6)
    # the frequency written without the factor 1/2 predicts half this period
    ck.below("period_over_2pi_c_minus_2", abs(T / (2 * math.pi * c) - 2.0), 1e-6)


def crit6(ck: _Checker, seed: int):
    """Monodromy at the resonant and a non-resonant delta."""
    res = get_scenario("quartic", delta="3/8")
    rec = monodromy(res.sfh, [1.0, 0.0], k_max=8, tau=res.extras["slow_period_at_1"])
    ck.below("delta=3/8.|g^2-I|", rec.error(2), 1e-5)
    ck.below("delta=3/8.symplectic", rec.symplectic_error, 1e-7)
    non = get_scenario("quartic", delta="1")
    rec1 = monodromy(non.sfh, [1.0, 0.0], k_max=8, hint=7.0)
    ck.above("delta=1.min_j<=8|g^j-I|", float(rec1.errors.min()), 1e-2)
    ck.values["resonance_lhs(3/8)"] = resonance_lhs(0.375)
    ck.flag("resonance(3/8,1/2)", is_resonant(0.375, 1, 2, tol=1e-15),
            residual=abs(resonance_lhs(0.375) - math.cos(math.pi / 2)))


def crit7(ck: _Checker, seed: int):
    q = get_scenario("quartic", delta="3/8")
    pf4 = q.extras["pf4"]
    pts = probe_points(pf4.chart, 20, q.extras["box4"], seed, pf4, q.extras["accept4"])
    out = check_frequency_preservation(q.sfh, pf4, pts)
    ck.below("L_<W>omega", out["L_avgW_omega"], 1e-6)
    ck.below("L_V F + L_W f", out["LvF_plus_LwF"], 1e-6)
    ck.below("d omega ^ d f", out["domega_wedge_df"], 1e-6)


def crit8(ck: _Checker, seed: int):
    cyl = get_scenario("cylinder")
    h = get_scenario("harmonic").extras["slow_fast"]
    cases = [
        ("cylinder", cyl.sfh, cyl.pf, cyl.extras["mu"], cyl.probes(20, seed)),
        ("harmonic-slow", h["sfh"], h["pf"], None,
         probe_points(h["pf"].chart, 20, h["box"], seed, h["pf"], h["accept"])),
    ]
    for name, sfh, pf, mu, pts in cases:
        r = hamiltonize(sfh, pf, mu, pts, epsilons=(1e-2, 1e-3))
        for eps, v in r.residuals.items():
            ck.below(f"{name}.eps={eps:g}.residual", v, 1e-5)
        for k, v in r.first_integrals.items():
            ck.below(f"{name}.L_V({k})", v, 1e-6)
        ck.values[f"{name}.theta_residual"] = r.homological_residual
        ck.values[f"{name}.poisson"] = r.poisson


def crit9(ck: _Checker, seed: int):
    sc = get_scenario("sphere")
    e = sc.extras
    pps = e["pps"]
    pts = sphere_probes(sc, 20, seed)
    r = invariant_symplectic(pps, e["h"], e["J"], pts, generator=e["generator"])
    ck.below("<sigma>.direct_vs_representation", r.representation_difference, 1e-6)
    ck.below("beta_vs_closed_form", float(np.max(np.abs(
        pps.restrict(r.beta, pts) - pps.restrict(e["beta_exact"], pts)))), 1e-6)
    ck.below("<d1 J>", r.adiabatic_residual, 1e-8)
    ck.below("momentum_identity", r.momentum_residual, 1e-5)
    # the average genuinely differs from sigma
    ck.values["|sigma-<sigma>|"] = float(np.max(np.abs(
        pps.restrict(pps.sigma(), pts) - pps.restrict(r.sigma_avg_direct, pts))))


def crit10(ck: _Checker, seed: int):
    h = get_scenario("harmonic")
    pts = h.probes(20, seed)
    for name in ("d_q2", "d_q2p", "angle"):
        dec = decompose_closed_form(h.pf, h.field(name), pts)
        ck.below(f"{name}.reconstruction", dec.residual, 1e-5)


CRITERIA = {
    1: ("operator identities", "avg.LS", crit1),
    2: ("homological residuals", "hom.vector", crit2),
    3: ("necessity of the S^2 term", "hom.gauge-term", crit3),
    4: ("normal-form order", "nf.order", crit4),
    5: ("quartic constants", "sf.constants", crit5),
    6: ("resonance and monodromy", "sf.monodromy", crit6),
    7: ("averaged perturbation preserves omega", "sf.averaged-perturbation", crit7),
    8: ("Hamiltonization", "sf.hamiltonization", crit8),
    9: ("invariant symplectic form", "sf.averaged-symplectic", crit9),
    10: ("closed-form decomposition", "hom.closed", crit10),
    11: ("determinism", "harness", None),
}


def run_criterion(number: int, seed: int = 0, tol_scale: float = 1.0) -> CriterionResult:
    title, tag, fn = CRITERIA[number]
    ck = _Checker(tol_scale)
    t0 = time.perf_counter()
    error = None
    try:
        fn(ck, seed)
    except S1AvgError as exc:  # numerical failures are recorded, not raised
        error = f"{type(exc).__name__}: {exc}"
        ck.ok = False
    return CriterionResult(number, title, tag, bool(ck.ok), ck.values,
                           time.perf_counter() - t0, error)


def run_acceptance(seed: int = 0, tol_scale: float = 1.0, only=None,
                   progress: Optional[Callable[[CriterionResult], None]] = None) -> list:
    """Run the criteria (all by default).

    The determinism criterion repeats every other selected criterion in a
    fresh state and compares the result records.
    """
    numbers = sorted(only) if only else sorted(CRITERIA)
    results = []
    for n in numbers:
        if n == 11:
            continue
        res = run_criterion(n, seed, tol_scale)
        results.append(res)
        if progress:
            progress(res)
    if 11 in numbers:
        t0 = time.perf_counter()
        base = [n for n in numbers if n != 11] or [2, 5, 6, 10]
        first = {r.number: r for r in results}
        mismatched = []
        for n in base:
            a = first.get(n) or run_criterion(n, seed, tol_scale)
            b = run_criterion(n, seed, tol_scale)
            if _comparable(a) != _comparable(b):
                mismatched.append(n)
        res = CriterionResult(11, CRITERIA[11][0], CRITERIA[11][1], not mismatched,
                              {"compared": base, "mismatched": mismatched},
                              time.perf_counter() - t0)
        results.append(res)
        if progress:
            progress(res)
    return results


def _comparable(res: CriterionResult):
    vals = {k: v for k, v in res.values.items() if not k.startswith("runtime")}
    return res.passed or res.error, repr(vals), res.error


def to_report(results, config: dict) -> Report:
    rep = Report("accept", config)
    for r in results:
        values = dict(r.values)
        if r.error:
            values["error"] = r.error
        rep.add(f"criterion {r.number}: {r.title}", r.tag, values, r.passed)
    rep.timings = {f"criterion {r.number}": r.runtime for r in results}
    return rep


def summary_lines(results) -> list:
    return [r.line() for r in results]
