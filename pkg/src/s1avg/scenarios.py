"""Registry of the worked scenarios.

``get_scenario(name, **params)`` builds one of

* ``"harmonic"``: the planar oscillator ``p d/dq - q d/dp`` (constant frequency),
  plus a slow-fast product with a harmonic slow factor and ``F = q1 x1``;
* ``"quartic"``: the slice ``q'' = -q^3`` and the 4-dimensional slow-fast
  system with the normal variational equation ``q2'' = -delta q1^2 q2``;
* ``"cylinder"``: slow factor ``R x S^1`` with ``f = s^2/2`` and an ``s``-dependent
  fast oscillator;
* ``"sphere"``: fast factor ``S^2`` in ambient coordinates with ``J = phi(m1) . x``;
* ``"adiabatic-negative"``: ``f = 0`` so the slow flow is frozen.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
import sympy as sp

from .errors import ConfigError
from .flows import PeriodicFlow
from .homological import probe_points
from .slowfast import (ProductPhaseSpace, SlowFastHamiltonian, delta_from_r, quartic_constant_c,
                       rational_resonance)
from .tensor import CoordChart, TensorField, Valence, from_sympy

__all__ = ["Scenario", "SCENARIOS", "get_scenario", "canonical_form"]


@dataclass
class Scenario:
    """A flow, named test fields and a probe region."""

    name: str
    params: dict
    pf: PeriodicFlow
    fields: dict
    box: tuple
    accept: Optional[Callable] = None
    sfh: Optional[SlowFastHamiltonian] = None
    extras: dict = field(default_factory=dict)

    @property
    def chart(self) -> CoordChart:
        return self.pf.chart

    def probes(self, n: int = 20, seed: int = 0, box=None) -> np.ndarray:
        return probe_points(self.chart, n, box or self.box, seed, self.pf, self.accept)

    def field(self, name: str) -> TensorField:
        try:
            return self.fields[name]
        except KeyError:
            raise ConfigError(f"scenario {self.name!r} has no field {name!r}; "
                              f"known: {', '.join(sorted(self.fields))}") from None


def canonical_form(chart: CoordChart, pairs) -> TensorField:
    """``sum dp ^ dq`` over ``(q_index, p_index)`` pairs, as a 2-form field."""
    comps = {}
    for qi, pi in pairs:
        comps[(pi, qi)] = 1
    return from_sympy(chart, Valence.form(2), comps, "dp^dq")


def _planar(names=("q", "p"), box=4.0, hole=1e-3):
    return CoordChart(names, (-box, -box), (box, box),
                      lambda x: np.hypot(x[..., 0], x[..., 1]) < hole)


def _annulus(r_min: float):
    return lambda x: np.hypot(x[:, 0], x[:, 1]) > r_min


# ---------------------------------------------------------------------------


def harmonic(**_) -> Scenario:
    chart = _planar()
    q, p = chart.symbols()
    vec = lambda c, lab: from_sympy(chart, Valence.vector(1), c, lab)
    form1 = lambda c, lab: from_sympy(chart, Valence.form(1), c, lab)
    X = vec([p, -q], "X")
    omega = from_sympy(chart, Valence.scalar(), sp.Integer(1), "omega")
    pf = PeriodicFlow(X, omega, label="harmonic")
    r2 = q ** 2 + p ** 2
    fields = {
        "q": from_sympy(chart, Valence.scalar(), q, "q"),
        "q2": from_sympy(chart, Valence.scalar(), q ** 2, "q^2"),
        "qp3": from_sympy(chart, Valence.scalar(), q * p ** 3 + q, "q p^3 + q"),
        "H0": from_sympy(chart, Valence.scalar(), r2 / 2, "H0"),
        "W_q4": vec([0, -4 * q ** 3], "V[q^4]"),
        "euler": vec([q, p], "E"),
        "vq2": vec([q ** 2, q * p], "q^2 dq + qp dp"),
        "qdp": form1([0, q], "q dp"),
        "q2dqdp": from_sympy(chart, Valence.form(2), [1 + q ** 2], "(1+q^2) dq^dp"),
        "d_q2": form1([2 * q, 0], "d(q^2)"),
        "d_q2p": form1([2 * q * p, q ** 2], "d(q^2 p)"),
        "angle": form1([-p / r2, q / r2], "(q dp - p dq)/r^2"),
    }
    sc = Scenario("harmonic", {}, pf, fields, ((-1.5, -1.5), (1.5, 1.5)), _annulus(0.3))

    # slow-fast product with a harmonic slow factor and F = q1 x1
    c1 = _planar(("q1", "p1"))
    c2 = CoordChart(("x1", "y1"), (-6, -6), (6, 6))
    pps = ProductPhaseSpace(c1, canonical_form(c1, [(0, 1)]), c2, canonical_form(c2, [(0, 1)]))
    q1, p1, x1, y1 = pps.symbols
    sfh = SlowFastHamiltonian(pps, (q1 ** 2 + p1 ** 2) / 2, q1 * x1, "harmonic slow factor")
    sfh_pf = sfh.periodic_flow(sp.Integer(1))
    sc.extras["slow_fast"] = {
        "sfh": sfh, "pf": sfh_pf,
        "box": ((-1.5, -1.5, -1.0, -1.0), (1.5, 1.5, 1.0, 1.0)),
        "accept": _annulus(0.3),
    }
    return sc


# ---------------------------------------------------------------------------


def quartic(delta=None, r=None, n=None, k=None, **_) -> Scenario:
    """Quartic slice and its slow-fast extension.

    The slow frequency is ``varpi = (2 p1^2 + q1^4)^(1/4) / (2c)``.  When
    ``(delta, n/k)`` is resonant the full unperturbed field has frequency
    ``varpi/k``.
    """
    if delta is not None and r is not None:
        raise ConfigError("give either delta or r, not both")
    if r is not None:
        delta = delta_from_r(Fraction(r))
    delta = Fraction(3, 8) if delta is None else Fraction(delta).limit_denominator(10 ** 6)
    if k is None:
        nk = rational_resonance(float(delta))
        if nk is not None:
            n, k = nk
    c = quartic_constant_c()

    chart = _planar(box=3.0, hole=0.05)
    q, p = chart.symbols()
    vec = lambda comps, lab: from_sympy(chart, Valence.vector(1), comps, lab)
    energy = 2 * p ** 2 + q ** 4
    varpi = energy ** sp.Rational(1, 4) / (2 * sp.Float(c, 17))
    X = vec([p, -q ** 3], "X")
    pf = PeriodicFlow(X, from_sympy(chart, Valence.scalar(), varpi, "varpi"), label="quartic")
    fields = {
        "q": from_sympy(chart, Valence.scalar(), q, "q"),
        "q2": from_sympy(chart, Valence.scalar(), q ** 2, "q^2"),
        "qp3": from_sympy(chart, Valence.scalar(), q * p ** 3 + q, "q p^3 + q"),
        "H0": from_sympy(chart, Valence.scalar(), p ** 2 / 2 + q ** 4 / 4, "H0"),
        "dq_vec": vec([1, 0], "d/dq"),
        "euler": vec([q, p], "q d/dq + p d/dp"),
        "homog": vec([q, 2 * p], "q d/dq + 2p d/dp"),
        "W_q6": vec([0, -6 * q ** 5], "V[q^6]"),
        "qdp": from_sympy(chart, Valence.form(1), [0, q], "q dp"),
        "q2dqdp": from_sympy(chart, Valence.form(2), [1 + q ** 2], "(1+q^2) dq^dp"),
    }
    params = {"delta": str(delta), "n": n, "k": k, "c": c}
    sc = Scenario("quartic", params, pf, fields, ((-1.3, -1.3), (1.3, 1.3)), _annulus(0.4))

    c1 = _planar(("q1", "p1"), box=3.0, hole=0.05)
    c2 = CoordChart(("q2", "p2"), (-8, -8), (8, 8))
    pps = ProductPhaseSpace(c1, canonical_form(c1, [(0, 1)]), c2, canonical_form(c2, [(0, 1)]))
    q1, p1, q2, p2 = pps.symbols
    dlt = sp.Rational(delta.numerator, delta.denominator)
    f = p1 ** 2 / 2 + q1 ** 4 / 4
    F = p2 ** 2 / 2 + dlt / 2 * q1 ** 2 * q2 ** 2
    sfh = SlowFastHamiltonian(pps, f, F, f"quartic delta={delta}")
    varpi1 = (2 * p1 ** 2 + q1 ** 4) ** sp.Rational(1, 4) / (2 * sp.Float(c, 17))
    sc.sfh = sfh
    sc.extras.update({
        "varpi1": varpi1,
        "slow_period_at_1": 4 * math.pi * c,
        "box4": ((-1.2, -1.2, -1.0, -1.0), (1.2, 1.2, 1.0, 1.0)),
        "accept4": _annulus(0.5),
    })
    if k is not None:
        sc.extras["pf4"] = sfh.periodic_flow(varpi1 / k, config=pf.config)
    return sc


# ---------------------------------------------------------------------------


def cylinder(g=None, **_) -> Scenario:
    """``M1 = R x S^1`` with ``sigma1 = ds ^ dphi``, ``f = s^2/2`` and
    ``F = s (q2^2 + p2^2)/2 + g(s) q2``."""
    c1 = CoordChart(("s", "phi"), (0.3, 0.0), (3.0, 2 * math.pi), periodic=((1, 2 * math.pi),))
    c2 = CoordChart(("q2", "p2"), (-8, -8), (8, 8))
    s_, phi_ = c1.symbols()
    sigma1 = from_sympy(c1, Valence.form(2), [1], "ds^dphi")
    pps = ProductPhaseSpace(c1, sigma1, c2, canonical_form(c2, [(0, 1)]))
    s, phi, q2, p2 = pps.symbols
    g = sp.sympify(g) if g is not None else sp.Rational(3, 10) * s ** 2
    g = g.subs(s_, s)
    F = s * (q2 ** 2 + p2 ** 2) / 2 + g * q2
    sfh = SlowFastHamiltonian(pps, s ** 2 / 2, F, "cylinder")
    pf = sfh.periodic_flow(s)
    # averaged d_s F along the fast circles centred at q2 = -g/s
    gp = sp.diff(g, s)
    avg_dsF = ((q2 + g / s) ** 2 + p2 ** 2 + (g / s) ** 2) / 2 - gp * g / s
    varpi_prime = sp.Integer(1)
    mu = pps.form1([0, sp.simplify(avg_dsF / varpi_prime), 0, 0], "mu")
    box = ((0.6, 0.0, -1.0, -1.0), (2.0, 2 * math.pi, 1.0, 1.0))
    return Scenario("cylinder", {"g": str(g)}, pf, {"F": sfh.F, "mu": mu}, box, None, sfh,
                    {"mu": mu, "avg_dsF": avg_dsF})


# ---------------------------------------------------------------------------


def _sphere_frame(x: np.ndarray) -> np.ndarray:
    """Two orthonormal vectors orthogonal to each ``x`` (columns), shape ``(P, 3, 2)``."""
    u = x / np.linalg.norm(x, axis=-1, keepdims=True)
    ref = np.where(np.abs(u[:, :1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
    a = np.cross(u, ref)
    a /= np.linalg.norm(a, axis=-1, keepdims=True)
    b = np.cross(u, a)
    return np.stack([a, b], axis=-1)


def sphere(epsilon=0.1, **_) -> Scenario:
    """``M2 = S^2`` in ambient coordinates, ``J = phi(xi) . x`` with inverse stereographic ``phi``."""
    c1 = CoordChart(("xi1", "xi2"), (-3, -3), (3, 3))
    c2 = CoordChart(("x1", "x2", "x3"), (-2, -2, -2), (2, 2, 2),
                    lambda x: np.linalg.norm(x, axis=-1) < 0.5)
    s1 = from_sympy(c1, Valence.form(2), [-1], "dxi2^dxi1")
    x1_, x2_, x3_ = c2.symbols()
    s2 = from_sympy(c2, Valence.form(2), {(1, 2): x1_, (0, 2): -x2_, (0, 1): x3_}, "sigma_S2")
    pps = ProductPhaseSpace(c1, s1, c2, s2, epsilon=float(epsilon), fast_frame=_sphere_frame)
    xi1, xi2, x1, x2, x3 = pps.symbols
    den = 1 + xi1 ** 2 + xi2 ** 2
    phi = sp.Matrix([2 * xi1 / den, 2 * xi2 / den, (1 - xi1 ** 2 - xi2 ** 2) / den])
    x = sp.Matrix([x1, x2, x3])
    J = phi.dot(x)
    U = list(sp.Matrix([0, 0]).col_join(x.cross(phi)))
    generator = pps.vector(U, "x cross phi")
    # the closed-form beta = (phi x x) . d1 phi
    pxx = phi.cross(x)
    beta_exact = pps.form1([pxx.dot(phi.diff(xi1)), pxx.dot(phi.diff(xi2)), 0, 0, 0], "beta_exact")
    pf = PeriodicFlow(generator, pps.scalar(1, "omega=1"), label="sphere rotation")

    def accept(pts):
        xs = pts[:, 2:]
        ph = np.stack([2 * pts[:, 0], 2 * pts[:, 1], 1 - pts[:, 0] ** 2 - pts[:, 1] ** 2], -1)
        ph /= (1 + pts[:, 0] ** 2 + pts[:, 1] ** 2)[:, None]
        return np.abs(np.sum(ph * xs, axis=-1)) / np.linalg.norm(xs, axis=-1) < 0.9

    sc = Scenario("sphere", {"epsilon": float(epsilon)}, pf, {"J": pps.scalar(J, "J")},
                  ((-1.5, -1.5, -1.0, -1.0, -1.0), (1.5, 1.5, 1.0, 1.0, 1.0)), accept, None,
                  {"pps": pps, "J": J, "h": sp.Integer(0), "generator": generator,
                   "beta_exact": beta_exact, "phi": phi})
    return sc


def sphere_probes(sc: Scenario, n: int = 20, seed: int = 0) -> np.ndarray:
    """Points with ``x`` on the unit sphere, away from the rotation axis."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        xi = rng.uniform(-1.5, 1.5, size=2)
        x = rng.normal(size=3)
        x /= np.linalg.norm(x)
        pt = np.concatenate([xi, x])
        if sc.accept(pt[None])[0]:
            out.append(pt)
    return np.array(out)


# ---------------------------------------------------------------------------


def adiabatic_negative(**_) -> Scenario:
    """``f = 0`` and ``F = (1 + q1^2)(q2^2 + p2^2)/2 + p1``: the averaged perturbation
    does not preserve the frequency."""
    c1 = CoordChart(("q1", "p1"), (-4, -4), (4, 4))
    c2 = _planar(("q2", "p2"), box=6.0, hole=1e-3)
    pps = ProductPhaseSpace(c1, canonical_form(c1, [(0, 1)]), c2, canonical_form(c2, [(0, 1)]))
    q1, p1, q2, p2 = pps.symbols
    sfh = SlowFastHamiltonian(pps, sp.Integer(0), (1 + q1 ** 2) * (q2 ** 2 + p2 ** 2) / 2 + p1,
                              "adiabatic")
    pf = sfh.periodic_flow(1 + q1 ** 2)
    box = ((0.2, -1.0, -1.0, -1.0), (1.0, 1.0, 1.0, 1.0))
    return Scenario("adiabatic-negative", {}, pf, {"F": sfh.F}, box, _fast_annulus(0.3), sfh)


def _fast_annulus(r_min):
    return lambda x: np.hypot(x[:, 2], x[:, 3]) > r_min


SCENARIOS = {
    "harmonic": harmonic,
    "quartic": quartic,
    "cylinder": cylinder,
    "sphere": sphere,
    "adiabatic-negative": adiabatic_negative,
}


def get_scenario(name: str, **params) -> Scenario:
    try:
        builder = SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}") from None
    return builder(**params)
