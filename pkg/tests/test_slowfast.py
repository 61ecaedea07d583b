"""Product phase spaces, monodromy, Hamiltonization and averaged symplectic forms."""
import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from s1avg.averaging import s_field
from s1avg.errors import SolvabilityError
from s1avg.flows import flow
from s1avg.homological import probe_points
from s1avg.scenarios import canonical_form, get_scenario, sphere_probes
from s1avg.slowfast import (ProductPhaseSpace, SlowFastHamiltonian, check_frequency_preservation,
                            delta_from_r, hamiltonian_split, hamiltonize, in_delta_set,
                            invariant_symplectic, is_resonant, monodromy, partial_derivatives,
                            periodicity_certificate, quartic_constant_c, rational_resonance,
                            resonance_lhs, resonance_table)
from s1avg.tensor import CoordChart, exterior_derivative, interior_form, wedge

from conftest import maxabs


@pytest.fixture(scope="module")
def hsf(harmonic):
    return harmonic.extras["slow_fast"]


@pytest.fixture(scope="module")
def q4(quartic):
    pf4 = quartic.extras["pf4"]
    pts = probe_points(pf4.chart, 6, quartic.extras["box4"], 4, pf4, quartic.extras["accept4"])
    return quartic.sfh, pf4, pts


# -- splitting -------------------------------------------------------------------


def test_partial_derivatives(hsf):
    pps = hsf["sfh"].pps
    q1, p1, x1, y1 = pps.symbols
    d1, d2 = partial_derivatives(pps, q1 ** 2 * x1)
    pt = np.array([[0.5, -0.3, 1.2, 0.7]])
    np.testing.assert_allclose(d1.evaluate(pt), [[2 * 0.5 * 1.2, 0, 0, 0]])
    np.testing.assert_allclose(d2.evaluate(pt), [[0, 0, 0.25, 0]])
    d1, d2 = partial_derivatives(pps, q1 ** 2 + p1)
    assert maxabs(d2.evaluate(pt)) == 0


def test_split_of_slow_function(hsf):
    sfh = hsf["sfh"]
    pps = sfh.pps
    V1, V2 = hamiltonian_split(pps, sfh.f_expr)
    pt = np.array([[0.5, -0.3, 1.2, 0.7]])
    assert maxabs(V2.evaluate(pt)) == 0
    np.testing.assert_allclose(V1.evaluate(pt), sfh.v_f_hat.evaluate(pt))
    # sigma = dp ^ dq gives V = H_p d/dq - H_q d/dp
    np.testing.assert_allclose(V1.evaluate(pt), [[-0.3, -0.5, 0, 0]])


def test_split_parts_are_tangent_to_factors(q4):
    sfh, _, pts = q4
    V1, V2 = hamiltonian_split(sfh.pps, sfh.F_expr)
    assert maxabs(V1.evaluate(pts)[:, 2:]) == 0
    assert maxabs(V2.evaluate(pts)[:, :2]) == 0
    np.testing.assert_allclose(sfh.WW.evaluate(pts), V1.evaluate(pts))


@pytest.mark.parametrize("eps", [0.5, 1e-2])
def test_split_matches_full_symplectic_solve(q4, cylinder, eps):
    sfh, _, pts = q4
    np.testing.assert_allclose(sfh.full_field(eps).evaluate(pts),
                               sfh.direct_field(eps).evaluate(pts), atol=1e-10)
    cpts = cylinder.probes(5, seed=1)
    np.testing.assert_allclose(cylinder.sfh.full_field(eps).evaluate(cpts),
                               cylinder.sfh.direct_field(eps).evaluate(cpts), atol=1e-10)


def test_hamiltonian_field_solves_interior_equation(q4):
    sfh, _, pts = q4
    eps = 0.1
    r = interior_form(sfh.full_field(eps), sfh.pps.sigma(eps)) \
        + exterior_derivative(sfh.hamiltonian(eps))
    assert maxabs(r.evaluate(pts)) < 1e-9


def test_factor_checks(q4, sphere):
    sfh, _, pts = q4
    out = sfh.pps.check_factors(pts)
    assert out["sigma1"]["min_abs_det"] == pytest.approx(1.0)
    sp_pts = sphere_probes(sphere, 4, seed=0)
    assert sphere.extras["pps"].check_factors(sp_pts)["sigma2"]["min_abs_det"] > 0.5


def test_distinct_coordinate_names():
    c = CoordChart(("q", "p"))
    with pytest.raises(ValueError):
        ProductPhaseSpace(c, canonical_form(c, [(0, 1)]), c, canonical_form(c, [(0, 1)]))


# -- skew product, cocycle and monodromy ----------------------------------------


@settings(max_examples=6)
@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_skew_product_and_cocycle(quartic, t1, t2):
    sfh = quartic.sfh
    m = np.array([0.9, 0.3, 0.4, -0.2])
    slow = lambda x, t: flow(sfh.v_f, x, t)
    # the slow part of the full flow is the flow of v_f
    np.testing.assert_allclose(flow(sfh.VV, m, t2)[:2], slow(m[:2], t2), atol=1e-8)
    # fiber maps compose along the slow trajectory
    fiber = lambda m1, m2, t: flow(sfh.VV, np.concatenate([m1, m2]), t)[2:]
    g2 = fiber(m[:2], m[2:], t2)
    lhs = fiber(m[:2], m[2:], t1 + t2)
    rhs = fiber(slow(m[:2], t2), g2, t1)
    np.testing.assert_allclose(lhs, rhs, atol=1e-8)


def test_resonant_monodromy_is_two_periodic(quartic):
    ok, recs = periodicity_certificate(quartic.sfh, [[1.0, 0.0], [0.7, 0.0], [0.5, 0.5]], 2,
                                       hint=7.0)
    assert ok
    for rec in recs:
        assert rec.minimal_k == 2
        assert rec.symplectic_error < 1e-7
        assert rec.linearity_error < 1e-8
        # the fiber map after one slow period is minus the identity
        np.testing.assert_allclose(rec.matrix, -np.eye(2), atol=1e-6)


def test_slow_period_oracle(quartic):
    rec = monodromy(quartic.sfh, [1.0, 0.0], hint=7.0)
    assert rec.tau == pytest.approx(quartic.extras["slow_period_at_1"], abs=1e-8)


@pytest.mark.parametrize("delta", ["0", "1"])
def test_non_resonant_monodromy(delta):
    sc = get_scenario("quartic", delta=delta)
    rec = monodromy(sc.sfh, [1.0, 0.0], k_max=8, tau=sc.extras["slow_period_at_1"])
    assert not rec.is_k_periodic and rec.minimal_k is None
    assert rec.errors.min() > 1e-2
    assert rec.symplectic_error < 1e-7


def test_monodromy_needs_period_or_hint(quartic):
    with pytest.raises(ValueError):
        monodromy(quartic.sfh, [1.0, 0.0])


# -- averaged perturbation ---------------------------------------------------------


def test_frequency_preservation_quartic(q4):
    sfh, pf4, pts = q4
    out = check_frequency_preservation(sfh, pf4, pts)
    assert out["holds"], out


def test_frequency_preservation_constant_frequency(hsf):
    pts = probe_points(hsf["pf"].chart, 5, hsf["box"], 0, hsf["pf"], hsf["accept"])
    assert check_frequency_preservation(hsf["sfh"], hsf["pf"], pts)["holds"]


def test_frozen_slow_flow_breaks_frequency_preservation():
    sc = get_scenario("adiabatic-negative")
    out = check_frequency_preservation(sc.sfh, sc.pf, sc.probes(5, seed=0))
    assert not out["holds"] and out["L_avgW_omega"] > 1e-2


# -- Hamiltonization ---------------------------------------------------------------


def test_hamiltonize_cylinder(cylinder):
    pts = cylinder.probes(8, seed=2)
    r = hamiltonize(cylinder.sfh, cylinder.pf, cylinder.extras["mu"], pts)
    assert max(r.residuals.values()) < 1e-5
    assert max(r.first_integrals.values()) < 1e-6
    assert r.homological_residual < 1e-6
    assert r.asp_residual < 1e-7
    assert max(r.poisson.values()) < 1e-6
    # the modified form stays closed
    for st_form in r.sigma_tilde.values():
        assert maxabs(exterior_derivative(st_form).evaluate(pts[:3])) < 1e-5


def test_theta_without_s2_term_fails(cylinder):
    # an angle-dependent term with zero average keeps the solvability condition
    # but makes L_v F nonzero, so the S^2 part of theta is needed
    pps = cylinder.sfh.pps
    s, phi, q2, p2 = pps.symbols
    sfh = SlowFastHamiltonian(pps, s ** 2 / 2, cylinder.sfh.F_expr + s ** 2 * sp.cos(phi))
    pf = sfh.periodic_flow(s)
    mu = cylinder.extras["mu"]
    pts = cylinder.probes(8, seed=2)
    r = hamiltonize(sfh, pf, mu, pts)
    assert max(r.residuals.values()) < 1e-5
    d1F, _ = partial_derivatives(pps, sfh.F_expr)
    inv = pf.omega.apply(lambda w: 1 / w, lambda w: -1 / w ** 2)
    truncated = wedge(inv, s_field(pf, d1F)) + mu
    eps = 1e-2
    st_form = pps.sigma(eps) - eps * exterior_derivative(truncated)
    Ht = sfh.f + eps * (sfh.F - interior_form(sfh.v_f_hat, truncated))
    res = maxabs((interior_form(sfh.VV, st_form) + exterior_derivative(Ht)).evaluate(pts))
    assert res > 1e-4


def test_hamiltonize_zero_average_case(hsf):
    pts = probe_points(hsf["pf"].chart, 8, hsf["box"], 1, hsf["pf"], hsf["accept"])
    r = hamiltonize(hsf["sfh"], hsf["pf"], None, pts)
    assert max(r.residuals.values()) < 1e-5
    assert max(r.first_integrals.values()) < 1e-6


def test_hamiltonize_refuses_without_solvability(cylinder):
    pts = cylinder.probes(4, seed=2)
    with pytest.raises(SolvabilityError):
        hamiltonize(cylinder.sfh, cylinder.pf, None, pts)
    sc = get_scenario("adiabatic-negative")
    with pytest.raises(SolvabilityError):
        hamiltonize(sc.sfh, sc.pf, None, sc.probes(4, seed=0))


# -- averaged symplectic form --------------------------------------------------------


def test_invariant_symplectic_sphere(sphere):
    e = sphere.extras
    pps = e["pps"]
    pts = sphere_probes(sphere, 6, seed=1)
    r = invariant_symplectic(pps, e["h"], e["J"], pts, generator=e["generator"])
    assert r.representation_difference < 1e-6
    assert r.adiabatic_ok and r.adiabatic_residual < 1e-8
    assert r.momentum_residual < 1e-5
    assert r.iss_residual < 1e-9
    assert r.generator_split_error < 1e-12
    np.testing.assert_allclose(pps.restrict(r.beta, pts), pps.restrict(e["beta_exact"], pts),
                               atol=1e-6)
    # d beta accounts for the whole difference sigma - <sigma>
    diff = (pps.restrict(pps.sigma(), pts) - pps.restrict(r.sigma_avg_direct, pts)) / pps.epsilon
    np.testing.assert_allclose(diff, pps.restrict(exterior_derivative(e["beta_exact"]), pts),
                               atol=1e-6)
    assert maxabs(diff) > 1e-2


def test_split_momentum_leaves_sigma_invariant(hsf):
    pps = hsf["sfh"].pps
    q1, p1, x1, y1 = pps.symbols
    pts = np.array([[0.3, 0.2, 1.0, 0.5], [-0.4, 0.9, -0.7, 0.6]])
    r = invariant_symplectic(pps, sp.Integer(0), (x1 ** 2 + y1 ** 2) / 2, pts, eps=0.1)
    assert maxabs(pps.restrict(r.beta, pts)) < 1e-12
    np.testing.assert_allclose(pps.restrict(r.sigma_avg_direct, pts),
                               pps.restrict(pps.sigma(0.1), pts), atol=1e-10)


# -- quartic constants and resonances -------------------------------------------------


def test_quartic_constant():
    c = quartic_constant_c()
    closed = math.sqrt(2) / math.pi * math.gamma(0.25) ** 2 / (4 * math.sqrt(2 * math.pi))
    assert abs(c - closed) < 1e-12
    assert abs(c - 0.5902) < 1e-4


def test_resonance_relation():
    assert is_resonant(0.375, 1, 2, tol=1e-15)
    assert abs(resonance_lhs(0.375)) < 1e-15
    assert not is_resonant(0.375, 1, 3)
    assert not is_resonant(0.375, 2, 4)  # not coprime
    assert rational_resonance(0.375) == (1, 2)
    assert rational_resonance(1.0) is None


def test_delta_parametrization():
    assert delta_from_r(Fraction(1, 2)) == Fraction(3, 8)
    assert in_delta_set(Fraction(1, 2)) and in_delta_set(Fraction(9, 2))
    assert not in_delta_set(2) and not in_delta_set(0)
    rows = {row["r"]: row for row in resonance_table(["1/3", "1/2", "2", "9/2", "13/3"])}
    assert set(rows) == {"1/3", "1/2", "9/2", "13/3"}
    assert (rows["1/2"]["n"], rows["1/2"]["k"]) == (1, 2)
    assert (rows["9/2"]["n"], rows["9/2"]["k"]) == (1, 2)
    assert rows["1/3"]["k"] is None and rows["13/3"]["k"] is None
