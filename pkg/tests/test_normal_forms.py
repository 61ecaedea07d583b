"""First-order normalization by the time-epsilon flow of the generator."""
import numpy as np
import pytest

from s1avg.averaging import averaged, s_field
from s1avg.errors import DegenerateError
from s1avg.homological import probe_points
from s1avg.normal_forms import (PerturbedSystem, averaged_remainder, build_generator,
                                check_normalization_condition, choose_vertical_killer, fit_slope,
                                normalize_first_order, vertical_coefficient)
from s1avg.tensor import lie_bracket

from conftest import maxabs


@pytest.fixture(scope="module")
def hsmall(harmonic):
    return harmonic.probes(6, seed=2, box=((-1.0, -1.0), (1.0, 1.0)))


@pytest.fixture(scope="module")
def qsmall(quartic):
    return quartic.probes(6, seed=2, box=((-1.0, -1.0), (1.0, 1.0)))


def test_fit_slope():
    eps = np.array([1e-1, 1e-2, 1e-3])
    assert fit_slope(eps, 3 * eps ** 2) == pytest.approx(2.0)
    assert fit_slope(eps, np.array([1e-3, 1e-13, 1e-14])) != fit_slope(eps, 3 * eps ** 2)
    assert np.isnan(fit_slope(eps, np.zeros(3)))


def test_generator_for_constant_frequency(harmonic, hsmall):
    ps = PerturbedSystem(harmonic.pf, harmonic.field("W_q4"), nodes=64)
    Z = build_generator(ps)
    np.testing.assert_allclose(Z.evaluate(hsmall),
                               s_field(harmonic.pf, ps.W, 64).evaluate(hsmall), atol=1e-12)
    np.testing.assert_allclose(averaged_remainder(ps).evaluate(hsmall),
                               averaged(harmonic.pf, ps.W, 64).evaluate(hsmall), atol=1e-12)


def test_harmonic_normal_form_is_second_order(harmonic, hsmall):
    ps = PerturbedSystem(harmonic.pf, harmonic.field("W_q4"), nodes=64)
    r = normalize_first_order(ps, hsmall, control_offset=[1.0, 0.0])
    assert 1.8 <= r.fitted_order <= 2.2
    assert 0.8 <= r.control_order <= 1.2
    assert np.all(np.diff(np.log(r.residuals)) < 0)


def test_unperturbed_direction_is_exact(quartic, qsmall):
    ps = PerturbedSystem(quartic.pf, quartic.pf.X, nodes=64)
    assert maxabs(build_generator(ps).evaluate(qsmall)) < 1e-12
    r = normalize_first_order(ps, qsmall)
    assert np.max(r.residuals) < 1e-12


def test_normalization_condition(harmonic, hsmall, quartic, qsmall):
    holds, witness, details = check_normalization_condition(
        PerturbedSystem(harmonic.pf, harmonic.field("W_q4"), nodes=64), hsmall)
    assert holds and witness is None and details["max_bracket_X_Wbar"] < 1e-6
    holds, witness, details = check_normalization_condition(
        PerturbedSystem(quartic.pf, quartic.field("W_q6"), nodes=64), qsmall)
    assert holds
    holds, witness, details = check_normalization_condition(
        PerturbedSystem(quartic.pf, quartic.field("euler"), nodes=64), qsmall)
    assert not holds
    assert witness.shape == (2,) and details["max_L_avgW_omega"] > 1e-3


def test_quartic_slow_fast_perturbation_is_normalizable(quartic):
    pf4 = quartic.extras["pf4"]
    pts = probe_points(pf4.chart, 4, quartic.extras["box4"], 1, pf4, quartic.extras["accept4"])
    holds, _, details = check_normalization_condition(PerturbedSystem(pf4, quartic.sfh.WW, nodes=64),
                                                      pts)
    assert holds, details


def test_gauge_independence(quartic, qsmall):
    W = quartic.field("W_q6")
    Y = quartic.field("homog")  # invariant, with L_Y ln(omega) = 1
    plain = PerturbedSystem(quartic.pf, W, nodes=64)
    r0 = normalize_first_order(plain, qsmall)
    r1 = normalize_first_order(plain, qsmall, Y=Y)
    assert r0.fitted_order >= 1.8 and r1.fitted_order >= 1.8
    # the two remainders differ by X, and both commute with X
    diff = r1.Wbar.evaluate(qsmall) - r0.Wbar.evaluate(qsmall)
    np.testing.assert_allclose(diff, quartic.pf.X.evaluate(qsmall), atol=1e-9)
    for Wbar in (r0.Wbar, r1.Wbar):
        assert maxabs(lie_bracket(quartic.pf.X, Wbar).evaluate(qsmall)) < 1e-6


def test_vertical_killer(quartic, qsmall):
    pf = quartic.pf
    ps = PerturbedSystem(pf, quartic.field("W_q6"), nodes=64)
    frame = [quartic.field("homog")]
    Y = choose_vertical_killer(ps, frame, qsmall)
    Wbar = averaged_remainder(ps, Y)
    c0 = vertical_coefficient(pf, Wbar, frame)
    assert maxabs(c0.evaluate(qsmall)) < 1e-8
    # without the gauge the average has a vertical component
    assert maxabs(vertical_coefficient(pf, averaged_remainder(ps), frame).evaluate(qsmall)) > 1e-3


def test_vertical_killer_needs_varying_frequency(harmonic, hsmall):
    ps = PerturbedSystem(harmonic.pf, harmonic.field("W_q4"), nodes=64)
    with pytest.raises(DegenerateError):
        choose_vertical_killer(ps, [harmonic.field("euler")], hsmall)
    with pytest.raises(DegenerateError):
        vertical_coefficient(harmonic.pf, ps.W, [])
