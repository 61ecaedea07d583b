"""Scenario registry and parameter handling."""
from fractions import Fraction

import numpy as np
import pytest

from s1avg.errors import ConfigError
from s1avg.scenarios import SCENARIOS, get_scenario, sphere_probes


def test_registry_names():
    assert set(SCENARIOS) == {"harmonic", "quartic", "cylinder", "sphere", "adiabatic-negative"}
    with pytest.raises(ConfigError):
        get_scenario("pendulum")


def test_unknown_field_is_a_config_error(harmonic):
    with pytest.raises(ConfigError):
        harmonic.field("nope")


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_probes_are_seeded_and_inside_the_domain(name):
    sc = get_scenario(name)
    if name == "sphere":
        pts = sphere_probes(sc, 6, seed=3)
        np.testing.assert_allclose(np.linalg.norm(pts[:, 2:], axis=1), 1.0, atol=1e-12)
        return
    a, b = sc.probes(6, seed=3), sc.probes(6, seed=3)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (6, sc.chart.dim)
    sc.chart.check(a)


def test_quartic_parameters():
    sc = get_scenario("quartic", r="1/2")
    assert Fraction(sc.params["delta"]) == Fraction(3, 8)
    assert (sc.params["n"], sc.params["k"]) == (1, 2)
    assert "pf4" in sc.extras
    plain = get_scenario("quartic", delta="1")
    assert plain.params["k"] is None and "pf4" not in plain.extras
    with pytest.raises(ConfigError):
        get_scenario("quartic", delta="3/8", r="1/2")


def test_quartic_frequency_matches_slow_period(quartic):
    omega = quartic.pf.omega.evaluate(np.array([[1.0, 0.0]]))[0, 0]
    assert 2 * np.pi / omega == pytest.approx(quartic.extras["slow_period_at_1"], rel=1e-12)
