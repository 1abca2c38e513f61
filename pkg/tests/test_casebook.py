import math

import numpy as np
import pytest

from wasslearn import casebook as cb
from wasslearn.spaces import EmpiricalDistribution, PointSet


def test_population_closed_form():
    inst = cb.IllustrativeInstance(10.0, 1.0, 10, 0.02)
    assert cb.analytic_population_worst_case(inst).value == pytest.approx(10 * math.sqrt(2) * math.sqrt(0.02))
    assert cb.analytic_population_worst_case(cb.IllustrativeInstance(10.0, 1.0, 10, 0.0)).value == 0.0


def test_population_oracle_refines():
    inst = cb.IllustrativeInstance(10.0, 2.0, 5, 0.05)
    exact = cb.analytic_population_worst_case(inst).value
    coarse = abs(cb.population_grid_oracle(inst, 200) - exact)
    fine = abs(cb.population_grid_oracle(inst, 2000) - exact)
    assert fine <= coarse


def test_empirical_closed_form():
    sample = EmpiricalDistribution.uniform(PointSet(np.array([[0.2], [0.9]])))
    inst = cb.IllustrativeInstance(10.0, 1.0, 2, 0.05)
    assert cb.analytic_empirical_worst_case(inst, sample).value == pytest.approx(5.0)
    assert cb.empirical_oracle(inst, sample) == pytest.approx(5.0, abs=1e-9)
    zero = cb.IllustrativeInstance(10.0, 1.0, 2, 0.0)
    assert cb.analytic_empirical_worst_case(zero, sample).value == 0.0
    far = cb.IllustrativeInstance(10.0, 1.0, 2, 0.2)
    assert "empirical_regime_violated" in cb.analytic_empirical_worst_case(far, sample).flags


def test_selection_probability():
    assert cb.selection_probability(cb.IllustrativeInstance(10.0, 1.0, 10, 0.05)).value == pytest.approx(0.5**10)
    assert cb.selection_probability(cb.IllustrativeInstance(10.0, 1.0, 10, 0.1)).value == 0.0
    assert cb.selection_probability(cb.IllustrativeInstance(10.0, 1.0, 10**6, 0.05)).value == pytest.approx(0.0)
    assert "n_exceeds_alpha" in cb.IllustrativeInstance(10.0, 1.0, 20, 0.02).flags


def test_simulation_small_n_matches():
    inst = cb.IllustrativeInstance(10.0, 1.0, 10, 0.05)
    sim = cb.simulate_selection(inst, 10_000, seed=1)
    prob = cb.selection_probability(inst).value
    assert abs(sim.frequency - prob) <= 3 * sim.standard_error(prob) + 1e-12


def test_simulation_deterministic():
    inst = cb.IllustrativeInstance(10.0, 1.0, 5, 0.02)
    a = cb.simulate_selection(inst, 500, seed=3)
    b = cb.simulate_selection(inst, 500, seed=3)
    assert a.selected_f1 == b.selected_f1 and np.array_equal(a.worst_case_values, b.worst_case_values)


def test_excess_profile():
    assert cb.excess_risk_profile(cb.IllustrativeInstance(10.0, 1.0, 10, 0.001)) == 0.0
    assert cb.excess_risk_profile(cb.IllustrativeInstance(10.0, 1.0, 10, 0.09)) == 0.0
    inner = cb.IllustrativeInstance(10.0, 1.0, 10, 0.05, delta=5e-4)
    assert cb.excess_risk_profile(inner) == pytest.approx(10 * math.sqrt(2) * math.sqrt(0.05) - 1)
    assert cb.excess_risk_profile(inner) == pytest.approx(2.1623, abs=1e-4)


def test_excess_profile_against_simulation():
    inst = cb.IllustrativeInstance(10.0, 1.0, 5, 0.05, delta=0.01)
    sim = cb.simulate_selection(inst, 20_000, seed=9)
    assert cb.excess_risk_profile(inst) > 0
    assert cb.simulated_excess_quantile(inst, sim) == pytest.approx(cb.excess_risk_profile(inst))


def test_worst_alpha():
    assert cb.worst_alpha(0.01, 0.5, 10, 1.0).value == pytest.approx((1 - 0.5**0.1) / 0.01)
    assert "alpha_not_above_one" in cb.worst_alpha(0.5, 0.999, 10, 1.0).flags


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_worst_alpha_excess_slope(p):
    n, delta = 10, 0.5
    rhos = np.logspace(-8, -7, 8)
    excess = []
    for rho in rhos:
        alpha = cb.worst_alpha(rho, delta, n, p).value
        inst = cb.IllustrativeInstance(alpha, p, n, rho * 0.999, delta)
        excess.append(cb.excess_risk_profile(inst))
    slope = np.polyfit(np.log(rhos), np.log(excess), 1)[0]
    assert slope == pytest.approx(-p * p / (p + 1), abs=0.05)


def test_invalid_instance():
    with pytest.raises(ValueError):
        cb.IllustrativeInstance(10.0, 0.5, 10, 0.1)
