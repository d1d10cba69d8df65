import numpy as np
import pytest

from energy_loans.profile_io import TimeSeries
from energy_loans.scenarios import (
    GpParams,
    ScenarioSet,
    default_gp_params,
    generate_scenarios,
    scenario_residual,
)


def test_zero_variance_scenarios_equal_base():
    base = TimeSeries([1.0, -2.0, 0.5])
    scn = generate_scenarios(base, GpParams(np.zeros(3), 0.7), 10, seed=1)
    assert np.array_equal(scn.net_paths(), np.tile(base.values, (10, 1)))
    assert np.allclose(scn.probabilities, 0.1)


def test_count_and_probabilities():
    base = TimeSeries(np.ones(97))
    scn = generate_scenarios(base, default_gp_params(base), 100, seed=2)
    assert scn.count == 100 and scn.horizon == 97
    assert abs(scn.probabilities.sum() - 1.0) < 1e-9
    assert np.all(scn.probabilities == 0.01)


def test_reproducible_under_seed():
    base = TimeSeries(np.linspace(0, 1, 8))
    params = GpParams(np.full(8, 0.2), 0.4)
    a = generate_scenarios(base, params, 5, seed=3)
    b = generate_scenarios(base, params, 5, seed=3)
    assert np.array_equal(a.deviations, b.deviations)


def test_marginal_std_and_lag_correlation():
    base = TimeSeries(np.zeros(6))
    scn = generate_scenarios(base, GpParams(np.full(6, 0.2), 0.5), 10_000, seed=4)
    dev = scn.deviations
    assert np.all(np.abs(dev.std(axis=0) - 0.2) < 0.05 * 0.2)
    for lag in range(1, 6):
        r = np.corrcoef(dev[:, lag - 1], dev[:, lag])[0, 1]
        assert abs(r - 0.5) < 0.05


def test_growing_lag_stds_are_respected():
    base = TimeSeries(np.full(5, 2.0))
    params = default_gp_params(base, 0.05, 0.7)
    assert params.lag_stds[0] == pytest.approx(0.1)
    assert params.lag_stds[-1] == pytest.approx(0.1 * (1 + 4 / 5))
    dev = generate_scenarios(base, params, 20_000, seed=5).deviations
    assert np.allclose(dev.std(axis=0), params.lag_stds, rtol=0.05)


def test_deviation_mean_vanishes():
    base = TimeSeries(np.zeros(4))
    dev = generate_scenarios(base, GpParams(np.full(4, 0.3), 0.7), 10_000, seed=6).deviations
    assert np.all(np.abs(dev.mean(axis=0)) < 3 * 0.3 / np.sqrt(10_000))


def test_argument_errors():
    base = TimeSeries(np.zeros(3))
    with pytest.raises(ValueError):
        generate_scenarios(base, GpParams(np.zeros(3)), 0, seed=0)
    with pytest.raises(ValueError):
        generate_scenarios(base, GpParams(np.zeros(4)), 2, seed=0)
    with pytest.raises(ValueError):
        GpParams([-0.1], 0.0)
    with pytest.raises(ValueError):
        GpParams([0.1], 1.5)
    with pytest.raises(ValueError):
        ScenarioSet(base, np.zeros((2, 3)), [0.7, 0.7])


def test_residual_hand_evaluation():
    scn = ScenarioSet.deterministic(TimeSeries([1.0, 1.0]))
    res = scenario_residual(scn, TimeSeries([-1.0, 0.0]), np.zeros((1, 2)))
    assert res.tolist() == [[0.0, 1.0]]


def test_residual_zero_inputs_equal_base():
    base = TimeSeries([0.3, -0.2, 1.1])
    scn = ScenarioSet(base, np.zeros((2, 3)), [0.5, 0.5])
    res = scenario_residual(scn, np.zeros(3), np.zeros((2, 3)))
    assert np.array_equal(res, np.tile(base.values, (2, 1)))


def test_loan_shifts_residual_by_paired_legs():
    base = TimeSeries([0.5, 0.5])
    scn = ScenarioSet.deterministic(base)
    plain = scenario_residual(scn, np.zeros(2), np.zeros((1, 2)))
    loan = scenario_residual(scn, np.array([1.0, -1.0]), np.zeros((1, 2)))
    assert (loan - plain).tolist() == [[1.0, -1.0]]


def test_residual_dimension_mismatch():
    scn = ScenarioSet.deterministic(TimeSeries([1.0, 1.0]))
    with pytest.raises(ValueError):
        scenario_residual(scn, np.zeros(3), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        scenario_residual(scn, np.zeros(2), np.zeros((2, 2)))
