"""Tests for base-point selection, tracing and efficiency recovery."""

import math

import numpy as np
import pytest

from conftest import make_panel
from matchfn.efficiency import (
    SupportFlag,
    TraceGrid,
    geometric_axis,
    recover_efficiency,
    recover_matching_surface,
    select_base_point,
    trace_distribution,
)
from matchfn.errors import BasePointError, TraceFailureError
from matchfn.kernel_cdf import KernelConfig, fit
from matchfn.synth import DgpConfig, EfficiencyProcess, generate


class TestGrid:
    def test_default_grid_contains_one(self):
        grid = TraceGrid.build()

        assert grid.resolution == (200, 60)
        assert 1.0 in grid.psi_values
        assert 1.0 in grid.lambda_values

    def test_geometric_spacing(self):
        axis = geometric_axis(0.05, 20.0, 200)
        ratios = axis[1:] / axis[:-1]

        assert np.all(np.diff(axis) > 0)
        assert np.ptp(ratios) < 1e-12

    def test_ends_within_half_a_step(self):
        axis = geometric_axis(0.05, 20.0, 200)
        step = math.log(20.0 / 0.05) / 199

        assert abs(math.log(axis[0] / 0.05)) <= step / 2 + 1e-12
        assert abs(math.log(axis[-1] / 20.0)) <= step / 2 + 1e-12

    def test_range_must_contain_one(self):
        with pytest.raises(ValueError):
            geometric_axis(2.0, 4.0, 10)

    def test_spanning_grid_stays_inside_caps(self, synthetic_small):
        panel = synthetic_small.panel
        grid = TraceGrid.spanning(panel, select_base_point(panel), 50, 20)

        assert 1.0 in grid.psi_values and 1.0 in grid.lambda_values
        assert grid.psi_values[0] >= 0.05 * 0.9 and grid.psi_values[-1] <= 20.0 * 1.1


class TestSelectBasePoint:
    panel = make_panel([
        ("2019-11", 1.0, 1.0, 1.0),
        ("2019-12", math.e, math.e, 2.0),
        ("2020-01", math.e ** 2, math.e ** 2, 3.0),
    ])

    def test_median_picks_the_middle(self):
        assert str(select_base_point(self.panel).period) == "2019-12"

    def test_period_policy(self):
        base = select_base_point(self.panel, "2019-11")

        assert (base.users, base.vacancies, base.hires) == (1.0, 1.0, 1.0)

    def test_single_observation(self):
        panel = make_panel([("2020-01", 5.0, 4.0, 3.0)])

        assert select_base_point(panel).hires == 3.0
        assert select_base_point(panel, "2020-01").hires == 3.0

    def test_missing_period(self):
        with pytest.raises(BasePointError):
            select_base_point(self.panel, "2021-01")

    def test_needs_a_positive_observation(self):
        with pytest.raises(BasePointError):
            select_base_point(make_panel([("2020-01", 5.0, 4.0, 0.0)]))


class TestTrace:
    def test_identity_cell_equals_the_cdf_at_the_base(self, fitted_small):
        estimator, base, grid, distribution = fitted_small
        i = int(np.where(grid.psi_values == 1.0)[0][0])
        j = int(np.where(grid.lambda_values == 1.0)[0][0])

        assert distribution.raw[i, j] == estimator.conditional_cdf(base.hires, base.users, base.vacancies)

    def test_values_are_monotone_probabilities(self, fitted_small):
        _, _, _, distribution = fitted_small
        values = distribution.values

        for column in range(values.shape[1]):
            known = values[distribution.in_support[:, column], column]
            assert np.all((known >= 0) & (known <= 1))
            assert np.all(np.diff(known) >= 0)

    def test_raw_values_are_kept(self, fitted_small):
        _, _, _, distribution = fitted_small

        assert distribution.monotonized
        assert distribution.raw.shape == distribution.values.shape
        assert distribution.out_of_support_share <= 0.5

    def test_mostly_unsupported_grid_fails(self):
        panel = make_panel([
            (f"2020-{month:02d}", 100.0 + month, 90.0 + 2 * month, 50.0 + month) for month in range(1, 13)
        ])
        estimator = fit([(o.users, o.vacancies, o.hires) for o in panel], KernelConfig(bandwidth=0.05))
        base = select_base_point(panel)

        with pytest.raises(TraceFailureError, match="narrow"):
            trace_distribution(estimator, base, TraceGrid.build(40, 20))


class TestRecoverEfficiency:
    def test_base_observation_is_one(self, synthetic_small, fitted_small):
        estimator, base, _, distribution = fitted_small
        series = recover_efficiency(estimator, distribution, synthetic_small.panel, base)

        assert series.value_at(base.period) == pytest.approx(1.0, abs=1e-12)
        assert len(series) == len(synthetic_small.panel)

    def test_in_range_values_are_positive(self, synthetic_small, fitted_small):
        estimator, base, _, distribution = fitted_small
        series = recover_efficiency(estimator, distribution, synthetic_small.panel, base)

        for entry in series:
            if entry.support_flag == SupportFlag.IN:
                assert entry.efficiency > 0 and math.isfinite(entry.efficiency)

    def test_unplaceable_observation_is_flagged_out(self, fitted_small):
        estimator, base, _, distribution = fitted_small
        panel = make_panel([("2040-01", 0.0, 100.0, 10.0)])
        entry = recover_efficiency(estimator, distribution, panel, base).entries[0]

        assert entry.support_flag == SupportFlag.OUT
        assert math.isnan(entry.efficiency)

    def test_scale_equivariance(self, synthetic_small, fitted_small):
        _, base, grid, _ = fitted_small
        panel = synthetic_small.panel
        scaled = panel.scaled(10.0)

        def recovered(source):
            estimator = fit([(o.users, o.vacancies, o.hires) for o in source], KernelConfig(bandwidth=0.1))
            anchor = select_base_point(source, base.period)
            distribution = trace_distribution(estimator, anchor, grid)
            return recover_efficiency(estimator, distribution, source, anchor)

        original, rescaled = recovered(panel), recovered(scaled)

        compared = 0
        for left, right in zip(original, rescaled):
            if left.support_flag == right.support_flag == SupportFlag.IN:
                assert right.efficiency == pytest.approx(left.efficiency, rel=1e-6)
                compared += 1
        assert compared > len(panel) // 2


def recover_synthetic(config: DgpConfig):
    """Fit, trace and invert a synthetic panel with the default estimator settings."""
    synthetic = generate(config)
    panel = synthetic.panel
    estimator = fit([(obs.users, obs.vacancies, obs.hires) for obs in panel], KernelConfig())
    base = select_base_point(panel)
    distribution = trace_distribution(estimator, base, TraceGrid.spanning(panel, base))
    series = recover_efficiency(estimator, distribution, panel, base)
    return synthetic, estimator, base, distribution, series


def true_relative_efficiency(synthetic, base) -> dict:
    truth = {(record.period, record.region): record.efficiency for record in synthetic}
    anchor = truth[(base.period, base.region)]
    return {key: value / anchor for key, value in truth.items()}


@pytest.fixture(scope="module")
def constant_recovery():
    return recover_synthetic(DgpConfig(periods=500, efficiency_process=EfficiencyProcess.CONSTANT, seed=3))


@pytest.fixture(scope="module")
def random_walk_recovery():
    return recover_synthetic(DgpConfig(periods=500, seed=3))


class TestSyntheticRecovery:
    def test_constant_efficiency_traces_a_step_at_one(self, constant_recovery):
        _, _, _, distribution, _ = constant_recovery
        psi = distribution.grid.psi_values

        columns = 0
        for column in range(distribution.values.shape[1]):
            known = distribution.in_support[:, column]
            if not known.any():
                continue
            values = distribution.values[known, column]
            assert np.all(values[psi[known] <= 0.75] <= 0.1)
            assert np.all(values[psi[known] >= 1.33] >= 0.9)
            columns += 1
        assert columns > distribution.grid.resolution[1] // 2

    def test_constant_efficiency_is_flat(self, constant_recovery):
        _, _, _, _, series = constant_recovery
        levels = np.array([entry.efficiency for entry in series if entry.support_flag != SupportFlag.OUT])

        assert len(levels) > 450
        assert np.std(levels) / np.mean(levels) < 0.02

    def test_random_walk_is_tracked(self, random_walk_recovery):
        synthetic, _, base, _, series = random_walk_recovery
        truth = true_relative_efficiency(synthetic, base)
        entries = [entry for entry in series if entry.support_flag != SupportFlag.OUT]

        recovered = np.log([entry.efficiency for entry in entries])
        expected = np.log([truth[(entry.period, entry.region)] for entry in entries])

        assert len(entries) > 450
        assert np.corrcoef(recovered, expected)[0, 1] > 0.95


@pytest.fixture(scope="module")
def wide_fit(synthetic_small):
    """Wide bandwidth so every sample point carries appreciable weight."""
    panel = synthetic_small.panel
    estimator = fit([(obs.users, obs.vacancies, obs.hires) for obs in panel], KernelConfig(bandwidth=0.5))
    base = select_base_point(panel)
    distribution = trace_distribution(estimator, base, TraceGrid.spanning(panel, base, 40, 12))
    return estimator, base, distribution


class TestMatchingSurface:
    def test_round_trip_at_sample_observations(self, synthetic_small, wide_fit):
        estimator, base, distribution = wide_fit
        series = recover_efficiency(estimator, distribution, synthetic_small.panel, base)
        surface = recover_matching_surface(estimator, distribution, base)
        lookup = series.lookup()

        checked = 0
        for obs in synthetic_small.panel:
            entry = lookup[obs.key]
            if entry.support_flag != SupportFlag.IN:
                continue
            predicted = surface(entry.efficiency, obs.users, obs.vacancies)
            assert predicted == pytest.approx(obs.hires, rel=1e-6)
            checked += 1
        assert checked > 0

    def test_predictions_are_non_negative(self, synthetic_small, fitted_small):
        estimator, base, _, distribution = fitted_small
        surface = recover_matching_surface(estimator, distribution, base)

        for a in (0.5, 1.0, 2.0):
            assert surface(a, base.users, base.vacancies) >= 0

    def test_provenance(self, fitted_small):
        estimator, base, _, distribution = fitted_small
        surface = recover_matching_surface(estimator, distribution, base)

        assert surface.provenance["sample_size"] == len(estimator)


@pytest.fixture(scope="module")
def cobb_douglas_recovery():
    return recover_synthetic(DgpConfig(seed=2))


@pytest.fixture(scope="module")
def wide_users_recovery():
    """Users move independently of efficiency, so (a, 2u, 2v) stays inside the data."""
    return recover_synthetic(DgpConfig(
        seed=2,
        efficiency_sd=0.01,
        user_efficiency_loading=0.0,
        user_rho=0.9,
        user_sd=0.3,
        vacancy_slope=1.0,
        vacancy_sd=0.4,
    ))


class TestSurfaceAccuracy:
    def test_matches_the_cobb_douglas_truth(self, cobb_douglas_recovery):
        synthetic, estimator, base, distribution, _ = cobb_douglas_recovery
        surface = recover_matching_surface(estimator, distribution, base)
        relative = true_relative_efficiency(synthetic, base)
        truth = {(record.period, record.region): record.matches for record in synthetic}

        errors = []
        for obs in synthetic.panel.observations[::10]:
            evaluation = surface.evaluate(relative[obs.key], obs.users, obs.vacancies)
            if evaluation.support_flag == SupportFlag.IN:
                errors.append(abs(evaluation.hires / truth[obs.key] - 1.0))

        assert len(errors) > 150
        assert np.median(errors) < 0.02
        assert np.mean(np.array(errors) < 0.05) > 0.9

    def test_doubling_users_and_vacancies_doubles_hires(self, wide_users_recovery):
        synthetic, estimator, base, distribution, _ = wide_users_recovery
        surface = recover_matching_surface(estimator, distribution, base)
        relative = true_relative_efficiency(synthetic, base)

        deviations = []
        for obs in synthetic.panel.observations[::10]:
            a = relative[obs.key]
            single = surface.evaluate(a, obs.users, obs.vacancies)
            double = surface.evaluate(a, 2.0 * obs.users, 2.0 * obs.vacancies)
            interior = all(
                evaluation.support_flag == SupportFlag.IN and 0.1 <= evaluation.probability <= 0.9
                for evaluation in (single, double)
            )
            if interior:
                deviations.append(abs(double.hires / (2.0 * single.hires) - 1.0))

        assert len(deviations) > 50
        assert np.median(deviations) < 0.05
