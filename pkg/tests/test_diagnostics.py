"""Tests for market diagnostics and baseline normalization."""

import numpy as np
import pytest

from conftest import make_panel
from matchfn.diagnostics import compute_diagnostics, diagnostics_frame, normalize_to_baseline
from matchfn.errors import BaselineError, EmptyInputError, NonNormalizableError
from matchfn.models import Panel, to_month


def test_ratios_match_closed_form_on_random_inputs():
    rng = np.random.default_rng(3)
    counts = rng.uniform(1.0, 1e5, size=(50, 3))
    panel = make_panel([(f"{2000 + i // 12}-{i % 12 + 1:02d}", *row) for i, row in enumerate(counts)])

    for obs, record in zip(panel, compute_diagnostics(panel)):
        assert record.tightness == pytest.approx(obs.vacancies / obs.users, rel=1e-12)
        assert record.job_finding_rate == pytest.approx(obs.hires / obs.users, rel=1e-12)
        assert record.worker_finding_rate == pytest.approx(obs.hires / obs.vacancies, rel=1e-12)


def test_example_ratios():
    record = compute_diagnostics(make_panel([("2020-01", 100.0, 50.0, 40.0)]))[0]

    assert (record.tightness, record.job_finding_rate, record.worker_finding_rate) == (0.5, 0.4, 0.8)


def test_zero_users_leaves_ratios_undefined():
    record = compute_diagnostics(make_panel([("2020-01", 0.0, 10.0, 5.0)]))[0]

    assert record.tightness is None
    assert record.job_finding_rate is None
    assert record.worker_finding_rate == 0.5


def test_undefined_ratios_are_nan_in_frame():
    frame = diagnostics_frame(compute_diagnostics(make_panel([("2020-01", 0.0, 10.0, 5.0)])))

    assert np.isnan(frame.loc[0, "tightness"])
    assert frame["job_finding_rate"].dtype == float


def test_empty_panel_raises():
    with pytest.raises(EmptyInputError):
        compute_diagnostics(Panel.build([]))


class TestNormalizeToBaseline:
    series = [("2019-11", 2.0), ("2019-12", 4.0), ("2020-01", 6.0)]

    def test_baseline_is_exactly_one(self):
        result = normalize_to_baseline(self.series, "2019-12")

        assert result.index_at(to_month("2019-12")) == 1.0
        assert result.index_at(to_month("2020-01")) == 1.5

    def test_idempotent(self):
        once = normalize_to_baseline(self.series, "2019-12")
        twice = normalize_to_baseline(once.values, "2019-12")

        assert twice.values == once.values

    def test_missing_baseline(self):
        with pytest.raises(BaselineError):
            normalize_to_baseline(self.series, "2018-01")

    def test_zero_baseline(self):
        with pytest.raises(NonNormalizableError):
            normalize_to_baseline([("2019-12", 0.0)], "2019-12")
