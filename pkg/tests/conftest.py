"""Shared fixtures for the matchfn test suite."""

import math

import numpy as np
import pytest

from matchfn.efficiency import (
    BasePoint,
    EfficiencyEntry,
    EfficiencySeries,
    SupportFlag,
    TraceGrid,
    select_base_point,
    trace_distribution,
)
from matchfn.kernel_cdf import KernelConfig, fit
from matchfn.models import Panel, PanelObservation, to_month
from matchfn.synth import DgpConfig, EfficiencyProcess, generate


def make_panel(rows, label: str = "test") -> Panel:
    """Panel from (period, users, vacancies, hires[, region]) tuples."""
    observations = []
    for row in rows:
        period, users, vacancies, hires = row[:4]
        region = row[4] if len(row) > 4 else None
        observations.append(PanelObservation(
            period=to_month(period), users=users, vacancies=vacancies, hires=hires, region=region,
        ))
    return Panel.build(observations, label=label)


def monthly(start: str, count: int) -> list:
    first = to_month(start)
    return [first + step for step in range(count)]


def efficiency_series(panel: Panel, values, base_index: int = 0, flag=SupportFlag.IN) -> EfficiencySeries:
    """EfficiencySeries with given values, aligned to the panel."""
    entries = tuple(
        EfficiencyEntry(obs.period, obs.region, float(value), math.nan, flag)
        for obs, value in zip(panel, values)
    )
    base_obs = panel.observations[base_index]
    base = BasePoint(
        hires=max(base_obs.hires, 1.0),
        users=base_obs.users,
        vacancies=base_obs.vacancies,
        period=base_obs.period,
        region=base_obs.region,
    )
    return EfficiencySeries(entries=entries, base=base)


def write_csv(path, text: str):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def simple_csv(tmp_path):
    return write_csv(
        tmp_path / "panel.csv",
        "period,region,users,vacancies,hires\n"
        "2020-01,Tokyo,100,50,40\n"
        "2019-12,Tokyo,120,60,45\n"
        "2019-12,Osaka,80,40,30\n"
        "2020-02,Osaka,90,45,35\n",
    )


@pytest.fixture(scope="session")
def synthetic_small():
    """240 periods of mildly varying efficiency."""
    config = DgpConfig(
        periods=240,
        efficiency_process=EfficiencyProcess.LOG_AR1,
        efficiency_sd=0.02,
        efficiency_rho=0.9,
        vacancy_sd=0.3,
        seed=7,
    )
    return generate(config)


@pytest.fixture(scope="session")
def fitted_small(synthetic_small):
    """(estimator, base, grid, distribution) for the small synthetic panel."""
    panel = synthetic_small.panel
    estimator = fit(
        [(obs.users, obs.vacancies, obs.hires) for obs in panel],
        KernelConfig(bandwidth=0.1),
    )
    base = select_base_point(panel)
    grid = TraceGrid.spanning(panel, base, psi_count=40, lambda_count=12)
    distribution = trace_distribution(estimator, base, grid)
    return estimator, base, grid, distribution


def random_sample(seed: int, size: int = 60) -> np.ndarray:
    """(U, V, H) rows with positive, distinct values."""
    rng = np.random.default_rng(seed)
    users = 100.0 * np.exp(rng.normal(0.0, 0.3, size))
    vacancies = 80.0 * np.exp(rng.normal(0.0, 0.3, size))
    hires = np.sqrt(users * vacancies) * np.exp(rng.normal(0.0, 0.1, size))
    return np.column_stack([users, vacancies, hires])
