"""
Market diagnostics and baseline normalization.

Tightness V/U, job finding rate H/U and worker finding rate H/V per
observation, plus the display step that rescales a series so its baseline
period equals one.
"""

import logging
from typing import Iterable, Optional

import pandas as pd

from .errors import BaselineError, EmptyInputError, NonNormalizableError
from .models import MarketDiagnostics, MonthLike, NormalizedSeries, Panel, to_month

logger = logging.getLogger(__name__)

RATIO_COLUMNS = ("tightness", "job_finding_rate", "worker_finding_rate")


def _ratio(numerator: float, denominator: float) -> Optional[float]:
    """Exact ratio, or None when the denominator is zero."""
    if denominator == 0:
        return None
    return numerator / denominator


def compute_diagnostics(panel: Panel) -> list[MarketDiagnostics]:
    """
    Compute market ratios for every observation.

    Args:
        panel: Non-empty panel

    Returns:
        One MarketDiagnostics per observation, in panel order

    Raises:
        EmptyInputError: if the panel is empty
    """
    if len(panel) == 0:
        raise EmptyInputError("Cannot compute diagnostics of an empty panel")

    records = []
    undefined = 0
    for obs in panel:
        record = MarketDiagnostics(
            period=obs.period,
            region=obs.region,
            tightness=_ratio(obs.vacancies, obs.users),
            job_finding_rate=_ratio(obs.hires, obs.users),
            worker_finding_rate=_ratio(obs.hires, obs.vacancies),
        )
        if None in (record.tightness, record.job_finding_rate, record.worker_finding_rate):
            undefined += 1
        records.append(record)

    if undefined:
        logger.warning(f"{undefined} observations have undefined ratios (zero users or vacancies)")
    logger.info(f"Computed diagnostics for {len(records)} observations")
    return records


def normalize_to_baseline(
    series: Iterable[tuple[MonthLike, float]],
    baseline: MonthLike,
) -> NormalizedSeries:
    """
    Divide a series by its value at the baseline period.

    Args:
        series: (period, value) pairs
        baseline: Period whose value becomes 1

    Returns:
        NormalizedSeries with index exactly 1 at the baseline

    Raises:
        BaselineError: baseline period absent from the series
        NonNormalizableError: baseline value not strictly positive
    """
    entries = [(to_month(period), float(value)) for period, value in series]
    baseline = to_month(baseline)

    base_values = [value for period, value in entries if period == baseline]
    if not base_values:
        raise BaselineError(f"Baseline period {baseline} is not in the series")

    base_value = base_values[0]
    if not base_value > 0:
        raise NonNormalizableError(
            f"Baseline value at {baseline} is {base_value}; must be positive"
        )

    return NormalizedSeries(
        baseline_period=baseline,
        values=tuple((period, value / base_value) for period, value in entries),
    )


def diagnostics_frame(records: list[MarketDiagnostics]) -> pd.DataFrame:
    """Diagnostics as a long-format frame (undefined ratios as NaN)."""
    frame = pd.DataFrame(
        [record.to_dict() for record in records],
        columns=["period", "region", *RATIO_COLUMNS],
    )
    return frame.astype({column: float for column in RATIO_COLUMNS})
