"""
Matching elasticities from local linear projections.

Hires are projected on efficiency-augmented users (A*U) and vacancies (V)
over a window of periods; each period's elasticities are the window
coefficients scaled by that period's own levels:

    elasticity_au = beta_au * A_t U_t / H_t
    elasticity_v  = beta_v  * V_t / H_t
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import pandas as pd
import statsmodels.api as sm

from .efficiency import EfficiencySeries, SupportFlag
from .errors import CollinearityError, InsufficientWindowError, MatchFnError
from .models import MonthLike, Panel, PanelObservation, region_sort_key, to_month

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 12
MIN_WINDOW_OBSERVATIONS = 3


@dataclass(frozen=True)
class ProjectionFit:
    """Least-squares projection of H on (A*U, V) over one window."""
    window_start: pd.Period
    window_end: pd.Period
    periods: tuple[pd.Period, ...]
    region: Optional[str]
    beta_au: float
    beta_v: float
    intercept: float = 0.0
    intercept_used: bool = False
    rss: float = 0.0
    nobs: int = 0
    interior: bool = True

    @property
    def window_id(self) -> str:
        return f"{self.region or '-'}:{self.window_start}..{self.window_end}"


@dataclass(frozen=True)
class ElasticityEstimate:
    """
    Elasticities at one period.

    ``defined`` is False when a value could not be formed (zero hires, no
    in-support efficiency, or a failed window); affected fields are NaN.
    """
    period: pd.Period
    region: Optional[str]
    elasticity_au: float
    elasticity_v: float
    beta_au: float
    beta_v: float
    window_start: Optional[pd.Period]
    window_end: Optional[pd.Period]
    interior: bool
    defined: bool = True
    fit: Optional[ProjectionFit] = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "period": str(self.period),
            "region": self.region,
            "elasticity_au": self.elasticity_au,
            "elasticity_v": self.elasticity_v,
            "beta_au": self.beta_au,
            "beta_v": self.beta_v,
            "window_start": str(self.window_start) if self.window_start is not None else None,
            "window_end": str(self.window_end) if self.window_end is not None else None,
            "interior": self.interior,
        }


def window_bounds(
    center: pd.Period,
    first: pd.Period,
    last: pd.Period,
    window_length: int,
) -> tuple[pd.Period, pd.Period, bool]:
    """
    Centered calendar window [start, end] (inclusive) around ``center``.

    A window of length L covers the months center - L//2 .. center + L - L//2 - 1
    and is truncated to [first, last]. Missing months inside the window stay
    missing; the window never widens to make up for them. ``window_length`` 0
    means the whole sample.

    Returns:
        (start, end, interior) where interior is False if truncated
    """
    if window_length == 0:
        return first, last, True

    start = center - window_length // 2
    end = start + window_length - 1
    interior = start >= first and end <= last
    return max(start, first), min(end, last), interior


def _window_rows(rows: list[PanelObservation], start: pd.Period, end: pd.Period) -> list[PanelObservation]:
    return [obs for obs in rows if start <= obs.period <= end]


# =============================================================================
# PROJECTION
# =============================================================================

def _usable(obs: PanelObservation, efficiency: dict) -> Optional[float]:
    entry = efficiency.get(obs.key)
    if entry is None or entry.support_flag == SupportFlag.OUT or not math.isfinite(entry.efficiency):
        return None
    return entry.efficiency


def _fit_rows(
    rows: list[PanelObservation],
    efficiency: dict,
    intercept: bool,
    bounds: tuple[pd.Period, pd.Period, bool],
) -> ProjectionFit:
    start, end, interior = bounds
    usable = [(obs, a) for obs in rows if (a := _usable(obs, efficiency)) is not None]
    region = rows[0].region if rows else None
    label = f"{start}..{end}"

    if len(usable) < MIN_WINDOW_OBSERVATIONS:
        raise InsufficientWindowError(
            f"Window {label} has {len(usable)} usable observations; need {MIN_WINDOW_OBSERVATIONS}"
        )

    hires = np.array([obs.hires for obs, _ in usable])
    design = np.column_stack([
        [a * obs.users for obs, a in usable],
        [obs.vacancies for obs, _ in usable],
    ])
    if intercept:
        design = sm.add_constant(design, has_constant="add")

    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise CollinearityError(f"Window {label}: regressors A*U and V are collinear")

    result = sm.OLS(hires, design).fit()
    params = np.asarray(result.params)
    if intercept:
        constant, beta_au, beta_v = params
    else:
        constant, (beta_au, beta_v) = 0.0, params
    logger.debug(f"Window {label}: beta_au={beta_au:.4g} beta_v={beta_v:.4g} n={len(usable)}")

    return ProjectionFit(
        window_start=start,
        window_end=end,
        periods=tuple(obs.period for obs, _ in usable),
        region=region,
        beta_au=float(beta_au),
        beta_v=float(beta_v),
        intercept=float(constant),
        intercept_used=intercept,
        rss=float(result.ssr),
        nobs=int(result.nobs),
        interior=interior,
    )


def fit_local_projection(
    panel: Panel,
    efficiency: EfficiencySeries,
    window_length: int = DEFAULT_WINDOW,
    center: Optional[MonthLike] = None,
    region: Optional[str] = None,
    intercept: bool = False,
) -> ProjectionFit:
    """
    Project hires on (A*U, V) over the window centered at ``center``.

    Args:
        panel: Observations (one region is used)
        efficiency: Recovered efficiency for the same observations
        window_length: Months per window; 0 fits the whole region
        center: Window center period (ignored when window_length is 0)
        region: Region to fit (defaults to the panel's first region)
        intercept: Add a constant term

    Returns:
        ProjectionFit

    Raises:
        InsufficientWindowError: fewer than 3 usable observations
        CollinearityError: rank-deficient design
    """
    if window_length < 0:
        raise ValueError(f"window_length must be >= 0, got {window_length}")

    if region is None and panel.regions:
        region = panel.regions[0]
    rows = list(panel.for_region(region))

    if not rows:
        raise InsufficientWindowError(f"Region {region or '-'} has no observations")
    first, last = rows[0].period, rows[-1].period

    if window_length == 0:
        period = first
    else:
        if center is None:
            raise ValueError("center is required for a rolling window")
        period = to_month(center)
        if not any(obs.period == period for obs in rows):
            raise InsufficientWindowError(f"Center period {period} is not in region {region or '-'}")

    bounds = window_bounds(period, first, last, window_length)
    return _fit_rows(_window_rows(rows, bounds[0], bounds[1]), efficiency.lookup(), intercept, bounds)


def elasticity_series(
    panel: Panel,
    efficiency: EfficiencySeries,
    window_length: int = DEFAULT_WINDOW,
    intercept: bool = False,
) -> list[ElasticityEstimate]:
    """
    Rolling elasticities for every observation, region by region.

    Windows span calendar months around each period and are truncated at the
    region's first and last months; gaps in the panel shrink a window's sample.
    Windows that cannot be fitted are logged and their periods reported as
    undefined.
    """
    if window_length < 0:
        raise ValueError(f"window_length must be >= 0, got {window_length}")

    lookup = efficiency.lookup()
    estimates = []
    failed = 0

    for region in sorted(panel.regions, key=region_sort_key):
        rows = list(panel.for_region(region))
        fits: dict[tuple[pd.Period, pd.Period], Union[ProjectionFit, MatchFnError]] = {}

        for obs in rows:
            bounds = window_bounds(obs.period, rows[0].period, rows[-1].period, window_length)
            start, end, interior = bounds
            if (start, end) not in fits:
                try:
                    fits[(start, end)] = _fit_rows(_window_rows(rows, start, end), lookup, intercept, bounds)
                except MatchFnError as e:
                    logger.warning(f"Elasticity window failed: {e}")
                    fits[(start, end)] = e
                    failed += 1

            fit = fits[(start, end)]
            if isinstance(fit, ProjectionFit):
                estimates.append(_estimate(obs, lookup, fit))
            else:
                estimates.append(_undefined(obs, start, end, interior))

    undefined = sum(not estimate.defined for estimate in estimates)
    if undefined:
        logger.warning(f"{undefined} elasticity estimates undefined ({failed} windows failed)")
    logger.info(f"Computed {len(estimates)} elasticity estimates (window={window_length})")
    return estimates


def _estimate(obs: PanelObservation, lookup: dict, fit: ProjectionFit) -> ElasticityEstimate:
    efficiency = _usable(obs, lookup)
    defined = obs.hires > 0 and efficiency is not None

    if obs.hires > 0:
        elasticity_v = fit.beta_v * obs.vacancies / obs.hires
        elasticity_au = (
            fit.beta_au * efficiency * obs.users / obs.hires
            if efficiency is not None else math.nan
        )
    else:
        elasticity_au = elasticity_v = math.nan

    return ElasticityEstimate(
        period=obs.period,
        region=obs.region,
        elasticity_au=elasticity_au,
        elasticity_v=elasticity_v,
        beta_au=fit.beta_au,
        beta_v=fit.beta_v,
        window_start=fit.window_start,
        window_end=fit.window_end,
        interior=fit.interior,
        defined=defined,
        fit=fit,
    )


def _undefined(obs: PanelObservation, start: pd.Period, end: pd.Period, interior: bool) -> ElasticityEstimate:
    return ElasticityEstimate(
        period=obs.period,
        region=obs.region,
        elasticity_au=math.nan,
        elasticity_v=math.nan,
        beta_au=math.nan,
        beta_v=math.nan,
        window_start=start,
        window_end=end,
        interior=interior,
        defined=False,
    )


def elasticity_frame(estimates: list[ElasticityEstimate]) -> pd.DataFrame:
    return pd.DataFrame(
        [estimate.to_dict() for estimate in estimates],
        columns=[
            "period", "region", "elasticity_au", "elasticity_v",
            "beta_au", "beta_v", "window_start", "window_end", "interior",
        ],
    )
