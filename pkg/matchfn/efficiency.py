"""
Latent matching efficiency recovery.

Pipeline:
    1. select_base_point   - anchor observation where A is normalized to 1
    2. trace_distribution  - F(psi * A0 | lambda * U0) on a (psi, lambda) grid,
                             read off the kernel CDF through the CRS scaling
                             identity, then monotonized in psi
    3. recover_efficiency  - invert F at each observation's G(H_t | U_t, V_t)
    4. recover_matching_surface - m(a, u, v) = G^-1(F(a | u) | u, v)

The trace cell (psi, lambda) queries G(psi*lambda*H0 | lambda*U0, psi*lambda*V0):
scaling A by psi and U by lambda scales the matches by psi*lambda, so the same
factor applied to V keeps the query on the CRS ray through the base point.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union

import numpy as np
import pandas as pd
from sklearn.isotonic import isotonic_regression

from .errors import BasePointError, OutOfSupportError, TraceFailureError
from .kernel_cdf import ConditionalCdfEstimator, TieRule
from .models import MonthLike, Panel, to_month

logger = logging.getLogger(__name__)

DEFAULT_PSI_COUNT = 200
DEFAULT_LAMBDA_COUNT = 60
DEFAULT_SCALING_RANGE = (0.05, 20.0)

# Share of out-of-support trace cells above which tracing fails.
MAX_OUT_OF_SUPPORT_SHARE = 0.5

# Central share of the observed scalings a data-fitted grid must cover.
SPAN_COVERAGE = 0.99


class SupportFlag(str, Enum):
    """Whether a recovered value came from inside the traced grid."""
    IN = "in"
    CLAMPED = "clamped"   # probability or users ratio clamped to a grid edge
    OUT = "out"           # no usable trace column or query outside the data


class BasePolicy(str, Enum):
    MEDIAN = "median"
    PERIOD = "period"


# =============================================================================
# BASE POINT
# =============================================================================

@dataclass(frozen=True)
class BasePoint:
    """Anchor observation; efficiency is 1 here by construction."""
    hires: float
    users: float
    vacancies: float
    period: Optional[pd.Period] = None
    region: Optional[str] = None

    def __post_init__(self):
        for name in ("hires", "users", "vacancies"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise BasePointError(f"Base point {name} must be positive, got {value!r}")

    def to_dict(self) -> dict:
        return {
            "period": str(self.period) if self.period is not None else None,
            "region": self.region,
            "hires": self.hires,
            "users": self.users,
            "vacancies": self.vacancies,
        }


def select_base_point(
    panel: Panel,
    policy: Union[str, BasePolicy, pd.Period] = BasePolicy.MEDIAN,
    region: Optional[str] = None,
) -> BasePoint:
    """
    Choose the anchor observation.

    Args:
        panel: Panel to choose from (observations with any zero count are skipped)
        policy: "median", or a period (``YYYY-MM`` string or pandas Period)
        region: Region of the named period, when the panel holds several

    Returns:
        BasePoint

    Raises:
        BasePointError: no all-positive observation, or named period absent
    """
    eligible = [
        obs for obs in panel
        if obs.users > 0 and obs.vacancies > 0 and obs.hires > 0
    ]
    if not eligible:
        raise BasePointError("No observation has positive users, vacancies and hires")

    if policy == BasePolicy.MEDIAN or policy == BasePolicy.MEDIAN.value:
        chosen = _median_observation(eligible)
    else:
        period = to_month(policy)
        matches = [obs for obs in eligible if obs.period == period]
        if region is not None:
            matches = [obs for obs in matches if obs.region == region]
        if not matches:
            raise BasePointError(f"Base period {period} is not a usable observation")
        chosen = matches[0]

    logger.info(
        f"Base point {chosen.period}/{chosen.region or '-'}: "
        f"U={chosen.users:g} V={chosen.vacancies:g} H={chosen.hires:g}"
    )
    return BasePoint(
        hires=chosen.hires,
        users=chosen.users,
        vacancies=chosen.vacancies,
        period=chosen.period,
        region=chosen.region,
    )


def _median_observation(observations: list):
    """Observation closest to the component-wise median in range-scaled log space."""
    coords = np.log([[obs.users, obs.vacancies] for obs in observations])
    low = coords.min(axis=0)
    span = coords.max(axis=0) - low
    span[span == 0] = 1.0
    scaled = (coords - low) / span

    median = np.median(scaled, axis=0)
    distances = np.sum((scaled - median) ** 2, axis=1)
    return observations[int(np.argmin(distances))]


# =============================================================================
# TRACE GRID
# =============================================================================

def geometric_axis(low: float, high: float, count: int) -> np.ndarray:
    """
    Geometric sequence over roughly [low, high] that holds 1 exactly.

    The ratio is fixed by (high/low)^(1/(count-1)); the sequence is then
    shifted so one entry sits on 1, which moves the ends by under half a step.
    """
    if count < 2:
        raise ValueError(f"Grid axis needs at least 2 points, got {count}")
    if not (0 < low <= 1 <= high) or low == high:
        raise ValueError(f"Grid range must satisfy 0 < low <= 1 <= high, got [{low}, {high}]")

    step = math.log(high / low) / (count - 1)
    unit_index = int(round(-math.log(low) / step))
    unit_index = min(max(unit_index, 0), count - 1)
    return np.exp((np.arange(count) - unit_index) * step)


@dataclass(frozen=True, eq=False)
class TraceGrid:
    """Scalings of (A, H, V) along psi and of U along lambda."""
    psi_values: np.ndarray
    lambda_values: np.ndarray

    @property
    def resolution(self) -> tuple[int, int]:
        return (len(self.psi_values), len(self.lambda_values))

    @property
    def psi_range(self) -> tuple[float, float]:
        return (float(self.psi_values[0]), float(self.psi_values[-1]))

    @property
    def lambda_range(self) -> tuple[float, float]:
        return (float(self.lambda_values[0]), float(self.lambda_values[-1]))

    @classmethod
    def build(
        cls,
        psi_count: int = DEFAULT_PSI_COUNT,
        lambda_count: int = DEFAULT_LAMBDA_COUNT,
        psi_range: tuple[float, float] = DEFAULT_SCALING_RANGE,
        lambda_range: tuple[float, float] = DEFAULT_SCALING_RANGE,
    ) -> "TraceGrid":
        """Geometric grid over fixed ranges."""
        return cls(
            psi_values=geometric_axis(psi_range[0], psi_range[1], psi_count),
            lambda_values=geometric_axis(lambda_range[0], lambda_range[1], lambda_count),
        )

    @classmethod
    def spanning(
        cls,
        panel: Panel,
        base: BasePoint,
        psi_count: int = DEFAULT_PSI_COUNT,
        lambda_count: int = DEFAULT_LAMBDA_COUNT,
        psi_cap: tuple[float, float] = DEFAULT_SCALING_RANGE,
        lambda_cap: tuple[float, float] = DEFAULT_SCALING_RANGE,
    ) -> "TraceGrid":
        """
        Geometric grid fitted to where the data lies, within the caps.

        lambda spans the observed U_t / U0. psi spans the central
        ``SPAN_COVERAGE`` of relative tightness (V_t/U_t) / (V0/U0), which is
        the psi at which a trace query lands on an observed (U, V) pair.
        """
        rows = [obs for obs in panel if obs.users > 0 and obs.vacancies > 0]
        if not rows:
            return cls.build(psi_count, lambda_count, psi_cap, lambda_cap)

        users = np.array([obs.users for obs in rows]) / base.users
        tightness = np.array([obs.vacancies / obs.users for obs in rows]) / (base.vacancies / base.users)
        tail = (1.0 - SPAN_COVERAGE) / 2.0

        psi_range = _clip_range(np.quantile(tightness, [tail, 1.0 - tail]), psi_cap)
        lambda_range = _clip_range((users.min(), users.max()), lambda_cap)
        logger.debug(f"Data-fitted grid: psi {psi_range}, lambda {lambda_range}")
        return cls.build(psi_count, lambda_count, psi_range, lambda_range)

    def to_dict(self) -> dict:
        return {
            "psi_count": len(self.psi_values),
            "lambda_count": len(self.lambda_values),
            "psi_range": list(self.psi_range),
            "lambda_range": list(self.lambda_range),
        }


def _clip_range(bounds, cap: tuple[float, float]) -> tuple[float, float]:
    low = min(max(float(bounds[0]), cap[0]), 1.0)
    high = max(min(float(bounds[1]), cap[1]), 1.0)
    if low == high:
        low, high = cap
    return (low, high)


# =============================================================================
# TRACED DISTRIBUTION
# =============================================================================

@dataclass(frozen=True, eq=False)
class EfficiencyDistribution:
    """
    F(psi * A0 | lambda * U0) on a TraceGrid.

    Matrices are indexed [psi, lambda]. Out-of-support cells are NaN in both
    ``raw`` and ``values``; ``values`` is non-decreasing down each column.
    """
    grid: TraceGrid
    raw: np.ndarray
    values: np.ndarray
    in_support: np.ndarray
    monotonized: bool = True

    @property
    def out_of_support_share(self) -> float:
        return float(1.0 - self.in_support.mean())

    def to_frame(self) -> pd.DataFrame:
        """Long-format table of every cell."""
        psi, lam = np.meshgrid(self.grid.psi_values, self.grid.lambda_values, indexing="ij")
        return pd.DataFrame({
            "psi": psi.ravel(),
            "lambda": lam.ravel(),
            "raw": self.raw.ravel(),
            "value": self.values.ravel(),
            "in_support": self.in_support.ravel(),
        })


def trace_distribution(
    estimator: ConditionalCdfEstimator,
    base: BasePoint,
    grid: TraceGrid,
) -> EfficiencyDistribution:
    """
    Trace F(A | U) over the grid and monotonize each lambda column.

    Raises:
        BasePointError: the base point has no kernel support
        TraceFailureError: more than half the cells are out of support
    """
    if not estimator.in_support(base.users, base.vacancies):
        raise BasePointError(
            f"Base point (U={base.users:g}, V={base.vacancies:g}) is outside the estimator support"
        )

    psi = grid.psi_values[:, None]
    lam = grid.lambda_values[None, :]
    scale = psi * lam

    raw, in_support = estimator.cdf_batch(scale * base.hires, lam * base.users, scale * base.vacancies)

    share = 1.0 - in_support.mean()
    if share > MAX_OUT_OF_SUPPORT_SHARE:
        raise TraceFailureError(
            f"{share:.0%} of trace cells are outside the data support; "
            f"narrow the psi/lambda range (currently psi {grid.psi_range}, lambda {grid.lambda_range})"
        )
    if share > 0:
        logger.warning(f"{share:.1%} of trace cells are out of support")

    values = np.full_like(raw, np.nan)
    for column in range(raw.shape[1]):
        mask = in_support[:, column]
        if mask.sum() == 0:
            logger.debug(f"lambda column {column} has no support")
            continue
        values[mask, column] = isotonic_regression(
            raw[mask, column], y_min=0.0, y_max=1.0, increasing=True
        )

    logger.info(f"Traced {raw.size} cells ({grid.resolution[0]} psi x {grid.resolution[1]} lambda)")
    return EfficiencyDistribution(
        grid=grid,
        raw=_readonly(raw),
        values=_readonly(values),
        in_support=_readonly(in_support),
        monotonized=True,
    )


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


# =============================================================================
# COLUMN INTERPOLATION AND INVERSION
# =============================================================================

# Observed periods are ranked with ties counted half: each period carries its
# own kernel weight at its own hires, which the traced cells never do.
OBSERVATION_TIES = TieRule.MID


@dataclass(frozen=True, eq=False)
class _Column:
    """
    F(psi | lambda) at one users ratio as strictly increasing knots.

    Probabilities outside [floor, ceiling] lie beyond the range attained by
    at least one of the columns it was blended from.
    """
    levels: np.ndarray
    psi: np.ndarray
    floor: float
    ceiling: float
    lambda_clamped: bool


def _strict_knots(psi: np.ndarray, probabilities: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Collapse flat runs of a non-decreasing column into single knots.

    The leading run keeps its last psi, the trailing run its first psi and
    interior runs their geometric midpoint.
    """
    levels, first, counts = np.unique(probabilities, return_index=True, return_counts=True)
    last = first + counts - 1
    knots = np.sqrt(psi[first] * psi[last])
    if len(levels) > 1:
        knots[0] = psi[last[0]]
        knots[-1] = psi[first[-1]]
    return levels, knots


def _grid_column(distribution: EfficiencyDistribution, index: int) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Knots of one traced column; None when it is unsupported or flat."""
    mask = distribution.in_support[:, index]
    if mask.sum() < 2:
        return None
    levels, knots = _strict_knots(distribution.grid.psi_values[mask], distribution.values[mask, index])
    if len(levels) < 2:
        return None
    return levels, knots


def _column_at(distribution: EfficiencyDistribution, users_ratio: float) -> Optional[_Column]:
    """
    Interpolate the distribution at lambda = users_ratio.

    Neighbouring columns are averaged quantile by quantile: at every level
    either column attains, log psi is blended with the geometric lambda
    weight. Falls back to the nearest usable column.
    """
    if not (users_ratio > 0 and math.isfinite(users_ratio)):
        return None

    log_lambda = np.log(distribution.grid.lambda_values)
    target = math.log(users_ratio)
    clamped = not (log_lambda[0] <= target <= log_lambda[-1])

    position = float(np.interp(target, log_lambda, np.arange(len(log_lambda))))
    low = int(math.floor(position))
    high = min(low + 1, len(log_lambda) - 1)
    weight = position - low

    lower = _grid_column(distribution, low)
    upper = _grid_column(distribution, high) if weight > 0 else None
    if lower is not None and upper is not None:
        levels = np.union1d(lower[0], upper[0])
        log_psi = (
            (1.0 - weight) * np.log(np.interp(levels, *lower))
            + weight * np.log(np.interp(levels, *upper))
        )
        return _Column(
            levels=levels,
            psi=np.exp(log_psi),
            floor=max(lower[0][0], upper[0][0]),
            ceiling=min(lower[0][-1], upper[0][-1]),
            lambda_clamped=clamped,
        )

    nearest, other = (high, low) if weight >= 0.5 else (low, high)
    for index in (nearest, other):
        knots = _grid_column(distribution, index)
        if knots is not None:
            levels, psi = knots
            return _Column(levels, psi, levels[0], levels[-1], clamped)
    return None


def _invert(column: _Column, probability: float) -> tuple[float, bool]:
    """psi with F(psi) = probability; clamps to the attained range."""
    psi = float(np.interp(probability, column.levels, column.psi))
    return psi, not (column.floor <= probability <= column.ceiling)


def _forward(column: _Column, psi: float) -> tuple[float, bool]:
    """F(psi) on the knots ``_invert`` uses, constant beyond them."""
    probability = float(np.interp(psi, column.psi, column.levels))
    edge = not (column.psi[0] <= psi <= column.psi[-1]) or not (column.floor <= probability <= column.ceiling)
    return probability, edge


def _base_scale(estimator: ConditionalCdfEstimator, distribution: EfficiencyDistribution, base: BasePoint) -> float:
    """Inverted psi at the base point; recovered efficiency is divided by it."""
    probability, supported = estimator.cdf_batch(
        np.array([base.hires]), np.array([base.users]), np.array([base.vacancies]), OBSERVATION_TIES
    )
    column = _column_at(distribution, base.users / base.users)
    if not supported[0] or column is None:
        raise BasePointError("Trace has no usable column at the base point")

    psi, _ = _invert(column, float(probability[0]))
    if not (psi > 0 and math.isfinite(psi)):
        raise BasePointError(f"Base point inverts to psi={psi!r}")
    return psi


# =============================================================================
# EFFICIENCY SERIES
# =============================================================================

@dataclass(frozen=True)
class EfficiencyEntry:
    period: pd.Period
    region: Optional[str]
    efficiency: float
    probability: float
    support_flag: SupportFlag

    def to_dict(self) -> dict:
        return {
            "period": str(self.period),
            "region": self.region,
            "efficiency": self.efficiency,
            "probability": self.probability,
            "support_flag": self.support_flag.value,
        }


@dataclass(frozen=True)
class EfficiencySeries:
    """
    Recovered A_t, relative to A = 1 at the base point.

    ``base_scale`` is the raw inverted psi at the base point; the trace
    distribution is read at psi = a * base_scale to map a back to the grid.
    """
    entries: tuple[EfficiencyEntry, ...]
    base: BasePoint
    base_scale: float = 1.0
    grid: Optional[TraceGrid] = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[EfficiencyEntry]:
        return iter(self.entries)

    def lookup(self) -> dict[tuple, EfficiencyEntry]:
        """Entries keyed by (period, region)."""
        return {(entry.period, entry.region): entry for entry in self.entries}

    def value_at(self, period: MonthLike, region: Optional[str] = None) -> float:
        return self.lookup()[(to_month(period), region)].efficiency

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [entry.to_dict() for entry in self.entries],
            columns=["period", "region", "efficiency", "probability", "support_flag"],
        )


def recover_efficiency(
    estimator: ConditionalCdfEstimator,
    distribution: EfficiencyDistribution,
    panel: Panel,
    base: BasePoint,
) -> EfficiencySeries:
    """
    Invert the traced distribution at every observation.

    For each observation p_t = G(H_t | U_t, V_t) is taken as its
    mid-distribution rank, and the lambda = U_t/U0 column is interpolated and
    inverted at p_t. Out-of-range values are clamped and flagged, never
    dropped; periods whose columns are all flat or unsupported are ``out``.

    Returns:
        EfficiencySeries in panel order, exactly 1 at the base observation
    """
    base_scale = _base_scale(estimator, distribution, base)

    observations = list(panel)
    hires = np.array([obs.hires for obs in observations], dtype=float)
    users = np.array([obs.users for obs in observations], dtype=float)
    vacancies = np.array([obs.vacancies for obs in observations], dtype=float)
    probabilities, supported = estimator.cdf_batch(hires, users, vacancies, OBSERVATION_TIES)

    entries = []
    for index, obs in enumerate(observations):
        probability = float(probabilities[index])
        column = _column_at(distribution, obs.users / base.users) if supported[index] else None

        if column is None:
            entries.append(EfficiencyEntry(obs.period, obs.region, math.nan, probability, SupportFlag.OUT))
            continue

        psi, clamped = _invert(column, probability)
        flag = SupportFlag.CLAMPED if clamped or column.lambda_clamped else SupportFlag.IN
        entries.append(EfficiencyEntry(obs.period, obs.region, psi / base_scale, probability, flag))

    counts = {flag: sum(entry.support_flag == flag for entry in entries) for flag in SupportFlag}
    if counts[SupportFlag.CLAMPED] or counts[SupportFlag.OUT]:
        logger.warning(
            f"Efficiency: {counts[SupportFlag.CLAMPED]} clamped, "
            f"{counts[SupportFlag.OUT]} out of support of {len(entries)}"
        )
    logger.info(f"Recovered efficiency for {len(entries)} observations")

    return EfficiencySeries(
        entries=tuple(entries),
        base=base,
        base_scale=base_scale,
        grid=distribution.grid,
    )


# =============================================================================
# MATCHING SURFACE
# =============================================================================

@dataclass(frozen=True)
class SurfaceEvaluation:
    hires: float
    support_flag: SupportFlag
    probability: float = math.nan


@dataclass(frozen=True, eq=False)
class MatchingSurface:
    """
    Nonparametric matching function m(a, u, v) = G^-1(F(a | u) | u, v).

    ``a`` is on the scale of the recovered series (1 at the base point), so
    evaluating at a recovered A_t and its own (U_t, V_t) returns H_t.

    Usage:
        surface = recover_matching_surface(estimator, distribution, base)
        hires = surface(1.2, 150.0, 90.0)
    """
    estimator: ConditionalCdfEstimator
    distribution: EfficiencyDistribution
    base: BasePoint
    base_scale: float

    def evaluate(self, a: float, u: float, v: float) -> SurfaceEvaluation:
        """
        Predicted hires with a support flag.

        Efficiencies beyond the traced column are flagged ``clamped``. Queries
        without kernel support are evaluated at the nearest sample (U, V) and
        flagged ``out``.
        """
        column = _column_at(self.distribution, u / self.base.users) if u > 0 else None
        if column is None or not a > 0:
            return SurfaceEvaluation(math.nan, SupportFlag.OUT)

        probability, edge = _forward(column, a * self.base_scale)
        flag = SupportFlag.CLAMPED if edge or column.lambda_clamped else SupportFlag.IN

        try:
            hires = self.estimator.conditional_quantile(probability, u, v, OBSERVATION_TIES)
        except OutOfSupportError:
            nearest = self.estimator.nearest_point(u, v)
            if nearest is None:
                return SurfaceEvaluation(math.nan, SupportFlag.OUT, probability)
            hires = self.estimator.conditional_quantile(probability, *nearest, OBSERVATION_TIES)
            flag = SupportFlag.OUT

        return SurfaceEvaluation(max(hires, 0.0), flag, probability)

    def __call__(self, a: float, u: float, v: float) -> float:
        return self.evaluate(a, u, v).hires

    def scale_ratio(self, a: float, u: float, v: float, factor: float) -> float:
        """m(a, c*u, c*v) / (c * m(a, u, v)); 1 under constant returns to scale."""
        return self(a, factor * u, factor * v) / (factor * self(a, u, v))

    @property
    def provenance(self) -> dict:
        return {
            "sample_size": len(self.estimator),
            "kernel": self.estimator.config.to_dict(),
            "grid": self.distribution.grid.to_dict(),
            "base": self.base.to_dict(),
        }


def recover_matching_surface(
    estimator: ConditionalCdfEstimator,
    distribution: EfficiencyDistribution,
    base: BasePoint,
) -> MatchingSurface:
    """Build the matching-function evaluator from a traced distribution."""
    return MatchingSurface(
        estimator=estimator,
        distribution=distribution,
        base=base,
        base_scale=_base_scale(estimator, distribution, base),
    )
