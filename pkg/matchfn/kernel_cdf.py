"""
Kernel-weighted conditional CDF of hires given (users, vacancies).

The estimator averages the indicator 1(H_t < h) over all sample points,
weighting each by a bivariate normal kernel of its distance from the query
in a rescaled (U, V) coordinate space. Weights are normalized to sum to one
so the result is a proper CDF and can be inverted.

Usage:
    estimator = fit(sample, KernelConfig(bandwidth=0.01))
    p = estimator.conditional_cdf(h=120.0, u=150.0, v=90.0)
    h = estimator.conditional_quantile(p, u=150.0, v=90.0)
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError, OutOfSupportError

logger = logging.getLogger(__name__)

# Queries evaluated per block in batch calls (bounds the weight matrix size).
QUERY_BLOCK = 512


class CoordinateTransform(str, Enum):
    """Space in which the bandwidth is applied."""
    LOG_RANGE = "log-range"   # log, then scale each axis to [0, 1]
    RANGE = "range"           # scale raw counts to [0, 1]
    IDENTITY = "identity"     # raw counts


class TieRule(str, Enum):
    """How sample points with hires equal to the query count toward the CDF."""
    STRICT = "strict"   # 1(H_t < h): ties fall left of the step
    MID = "mid"         # ties count half, the mid-distribution rank


@dataclass(frozen=True)
class KernelConfig:
    """
    Kernel settings.

    The defaults reproduce a bivariate normal kernel with bandwidth 0.01,
    i.e. 1% of the log-range on each axis.
    """
    bandwidth: float = 0.01
    coordinate_transform: CoordinateTransform = CoordinateTransform.LOG_RANGE
    min_effective_weight: float = 1e-12

    def __post_init__(self):
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth!r}")
        if not self.min_effective_weight >= 0:
            raise ValueError("min_effective_weight must be non-negative")
        object.__setattr__(
            self, "coordinate_transform", CoordinateTransform(self.coordinate_transform)
        )

    def to_dict(self) -> dict:
        return {
            "bandwidth": self.bandwidth,
            "coordinate_transform": self.coordinate_transform.value,
            "min_effective_weight": self.min_effective_weight,
        }


@dataclass(frozen=True)
class TransformState:
    """Frozen per-axis rescaling fitted on the sample's (U, V) coordinates."""
    kind: CoordinateTransform
    offsets: tuple[float, float]
    scales: tuple[float, float]

    @classmethod
    def fit(cls, users: np.ndarray, vacancies: np.ndarray, kind: CoordinateTransform) -> "TransformState":
        if kind == CoordinateTransform.IDENTITY:
            return cls(kind, (0.0, 0.0), (1.0, 1.0))

        if kind == CoordinateTransform.LOG_RANGE:
            users, vacancies = np.log(users), np.log(vacancies)

        offsets, scales = [], []
        for axis in (users, vacancies):
            low, high = float(axis.min()), float(axis.max())
            offsets.append(low)
            # Degenerate axis (all points equal): keep unit scale.
            scales.append(high - low if high > low else 1.0)
        return cls(kind, tuple(offsets), tuple(scales))

    def apply(self, users, vacancies) -> tuple[np.ndarray, np.ndarray]:
        """Map raw (U, V) to kernel coordinates; invalid points map to NaN."""
        users = np.asarray(users, dtype=float)
        vacancies = np.asarray(vacancies, dtype=float)

        if self.kind == CoordinateTransform.LOG_RANGE:
            with np.errstate(divide="ignore", invalid="ignore"):
                users = np.where(users > 0, np.log(np.where(users > 0, users, 1.0)), np.nan)
                vacancies = np.where(vacancies > 0, np.log(np.where(vacancies > 0, vacancies, 1.0)), np.nan)

        x = (users - self.offsets[0]) / self.scales[0]
        y = (vacancies - self.offsets[1]) / self.scales[1]
        return x, y

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "offsets": list(self.offsets), "scales": list(self.scales)}


# =============================================================================
# ESTIMATOR
# =============================================================================

class ConditionalCdfEstimator:
    """
    Fitted kernel estimator of G(H | U, V).

    The sample is stored sorted by hires so that the CDF at any h is a
    prefix sum of kernel weights. Instances are immutable; all queries are
    pure and may run concurrently.
    """

    def __init__(self, sample: np.ndarray, config: KernelConfig, transform_state: TransformState):
        order = np.argsort(sample[:, 2], kind="stable")

        self.config = config
        self.transform_state = transform_state
        self._sample = _frozen(sample)
        self._order = _frozen(order)
        self._hires = _frozen(sample[order, 2])
        x, y = transform_state.apply(sample[order, 0], sample[order, 1])
        self._x = _frozen(x)
        self._y = _frozen(y)

    @property
    def sample(self) -> np.ndarray:
        """Sample as an (n, 3) array of (U, V, H) in input order."""
        return self._sample

    def __len__(self) -> int:
        return len(self._sample)

    # -------------------------------------------------------------------------
    # Kernel weights
    # -------------------------------------------------------------------------

    def kernel_weight(self, query: Sequence[float], sample_point: Sequence[float]) -> float:
        """
        Bivariate normal kernel value between a query and a sample point.

        The kernel is scaled so its mode equals 1 (the normalizing constant
        cancels once weights are normalized). Values below
        ``min_effective_weight`` are truncated to zero.
        """
        qx, qy = self.transform_state.apply([query[0]], [query[1]])
        sx, sy = self.transform_state.apply([sample_point[0]], [sample_point[1]])
        weights = self._kernel(qx - sx, qy - sy)
        return float(weights[0])

    def _kernel(self, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
        h = self.config.bandwidth
        with np.errstate(invalid="ignore", over="ignore"):
            weights = np.exp(-0.5 * ((dx / h) ** 2 + (dy / h) ** 2))
        weights = np.nan_to_num(weights, nan=0.0)
        weights[weights < self.config.min_effective_weight] = 0.0
        return weights

    def _weight_block(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Unnormalized weights, shape (queries, sample) in hires order."""
        qx, qy = self.transform_state.apply(u, v)
        return self._kernel(qx[:, None] - self._x[None, :], qy[:, None] - self._y[None, :])

    def weights(self, u: float, v: float, normalize: bool = True) -> np.ndarray:
        """
        Kernel weights of every sample point at a query, in input order.

        Raises:
            OutOfSupportError: if normalizing and the total weight is below threshold
        """
        raw = self._weight_block(np.array([u], dtype=float), np.array([v], dtype=float))[0]
        weights = np.empty_like(raw)
        weights[self._order] = raw
        if not normalize:
            return weights

        total = np.cumsum(raw)[-1]
        self._require_support(total, u, v)
        return weights / total

    def total_weight(self, u: float, v: float) -> float:
        """Sum of unnormalized kernel weights at a query."""
        raw = self._weight_block(np.array([u], dtype=float), np.array([v], dtype=float))
        return float(np.cumsum(raw, axis=1)[0, -1])

    def in_support(self, u: float, v: float) -> bool:
        return self.total_weight(u, v) > self.config.min_effective_weight

    def nearest_point(self, u: float, v: float) -> Optional[tuple[float, float]]:
        """(U, V) of the sample point closest to a query in kernel coordinates."""
        qx, qy = self.transform_state.apply([u], [v])
        distance = (self._x - qx[0]) ** 2 + (self._y - qy[0]) ** 2
        if not np.any(np.isfinite(distance)):
            return None
        index = self._order[int(np.nanargmin(distance))]
        return float(self._sample[index, 0]), float(self._sample[index, 1])

    def _require_support(self, total: float, u: float, v: float) -> None:
        if not total > self.config.min_effective_weight:
            raise OutOfSupportError(
                f"Query (u={u:g}, v={v:g}) has total kernel weight {total:.3g}; too far from the data"
            )

    # -------------------------------------------------------------------------
    # CDF and quantile
    # -------------------------------------------------------------------------

    def cdf_batch(self, h, u, v, ties: TieRule = TieRule.STRICT) -> tuple[np.ndarray, np.ndarray]:
        """
        Evaluate the conditional CDF at many (h, u, v) queries.

        Out-of-support queries yield NaN instead of raising. With
        ``TieRule.MID`` sample points whose hires equal h count half.

        Returns:
            (values, in_support) arrays broadcast to the query shape
        """
        ties = TieRule(ties)
        h, u, v = np.broadcast_arrays(
            np.asarray(h, dtype=float), np.asarray(u, dtype=float), np.asarray(v, dtype=float)
        )
        shape = h.shape
        h, u, v = h.ravel(), u.ravel(), v.ravel()

        values = np.full(h.size, np.nan)
        in_support = np.zeros(h.size, dtype=bool)
        ranks = np.searchsorted(self._hires, h, side="left")
        upper = np.searchsorted(self._hires, h, side="right")

        for start in range(0, h.size, QUERY_BLOCK):
            block = slice(start, start + QUERY_BLOCK)
            cumulative = np.cumsum(self._weight_block(u[block], v[block]), axis=1)
            below, total = _mass_below(cumulative, ranks[block])
            if ties == TieRule.MID:
                below = below + 0.5 * (_mass_below(cumulative, upper[block])[0] - below)
            ok = total > self.config.min_effective_weight
            with np.errstate(invalid="ignore", divide="ignore"):
                values[block] = np.where(ok, below / total, np.nan)
            in_support[block] = ok

        return values.reshape(shape), in_support.reshape(shape)

    def conditional_cdf(self, h: float, u: float, v: float, ties: TieRule = TieRule.STRICT) -> float:
        """
        Weighted share of sample points with hires strictly below ``h``.

        Raises:
            OutOfSupportError: if the query has no effective kernel weight
        """
        values, in_support = self.cdf_batch(h, u, v, ties)
        if not in_support:
            self._require_support(0.0, u, v)
        return float(values)

    def conditional_quantile(self, p: float, u: float, v: float, ties: TieRule = TieRule.STRICT) -> float:
        """
        Generalized inverse of the conditional CDF at (u, v).

        Knots sit at the distinct hires of the effective sample, each carrying
        the CDF value at that point under the same tie rule; the inverse
        interpolates linearly between knots and returns the minimum or
        maximum effective hires beyond the end knots.

        Raises:
            ValueError: if p is outside [0, 1]
            OutOfSupportError: if the query has no effective kernel weight
        """
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {p!r}")

        knots_p, knots_h = self._quantile_knots(u, v, TieRule(ties))
        if p <= knots_p[0]:
            return float(knots_h[0])
        if p >= knots_p[-1]:
            return float(knots_h[-1])
        return float(np.interp(p, knots_p, knots_h))

    def _quantile_knots(self, u: float, v: float, ties: TieRule) -> tuple[np.ndarray, np.ndarray]:
        weights = self._weight_block(np.array([u], dtype=float), np.array([v], dtype=float))
        cumulative = np.cumsum(weights, axis=1)
        self._require_support(cumulative[0, -1], u, v)

        effective = np.unique(self._hires[weights[0] > 0])
        rows = np.repeat(cumulative, len(effective), axis=0)
        below, total = _mass_below(rows, np.searchsorted(self._hires, effective, side="left"))
        if ties == TieRule.MID:
            at_or_below, _ = _mass_below(rows, np.searchsorted(self._hires, effective, side="right"))
            below = below + 0.5 * (at_or_below - below)
        knots_p = below / total

        # Keep strictly increasing knots (tiny weights can vanish in rounding).
        keep = np.concatenate(([True], np.diff(knots_p) > 0))
        return knots_p[keep], effective[keep]


def _mass_below(cumulative: np.ndarray, ranks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weight strictly below each rank and total weight, row by row."""
    rows = np.arange(cumulative.shape[0])
    total = cumulative[:, -1]
    below = np.where(ranks > 0, cumulative[rows, np.maximum(ranks - 1, 0)], 0.0)
    return below, total


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


# =============================================================================
# CONVENIENCE FUNCTIONS
# =============================================================================

def fit(sample: Iterable[Sequence[float]], config: KernelConfig = KernelConfig()) -> ConditionalCdfEstimator:
    """
    Fit the conditional CDF estimator on (U, V, H) points.

    Args:
        sample: Iterable of (users, vacancies, hires) triples
        config: Kernel settings

    Returns:
        Fitted ConditionalCdfEstimator

    Raises:
        InsufficientDataError: fewer than 2 points
        DomainError: non-finite values, negative counts, or zero/negative
            U or V under the log transform
    """
    array = np.asarray(list(sample), dtype=float)
    if array.ndim != 2 or array.shape[0] < 2:
        raise InsufficientDataError(
            f"Need at least 2 sample points, got {0 if array.ndim != 2 else array.shape[0]}"
        )
    if array.shape[1] != 3:
        raise DomainError(f"Sample rows must be (U, V, H) triples, got width {array.shape[1]}")

    for row, (users, vacancies, hires) in enumerate(array):
        if not np.all(np.isfinite((users, vacancies, hires))) or min(users, vacancies, hires) < 0:
            raise DomainError(f"Row {row} has invalid values (U={users}, V={vacancies}, H={hires})")
        if config.coordinate_transform == CoordinateTransform.LOG_RANGE and (users <= 0 or vacancies <= 0):
            raise DomainError(
                f"Row {row} has U={users}, V={vacancies}; the log transform needs U, V > 0"
            )

    state = TransformState.fit(array[:, 0], array[:, 1], config.coordinate_transform)
    logger.debug(f"Fitted kernel CDF on {len(array)} points, transform {state.to_dict()}")
    return ConditionalCdfEstimator(array, config, state)


def kernel_weight(estimator: ConditionalCdfEstimator, query: Sequence[float], sample_point: Sequence[float]) -> float:
    """Kernel weight between a query and a sample point."""
    return estimator.kernel_weight(query, sample_point)


def conditional_cdf(
    estimator: ConditionalCdfEstimator, h: float, u: float, v: float, ties: TieRule = TieRule.STRICT
) -> float:
    """Conditional CDF of hires at h given (u, v)."""
    return estimator.conditional_cdf(h, u, v, ties)


def conditional_quantile(
    estimator: ConditionalCdfEstimator, p: float, u: float, v: float, ties: TieRule = TieRule.STRICT
) -> float:
    """Conditional quantile of hires at probability p given (u, v)."""
    return estimator.conditional_quantile(p, u, v, ties)
