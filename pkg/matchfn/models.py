"""
Data models for matchfn.

Defines the panel-core types every other module consumes: one observation
per period and region, the validated panel, market diagnostics and
baseline-normalized series. All types are frozen after construction.
"""

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

import pandas as pd

from .errors import DuplicateObservationError

MONTH_PATTERN = re.compile(r"^\s*(\d{4})-(\d{2})\s*$")

MonthLike = Union[str, pd.Period]


def to_month(value: MonthLike) -> pd.Period:
    """
    Coerce a ``YYYY-MM`` string (or an existing period) to a monthly period.

    Raises:
        ValueError: if the value is not an ISO year-month
    """
    if isinstance(value, pd.Period):
        return value.asfreq("M")

    match = MONTH_PATTERN.match(str(value))
    if not match:
        raise ValueError(f"Invalid period {value!r} (expected YYYY-MM)")

    year, month = int(match.group(1)), int(match.group(2))
    if not 1 <= month <= 12:
        raise ValueError(f"Invalid month in period {value!r}")
    return pd.Period(year=year, month=month, freq="M")


def region_sort_key(region: Optional[str]) -> tuple:
    """Sort national aggregates (no region) ahead of named regions."""
    return (region is not None, region or "")


# =============================================================================
# OBSERVATIONS
# =============================================================================

@dataclass(frozen=True)
class PanelObservation:
    """
    One period x region record of users, vacancies and hires.

    Counts are non-negative reals. Hires may exceed users: on spot platforms
    one worker can fill several vacancies in a month.
    """
    period: pd.Period
    users: float
    vacancies: float
    hires: float
    region: Optional[str] = None

    def __post_init__(self):
        for name in ("users", "vacancies", "hires"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value!r}")

    @property
    def key(self) -> tuple:
        return (self.period, self.region)

    def to_dict(self) -> dict:
        return {
            "period": str(self.period),
            "region": self.region,
            "users": self.users,
            "vacancies": self.vacancies,
            "hires": self.hires,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PanelObservation":
        return cls(
            period=to_month(data["period"]),
            region=data.get("region") or None,
            users=float(data["users"]),
            vacancies=float(data["vacancies"]),
            hires=float(data["hires"]),
        )


@dataclass(frozen=True)
class RowError:
    """A source row rejected during ingestion."""
    line: int
    reason: str


@dataclass(frozen=True)
class PanelGap:
    """A month missing inside a region's observed span."""
    period: pd.Period
    region: Optional[str] = None


# =============================================================================
# PANEL
# =============================================================================

@dataclass(frozen=True)
class Panel:
    """
    Validated collection of observations, sorted by (region, period).

    Missing months inside a region's span are listed in ``gaps`` and never
    interpolated; rows rejected at ingestion are kept in ``rejected``.

    Usage:
        panel = Panel.build(observations, label="platform")
        tokyo = panel.for_region("Tokyo")
    """
    observations: tuple[PanelObservation, ...]
    label: str = ""
    gaps: tuple[PanelGap, ...] = ()
    rejected: tuple[RowError, ...] = field(default=(), compare=False)

    @classmethod
    def build(
        cls,
        observations: Iterable[PanelObservation],
        label: str = "",
        rejected: Iterable[RowError] = (),
    ) -> "Panel":
        """
        Sort observations, reject duplicate keys and record gaps.

        Raises:
            DuplicateObservationError: if a (period, region) pair repeats
        """
        observations = list(observations)

        counts = Counter(obs.key for obs in observations)
        offenders = sorted(
            (key for key, count in counts.items() if count > 1),
            key=lambda k: (region_sort_key(k[1]), k[0]),
        )
        if offenders:
            raise DuplicateObservationError(offenders)

        ordered = tuple(sorted(
            observations,
            key=lambda obs: (region_sort_key(obs.region), obs.period),
        ))
        return cls(
            observations=ordered,
            label=label,
            gaps=tuple(_find_gaps(ordered)),
            rejected=tuple(rejected),
        )

    def __len__(self) -> int:
        return len(self.observations)

    def __iter__(self) -> Iterator[PanelObservation]:
        return iter(self.observations)

    @property
    def regions(self) -> list[Optional[str]]:
        """Distinct regions in sort order."""
        return sorted({obs.region for obs in self.observations}, key=region_sort_key)

    @property
    def periods(self) -> list[pd.Period]:
        return [obs.period for obs in self.observations]

    def for_region(self, region: Optional[str]) -> "Panel":
        """Sub-panel holding a single region's observations."""
        label = f"{self.label}:{region}" if region else self.label
        return Panel(
            observations=tuple(obs for obs in self.observations if obs.region == region),
            label=label,
            gaps=tuple(gap for gap in self.gaps if gap.region == region),
        )

    def find(self, period: pd.Period, region: Optional[str] = None) -> Optional[PanelObservation]:
        """Look up one observation by key."""
        for obs in self.observations:
            if obs.period == period and obs.region == region:
                return obs
        return None

    def scaled(self, factor: float) -> "Panel":
        """Copy with users, vacancies and hires all multiplied by ``factor``."""
        return Panel(
            observations=tuple(
                PanelObservation(
                    period=obs.period,
                    region=obs.region,
                    users=obs.users * factor,
                    vacancies=obs.vacancies * factor,
                    hires=obs.hires * factor,
                )
                for obs in self.observations
            ),
            label=self.label,
            gaps=self.gaps,
        )

    def to_frame(self) -> pd.DataFrame:
        """Long-format frame with the panel-core CSV columns."""
        return pd.DataFrame(
            [obs.to_dict() for obs in self.observations],
            columns=["period", "region", "users", "vacancies", "hires"],
        )


def _find_gaps(ordered: tuple[PanelObservation, ...]) -> list[PanelGap]:
    """Months missing between consecutive observations of the same region."""
    gaps = []
    for previous, current in zip(ordered, ordered[1:]):
        if previous.region != current.region:
            continue
        missing = (current.period - previous.period).n - 1
        for step in range(1, missing + 1):
            gaps.append(PanelGap(period=previous.period + step, region=current.region))
    return gaps


# =============================================================================
# DERIVED SERIES
# =============================================================================

@dataclass(frozen=True)
class MarketDiagnostics:
    """
    Market ratios for one observation.

    A ratio is ``None`` (undefined) when its denominator is zero.
    """
    period: pd.Period
    region: Optional[str]
    tightness: Optional[float]
    job_finding_rate: Optional[float]
    worker_finding_rate: Optional[float]

    def to_dict(self) -> dict:
        return {
            "period": str(self.period),
            "region": self.region,
            "tightness": self.tightness,
            "job_finding_rate": self.job_finding_rate,
            "worker_finding_rate": self.worker_finding_rate,
        }


@dataclass(frozen=True)
class NormalizedSeries:
    """Series divided by its value at ``baseline_period``."""
    baseline_period: pd.Period
    values: tuple[tuple[pd.Period, float], ...]

    def as_dict(self) -> dict[pd.Period, float]:
        return dict(self.values)

    def index_at(self, period: pd.Period) -> float:
        return self.as_dict()[period]
