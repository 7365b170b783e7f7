"""
Ingestion module for matchfn.

Maps tabular (CSV) sources into the canonical Panel. Column names are
configurable through a ColumnSchema; rows that fail parsing or the
non-negativity rules are collected into the panel's error report instead of
aborting the load.
"""

import io
import logging
import math
import re
from dataclasses import dataclass, asdict
from os import PathLike
from typing import Optional, TextIO, Union

import pandas as pd

from .errors import EmptyInputError, SchemaError
from .models import Panel, PanelObservation, RowError, to_month

logger = logging.getLogger(__name__)

Source = Union[str, PathLike, TextIO]

# First data row sits on line 2 (line 1 is the header).
FIRST_DATA_LINE = 2


@dataclass(frozen=True)
class ColumnSchema:
    """Maps panel fields to source column names."""
    period: str = "period"
    region: str = "region"
    users: str = "users"
    vacancies: str = "vacancies"
    hires: str = "hires"

    @property
    def required(self) -> list[str]:
        return [self.period, self.users, self.vacancies, self.hires]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ColumnSchema":
        defaults = cls()
        return cls(**{key: data.get(key, getattr(defaults, key)) for key in asdict(defaults)})


# =============================================================================
# INGESTOR CLASS
# =============================================================================

class PanelIngestor:
    """
    Parses raw rows into validated PanelObservation objects.

    Usage:
        ingestor = PanelIngestor(ColumnSchema(users="seekers"))
        panel = ingestor.ingest("platform.csv")
    """

    def __init__(self, schema: Optional[ColumnSchema] = None):
        self.schema = schema or ColumnSchema()

    def ingest(self, source: Source, label: str = "") -> Panel:
        """
        Read, validate and sort a panel.

        Args:
            source: Path or text stream holding UTF-8 CSV with a header row
            label: Free-form dataset name

        Returns:
            Validated Panel (rejected rows in ``panel.rejected``)

        Raises:
            EmptyInputError: no data rows, or no row survived validation
            SchemaError: a required column is missing
            DuplicateObservationError: repeated (period, region) pairs
        """
        frame = self._read(source)
        self._check_columns(frame)

        if frame.empty:
            raise EmptyInputError("Input has a header but no data rows")

        observations = []
        rejected = []
        has_region = self.schema.region in frame.columns

        for offset, row in enumerate(frame.to_dict(orient="records")):
            line = FIRST_DATA_LINE + offset
            try:
                observations.append(self._parse_row(row, has_region))
            except ValueError as e:
                logger.warning(f"Rejected line {line}: {e}")
                rejected.append(RowError(line=line, reason=str(e)))

        if not observations:
            raise EmptyInputError(f"No valid rows ({len(rejected)} rejected)")

        panel = Panel.build(observations, label=label, rejected=rejected)

        logger.info(f"Ingested {len(panel)}/{len(frame)} rows into panel '{label}'")
        if panel.gaps:
            logger.warning(f"Panel '{label}' has {len(panel.gaps)} missing months")
        return panel

    def _read(self, source: Source) -> pd.DataFrame:
        try:
            return pd.read_csv(
                source,
                dtype=str,
                keep_default_na=False,
                encoding="utf-8",
                skipinitialspace=True,
            )
        except pd.errors.EmptyDataError:
            raise EmptyInputError("Input is empty (no header row)")
        except UnicodeDecodeError as e:
            raise SchemaError(f"Input is not valid UTF-8: {e}")

    def _check_columns(self, frame: pd.DataFrame) -> None:
        columns = [str(c).strip() for c in frame.columns]
        frame.columns = columns
        for column in self.schema.required:
            if column not in columns:
                raise SchemaError(f"Missing required column '{column}'")

    def _parse_row(self, row: dict, has_region: bool) -> PanelObservation:
        region = None
        if has_region:
            region = self._clean_text(row[self.schema.region]) or None

        return PanelObservation(
            period=to_month(row[self.schema.period]),
            region=region,
            users=self._parse_count(row[self.schema.users], "users"),
            vacancies=self._parse_count(row[self.schema.vacancies], "vacancies"),
            hires=self._parse_count(row[self.schema.hires], "hires"),
        )

    def _clean_text(self, text: str) -> str:
        if not text:
            return ""
        return re.sub(r"\s+", " ", text).strip()

    def _parse_count(self, value, name: str) -> float:
        """Parse a non-negative real count (thousands separators allowed)."""
        cleaned = re.sub(r"[,_\s]", "", str(value))
        if not cleaned:
            raise ValueError(f"{name} is empty")
        try:
            count = float(cleaned)
        except ValueError:
            raise ValueError(f"{name} is not a number: {value!r}")
        if not math.isfinite(count) or count < 0:
            raise ValueError(f"{name} must be finite and non-negative, got {value!r}")
        return count


# =============================================================================
# CONVENIENCE FUNCTIONS
# =============================================================================

def ingest_panel(
    source: Source,
    schema: Optional[ColumnSchema] = None,
    label: str = "",
) -> Panel:
    """
    Convenience function to ingest a panel.

    Args:
        source: Path or text stream
        schema: Column-name mapping (defaults to the standard names)
        label: Dataset name

    Returns:
        Validated Panel
    """
    return PanelIngestor(schema).ingest(source, label=label)


def serialize_panel(panel: Panel) -> str:
    """Render a panel as panel-core CSV text (region left empty when absent)."""
    buffer = io.StringIO()
    panel.to_frame().to_csv(buffer, index=False)
    return buffer.getvalue()


def read_panel_text(text: str, schema: Optional[ColumnSchema] = None, label: str = "") -> Panel:
    """Ingest CSV held in memory."""
    return ingest_panel(io.StringIO(text), schema=schema, label=label)
