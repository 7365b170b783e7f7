"""
Static SVG charts.

One line chart per figure with a facet per region. Missing values
(undefined ratios, out-of-support estimates) are NaN and render as gaps.
"""

import logging
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .writers import atomic_path  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed ids and no timestamp so reruns produce identical files.
plt.rcParams["svg.hashsalt"] = "matchfn"
SVG_METADATA = {"Date": None, "Creator": "matchfn"}


def line_chart(
    path: Path,
    frame: pd.DataFrame,
    series: Sequence[tuple[str, str]],
    title: str,
    ylabel: str = "",
    reference: Optional[float] = None,
) -> Path:
    """
    Plot columns of a long-format frame against period, one facet per region.

    Args:
        path: Output SVG path
        frame: Frame with ``period`` and ``region`` columns
        series: (column, legend label) pairs
        title: Figure title
        ylabel: Y axis label
        reference: Optional horizontal reference line (e.g. index = 1)
    """
    regions = _regions(frame)
    fig, axes = plt.subplots(
        len(regions), 1, figsize=(9, 2.8 * len(regions)), sharex=False, squeeze=False
    )

    for ax, region in zip(axes[:, 0], regions):
        rows = frame[frame["region"].isna()] if region is None else frame[frame["region"] == region]
        x = pd.PeriodIndex(rows["period"].astype(str), freq="M").to_timestamp()
        for column, label in series:
            values = pd.to_numeric(rows[column], errors="coerce").to_numpy(dtype=float)
            ax.plot(x, values, label=label, linewidth=1.2)
        if reference is not None:
            ax.axhline(reference, color="grey", linewidth=0.8, linestyle="--")
        ax.set_title(region or title, fontsize=10)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        if len(series) > 1:
            ax.legend(fontsize=8)

    fig.suptitle(title)
    fig.tight_layout()
    with atomic_path(path) as temp:
        fig.savefig(temp, format="svg", metadata=SVG_METADATA)
    plt.close(fig)

    logger.info(f"Wrote chart {path}")
    return Path(path)


def _regions(frame: pd.DataFrame) -> list[Optional[str]]:
    if frame.empty:
        return [None]
    values = frame["region"].tolist()
    named = sorted({value for value in values if isinstance(value, str)})
    has_none = any(not isinstance(value, str) for value in values)
    return ([None] if has_none else []) + named


# =============================================================================
# FIGURES
# =============================================================================

def diagnostics_charts(outdir: Path, diagnostics: pd.DataFrame, panel: pd.DataFrame) -> list[Path]:
    """Tightness, hires and finding-rate charts."""
    merged = panel.merge(diagnostics, on=["period", "region"], how="left")
    return [
        line_chart(
            outdir / "tightness.svg", merged,
            [("tightness", "V/U")], "Labor market tightness", "V/U",
        ),
        line_chart(
            outdir / "hires.svg", merged,
            [("hires", "hires"), ("users", "users"), ("vacancies", "vacancies")], "Hires, users and vacancies",
        ),
        line_chart(
            outdir / "finding_rates.svg", merged,
            [("job_finding_rate", "H/U"), ("worker_finding_rate", "H/V")], "Finding rates",
        ),
    ]


def estimation_charts(outdir: Path, efficiency: pd.DataFrame, elasticity: pd.DataFrame) -> list[Path]:
    """Efficiency index and elasticity charts."""
    efficiency = efficiency.copy()
    efficiency.loc[efficiency["support_flag"] == "out", "efficiency_index"] = np.nan
    return [
        line_chart(
            outdir / "efficiency.svg", efficiency,
            [("efficiency_index", "A (index)")], "Matching efficiency", "index", reference=1.0,
        ),
        line_chart(
            outdir / "elasticity.svg", elasticity,
            [("elasticity_au", "w.r.t. A*U"), ("elasticity_v", "w.r.t. V")], "Matching elasticity",
        ),
    ]
