"""
Main pipeline module for matchfn.

Orchestrates the four CLI runs:
1. diagnose  - ingest a panel, write market ratios and trend charts
2. estimate  - per region: fit the kernel CDF, trace F(A | U), recover
               efficiency and elasticities, write long-format CSVs and charts
3. simulate  - write a synthetic panel with its truth table
4. validate  - simulate, estimate and score the recovery against the truth

Every run writes ``resolved_config.json`` next to its outputs.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import pandas as pd

from . import charts
from .config import RESOLVED_CONFIG_NAME, RunConfig, get_runtime_config
from .diagnostics import RATIO_COLUMNS, compute_diagnostics, diagnostics_frame, normalize_to_baseline
from .efficiency import (
    BasePoint,
    EfficiencyDistribution,
    EfficiencySeries,
    SupportFlag,
    TraceGrid,
    recover_efficiency,
    select_base_point,
    trace_distribution,
)
from .elasticity import ElasticityEstimate, elasticity_frame, elasticity_series
from .errors import BaselineError, EmptyInputError, NonNormalizableError
from .ingest import ingest_panel
from .kernel_cdf import KernelConfig, fit
from .models import Panel, region_sort_key, to_month
from .synth import SyntheticPanel, generate, generate_regions, oracle_report
from .writers import write_frame, write_json, write_panel_csv, write_text

logger = logging.getLogger(__name__)

# Regions shorter than this are estimated with a warning.
MIN_REGION_OBSERVATIONS = 24

EFFICIENCY_COLUMNS = ["period", "region", "efficiency", "efficiency_index", "support_flag"]
ELASTICITY_COLUMNS = [
    "period", "region", "elasticity_au", "elasticity_v",
    "beta_au", "beta_v", "window_start", "window_end",
]


@dataclass
class RunResult:
    """Outcome of one CLI run."""
    subcommand: str
    outputs: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    passed: Optional[bool] = None


@dataclass
class RegionEstimate:
    """Everything estimated for one region."""
    region: Optional[str]
    base: BasePoint
    distribution: EfficiencyDistribution
    efficiency: EfficiencySeries
    elasticities: list[ElasticityEstimate]


# =============================================================================
# PIPELINE FUNCTIONS
# =============================================================================

def load_panel(config: RunConfig) -> Panel:
    """Ingest the input panel and apply the region filter."""
    panel = ingest_panel(config.input, schema=config.column_schema(), label=Path(config.input).stem)
    if not config.regions:
        return panel

    wanted = set(config.regions)
    kept = [obs for obs in panel if obs.region in wanted]
    if not kept:
        raise EmptyInputError(f"No rows for region(s) {', '.join(sorted(wanted))}")
    logger.info(f"Region filter kept {len(kept)}/{len(panel)} rows")
    return Panel.build(kept, label=panel.label)


def estimate_region(panel: Panel, config: RunConfig, region: Optional[str] = None) -> RegionEstimate:
    """
    Run the full estimation on a single-region panel.

    Rows with zero users or vacancies are left out of the kernel sample
    (they cannot be placed in log space) but still receive an efficiency
    entry, flagged out of support.
    """
    label = region or "all"
    if len(panel) < MIN_REGION_OBSERVATIONS:
        logger.warning(
            f"Region {label} has {len(panel)} observations (< {MIN_REGION_OBSERVATIONS}); estimates will be noisy"
        )

    sample = [obs for obs in panel if obs.users > 0 and obs.vacancies > 0]
    if len(sample) < len(panel):
        logger.warning(
            f"Region {label}: {len(panel) - len(sample)} rows with zero users or vacancies left out of the fit"
        )

    estimator = fit(
        [(obs.users, obs.vacancies, obs.hires) for obs in sample],
        KernelConfig(bandwidth=config.bandwidth, coordinate_transform=config.transform),
    )
    base = select_base_point(Panel.build(sample), config.base_point, region=region)

    if config.grid_span == "data":
        grid = TraceGrid.spanning(
            panel, base, config.grid_psi, config.grid_lambda, config.psi_range, config.lambda_range
        )
    else:
        grid = TraceGrid.build(config.grid_psi, config.grid_lambda, config.psi_range, config.lambda_range)

    distribution = trace_distribution(estimator, base, grid)
    efficiency = recover_efficiency(estimator, distribution, panel, base)
    elasticities = elasticity_series(panel, efficiency, config.window, intercept=config.intercept)

    logger.info(f"Region {label}: estimated {len(efficiency)} periods")
    return RegionEstimate(region, base, distribution, efficiency, elasticities)


def estimate_all(panel: Panel, config: RunConfig) -> list[RegionEstimate]:
    """Estimate each region independently, in parallel up to MATCHFN_THREADS."""
    regions = sorted(panel.regions, key=region_sort_key)
    threads = min(get_runtime_config().threads, len(regions))

    def run(region):
        return estimate_region(panel.for_region(region), config, region)

    if threads <= 1:
        return [run(region) for region in regions]

    logger.info(f"Estimating {len(regions)} regions on {threads} threads")
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(run, regions))


def efficiency_table(estimates: list[RegionEstimate], baseline: Optional[str] = None) -> pd.DataFrame:
    """
    Long-format efficiency table with the baseline-normalized index.

    Without an explicit baseline each region is indexed to its first period
    with a defined efficiency. A region where the baseline is missing or not
    positive keeps its efficiency but gets an empty index.
    """
    rows = []
    for estimate in estimates:
        entries = list(estimate.efficiency)
        if baseline is not None:
            base_period = to_month(baseline)
        else:
            defined = [e.period for e in entries if math.isfinite(e.efficiency) and e.efficiency > 0]
            base_period = defined[0] if defined else entries[0].period

        try:
            index = normalize_to_baseline(
                [(entry.period, entry.efficiency) for entry in entries], base_period
            ).as_dict()
        except (BaselineError, NonNormalizableError) as e:
            logger.warning(f"Region {estimate.region or '-'}: {e}; efficiency_index left empty")
            index = {}
        for entry in entries:
            rows.append({
                "period": str(entry.period),
                "region": entry.region,
                "efficiency": entry.efficiency,
                "efficiency_index": index.get(entry.period, math.nan),
                "support_flag": entry.support_flag.value,
            })
    return pd.DataFrame(rows, columns=EFFICIENCY_COLUMNS)


def elasticity_table(estimates: list[RegionEstimate]) -> pd.DataFrame:
    frames = [elasticity_frame(estimate.elasticities) for estimate in estimates]
    frame = pd.concat(frames, ignore_index=True) if frames else elasticity_frame([])
    return frame[ELASTICITY_COLUMNS]


def _finish(result: RunResult, config: RunConfig) -> RunResult:
    result.outputs.append(write_json(config.output_dir / RESOLVED_CONFIG_NAME, config.to_dict()))
    return result


# =============================================================================
# RUNS
# =============================================================================

def run_diagnose(config: RunConfig) -> RunResult:
    """Write diagnostics.csv and the tightness, hires and finding-rate charts."""
    panel = load_panel(config)
    records = compute_diagnostics(panel)
    frame = diagnostics_frame(records)

    result = RunResult("diagnose")
    result.outputs.append(write_frame(config.output_dir / "diagnostics.csv", frame))
    if config.charts:
        result.outputs.extend(charts.diagnostics_charts(config.output_dir, frame, panel.to_frame()))

    undefined = int(frame[list(RATIO_COLUMNS)].isna().any(axis=1).sum())
    result.summary = {
        "observations": len(panel),
        "regions": len(panel.regions),
        "rejected_rows": len(panel.rejected),
        "gaps": len(panel.gaps),
        "undefined_ratios": undefined,
    }
    return _finish(result, config)


def run_estimate(config: RunConfig) -> RunResult:
    """Estimate efficiency and elasticities for every region and write the results."""
    start = time.monotonic()
    panel = load_panel(config)
    estimates = estimate_all(panel, config)

    efficiency = efficiency_table(estimates, config.baseline)
    elasticity = elasticity_table(estimates)

    result = RunResult("estimate")
    result.outputs.append(write_frame(config.output_dir / "efficiency.csv", efficiency))
    result.outputs.append(write_frame(config.output_dir / "elasticity.csv", elasticity))
    if config.charts:
        result.outputs.extend(charts.estimation_charts(config.output_dir, efficiency, elasticity))

    result.summary = {
        "observations": len(panel),
        "regions": len(estimates),
        "base_points": [estimate.base.to_dict() for estimate in estimates],
        "out_of_support": int((efficiency["support_flag"] == SupportFlag.OUT.value).sum()),
        "clamped": int((efficiency["support_flag"] == SupportFlag.CLAMPED.value).sum()),
        "duration_seconds": round(time.monotonic() - start, 3),
    }
    logger.info(f"Estimate complete: {result.summary}")
    return _finish(result, config)


def simulate(config: RunConfig) -> SyntheticPanel:
    dgp = config.dgp_config()
    if config.regions:
        return generate_regions(dgp, config.regions)
    return generate(dgp)


def run_simulate(config: RunConfig) -> RunResult:
    """Write panel.csv, truth.csv and the generator config echo."""
    synthetic = simulate(config)

    result = RunResult("simulate")
    result.outputs.append(write_panel_csv(config.output_dir / "panel.csv", synthetic.panel))
    result.outputs.append(write_frame(config.output_dir / "truth.csv", synthetic.truth_frame()))
    result.outputs.append(write_json(config.output_dir / "dgp_config.json", synthetic.config.to_dict()))
    result.summary = {"periods": synthetic.config.periods, "rows": len(synthetic.panel)}
    return _finish(result, config)


def run_validate(config: RunConfig) -> RunResult:
    """Simulate, estimate and score against the truth; ``passed`` carries the verdict."""
    start = time.monotonic()
    synthetic = generate(config.dgp_config())
    estimate = estimate_region(synthetic.panel, config)
    report = oracle_report(synthetic, estimate.efficiency, estimate.elasticities)

    result = RunResult("validate", passed=report.passed)
    result.outputs.append(write_json(config.output_dir / "validation.json", report.to_dict()))
    result.outputs.append(write_text(config.output_dir / "validation.txt", report.to_text() + "\n"))
    result.outputs.append(write_frame(config.output_dir / "efficiency.csv", efficiency_table([estimate])))
    result.outputs.append(write_frame(config.output_dir / "elasticity.csv", elasticity_table([estimate])))

    result.summary = {
        **report.to_dict(),
        "duration_seconds": round(time.monotonic() - start, 3),
    }
    logger.info(f"Validation {'passed' if report.passed else 'failed'}")
    return _finish(result, config)


RUNS = {
    "diagnose": run_diagnose,
    "estimate": run_estimate,
    "simulate": run_simulate,
    "validate": run_validate,
}


def run(config: RunConfig) -> RunResult:
    """Dispatch a validated RunConfig to its run function."""
    return RUNS[config.subcommand](config.validate())
