"""
matchfn - Nonparametric Matching Function Estimation

Recovers latent matching efficiency, the matching-function surface and
time-varying matching elasticities from (users, vacancies, hires) panels,
using only constant returns to scale and independence of vacancies and
efficiency given users. A synthetic Cobb-Douglas generator serves as the
oracle for validating the recovery.

Modules:
- config: Environment defaults and the resolved run configuration
- errors: Exception hierarchy with module-qualified messages
- models: Panel data models (dataclasses)
- ingest: CSV ingestion and serialization
- diagnostics: Market ratios and baseline normalization
- kernel_cdf: Kernel-weighted conditional CDF of hires given (users, vacancies)
- efficiency: Trace F(A | U), recover efficiency and the matching surface
- elasticity: Local linear projections and matching elasticities
- synth: Synthetic data-generating process and oracle report
- writers: Atomic CSV/JSON output
- charts: Static SVG figures
- pipeline: diagnose / estimate / simulate / validate runs
- cli: Command-line entry point
"""

__version__ = "0.1.0"

# Convenient imports
from .errors import MatchFnError
from .models import (
    MarketDiagnostics,
    NormalizedSeries,
    Panel,
    PanelObservation,
)
from .ingest import ColumnSchema, ingest_panel, serialize_panel
from .diagnostics import compute_diagnostics, normalize_to_baseline
from .kernel_cdf import (
    ConditionalCdfEstimator,
    CoordinateTransform,
    KernelConfig,
    TieRule,
    conditional_cdf,
    conditional_quantile,
    fit,
    kernel_weight,
)
from .efficiency import (
    BasePoint,
    EfficiencyDistribution,
    EfficiencySeries,
    MatchingSurface,
    SupportFlag,
    TraceGrid,
    recover_efficiency,
    recover_matching_surface,
    select_base_point,
    trace_distribution,
)
from .elasticity import (
    ElasticityEstimate,
    ProjectionFit,
    elasticity_series,
    fit_local_projection,
)
from .synth import DgpConfig, EfficiencyProcess, SyntheticPanel, generate, oracle_report
from .config import RunConfig
from .pipeline import run_diagnose, run_estimate, run_simulate, run_validate

__all__ = [
    "MatchFnError",
    # Models
    "MarketDiagnostics",
    "NormalizedSeries",
    "Panel",
    "PanelObservation",
    # Ingestion and diagnostics
    "ColumnSchema",
    "ingest_panel",
    "serialize_panel",
    "compute_diagnostics",
    "normalize_to_baseline",
    # Kernel CDF
    "ConditionalCdfEstimator",
    "CoordinateTransform",
    "KernelConfig",
    "TieRule",
    "conditional_cdf",
    "conditional_quantile",
    "fit",
    "kernel_weight",
    # Efficiency
    "BasePoint",
    "EfficiencyDistribution",
    "EfficiencySeries",
    "MatchingSurface",
    "SupportFlag",
    "TraceGrid",
    "recover_efficiency",
    "recover_matching_surface",
    "select_base_point",
    "trace_distribution",
    # Elasticity
    "ElasticityEstimate",
    "ProjectionFit",
    "elasticity_series",
    "fit_local_projection",
    # Synthetic data
    "DgpConfig",
    "EfficiencyProcess",
    "SyntheticPanel",
    "generate",
    "oracle_report",
    # Runs
    "RunConfig",
    "run_diagnose",
    "run_estimate",
    "run_simulate",
    "run_validate",
]
