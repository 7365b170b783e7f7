"""
Exception hierarchy for matchfn.

Every error carries the name of the module that raised it so the CLI can
print module-qualified messages such as ``[efficiency] ...``.
"""

from typing import Optional


class MatchFnError(Exception):
    """Base class for all library errors."""

    module: str = "matchfn"

    def __init__(self, message: str, module: Optional[str] = None):
        super().__init__(message)
        self.message = message
        if module is not None:
            self.module = module

    def __str__(self) -> str:
        return f"[{self.module}] {self.message}"


# =============================================================================
# PANEL CORE
# =============================================================================

class SchemaError(MatchFnError):
    """A required column is missing from the input."""
    module = "panel-core"


class DuplicateObservationError(MatchFnError):
    """The same (period, region) pair appears more than once."""
    module = "panel-core"

    def __init__(self, offenders: list, module: Optional[str] = None):
        self.offenders = offenders
        listed = ", ".join(f"{period}/{region or '-'}" for period, region in offenders)
        super().__init__(f"Duplicate (period, region) pairs: {listed}", module)


class EmptyInputError(MatchFnError):
    """The input has no usable data rows."""
    module = "panel-core"


class BaselineError(MatchFnError):
    """The requested baseline period is absent from the series."""
    module = "panel-core"


class NonNormalizableError(MatchFnError):
    """The baseline value is not strictly positive."""
    module = "panel-core"


# =============================================================================
# KERNEL CDF
# =============================================================================

class InsufficientDataError(MatchFnError):
    """Too few sample points to fit the estimator."""
    module = "kernel-cdf"


class DomainError(MatchFnError):
    """A sample value lies outside the domain of the coordinate transform."""
    module = "kernel-cdf"


class OutOfSupportError(MatchFnError):
    """The query has no effective kernel weight in the sample."""
    module = "kernel-cdf"


# =============================================================================
# EFFICIENCY
# =============================================================================

class TraceFailureError(MatchFnError):
    """Too many trace-grid cells fell outside the estimator support."""
    module = "efficiency"


class BasePointError(MatchFnError):
    """No usable base point could be selected."""
    module = "efficiency"


# =============================================================================
# ELASTICITY
# =============================================================================

class CollinearityError(MatchFnError):
    """The projection design matrix is rank deficient."""
    module = "elasticity"


class InsufficientWindowError(MatchFnError):
    """A projection window holds fewer than the minimum usable observations."""
    module = "elasticity"


# =============================================================================
# SYNTHETIC DGP
# =============================================================================

class GenerationError(MatchFnError):
    """The simulation produced non-finite values."""
    module = "synth-dgp"


class AlignmentError(MatchFnError):
    """Recovered series do not line up with the synthetic panel."""
    module = "synth-dgp"


# =============================================================================
# CLI / CONFIG
# =============================================================================

class ConfigError(MatchFnError, ValueError):
    """Invalid run or generator configuration."""
    module = "cli"
