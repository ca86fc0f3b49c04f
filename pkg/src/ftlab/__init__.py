"""Fluctuation theorems for correlations and coherence in system-environment processes."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ArgumentError,
    BudgetError,
    FormatError,
    FtlabError,
    NumericError,
    PreconditionError,
    SizeError,
    SupportViolation,
    ValidationError,
)
from .infomeasures import info_summary, run_scenario  # noqa: E402
from .qcore import Layout  # noqa: E402
from .qstates import DensityState, RngSpec, UnitaryGate  # noqa: E402
from .theorems import FTReport, Tolerances, verify_scenario  # noqa: E402

__all__ = [
    "ArgumentError", "BudgetError", "FormatError", "FtlabError", "NumericError",
    "PreconditionError", "SizeError", "SupportViolation", "ValidationError",
    "Layout", "DensityState", "UnitaryGate", "RngSpec",
    "run_scenario", "info_summary", "verify_scenario", "FTReport", "Tolerances",
]
