"""
Exception hierarchy for the risk toolkit.
Every error carries the exit code the CLI reports for it.
"""

from typing import Any, Dict, Optional


class AlphaRiskError(Exception):
    """Base error. Subclasses pick the CLI exit code."""
    exit_code = 2

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DomainError(AlphaRiskError, ValueError):
    """Input outside the domain of the formula (usage error)."""
    exit_code = 1


class SolverError(AlphaRiskError):
    """Root finder could not bracket or converge."""

    def __init__(self, detail: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.diagnostics = diagnostics or {}


class QuadratureError(AlphaRiskError):
    """Adaptive quadrature missed its tolerance."""

    def __init__(self, detail: str, achieved: float, target: float):
        super().__init__(f"{detail} (achieved {achieved:.3e}, target {target:.3e})")
        self.achieved = achieved
        self.target = target


class TheoremInapplicableError(AlphaRiskError):
    """Standing assumptions of the general dominance result fail (e.g. epsilon <= 0)."""


class VerificationError(AlphaRiskError):
    """One or more acceptance checks failed."""
    exit_code = 3

    def __init__(self, failures: list[str]):
        super().__init__(f"{len(failures)} check(s) failed: {', '.join(failures)}")
        self.failures = failures
