"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes: configuration problems exit
with 4, infeasible plans with 2, and numerical domain or accuracy
failures with 3.
"""


class UavWptError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(UavWptError):
    """Invalid or unreadable configuration input."""


class PlanError(ConfigError):
    """A group plan is structurally invalid (empty group, bad indices)."""


class UnsupportedScaleError(ConfigError):
    """A brute-force verification oracle was asked for a problem size it
    cannot enumerate."""


class InfeasiblePlanError(UavWptError):
    """The mission cannot fit: required flight time exceeds the frame."""


class NumericDomainError(UavWptError):
    """A closed-form expression was evaluated outside its valid domain."""


class BracketingError(NumericDomainError):
    """A scalar root finder could not bracket a sign change."""


class AccuracyError(NumericDomainError):
    """An iterative numeric routine hit its iteration cap before reaching
    the requested tolerance."""
