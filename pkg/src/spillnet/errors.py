"""Exception types raised by spillnet.

Every error a user can trigger through bad input derives from
:class:`SpillnetError`; the CLI maps these to exit status 1.
"""


class SpillnetError(ValueError):
    """Base class for user/data errors."""


class PanelError(SpillnetError):
    """Malformed or unusable input panel."""


class EstimationError(SpillnetError):
    """VAR estimation failed (too few rows, rank-deficient design, ...)."""


class IdentificationError(SpillnetError):
    """Shock identification failed (not positive definite, bad user map)."""


class DecompositionError(SpillnetError):
    """Degenerate variance decomposition input."""


class SelectionError(SpillnetError):
    """Invalid sparsity-selection request."""


class TuningError(SpillnetError):
    """Invalid tuning configuration or a failed rolling window."""
