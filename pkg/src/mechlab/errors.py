"""Exception types raised across mechlab."""


class MechlabError(Exception):
    """Base class for all library errors."""


class ParameterError(MechlabError, ValueError):
    """Invalid instance or operation parameters."""


class ResourceError(MechlabError):
    """An enumeration or LP would exceed a configured cap."""

    def __init__(self, message, size=None, cap=None):
        super().__init__(message)
        self.size = size
        self.cap = cap


class AxiomViolation(MechlabError):
    """A valuation fails monotonicity, subadditivity, no-externalities or Lipschitz checks."""


class InvariantViolation(MechlabError):
    """An internal postcondition failed. Signals a bug, not bad data."""


class SolverError(MechlabError):
    """The exact LP solver could not produce a certified optimum."""


class DegenerateInstanceError(MechlabError):
    """The instance has no meaningful core/tail split (e.g. all values zero)."""


class EmptyEventError(MechlabError):
    """Conditioning on an event of probability zero."""


class DominanceError(MechlabError):
    """A coupling fails pointwise dominance v+(S) >= v(S)."""


class PreconditionError(MechlabError):
    """An input mechanism or pair does not satisfy an operation's precondition."""
