"""Exception hierarchy shared by all modules."""


class LeafElectError(Exception):
    """Base class. ``code`` is a stable machine-readable identifier."""

    code = "error"


class ParameterError(LeafElectError, ValueError):
    code = "bad_parameter"


class UndefinedComparisonError(LeafElectError, ValueError):
    code = "undefined_comparison"


class TreeError(LeafElectError, ValueError):
    """Invalid tree input. Subclasses name the offending element."""

    code = "invalid_tree"


class TreeSyntaxError(TreeError):
    code = "bad_syntax"


class CycleError(TreeError):
    code = "cycle"


class DisconnectedError(TreeError):
    code = "disconnected"


class DuplicateEdgeError(TreeError):
    code = "duplicate_edge"


class SelfLoopError(TreeError):
    code = "self_loop"


class NegativeWeightError(TreeError):
    code = "negative_weight"


class UnknownNodeError(TreeError):
    code = "unknown_node"


class SchemeError(LeafElectError, ValueError):
    """A g-rule or scheme produced an invalid value (e.g. non-integer weight)."""

    code = "scheme"


class InconsistentModelError(LeafElectError, ValueError):
    code = "inconsistent_model"


class SimulationError(LeafElectError, RuntimeError):
    """Raised by Monte Carlo runs; carries the failing trial index."""

    code = "simulation"

    def __init__(self, message, trial=None):
        super().__init__(message)
        self.trial = trial
