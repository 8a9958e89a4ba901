"""Exception hierarchy shared by the modeling, reformulation, and solver layers."""


class RoboptError(Exception):
    """Base class for all library errors."""


# --- modeling -------------------------------------------------------------

class ModelError(RoboptError):
    pass


class DuplicateName(ModelError):
    pass


class InvalidBounds(ModelError):
    pass


class AdaptiveStageOutOfRange(ModelError):
    pass


class WindowOutOfRange(ModelError):
    pass


class AlreadyDDU(ModelError):
    pass


class NotDDU(ModelError):
    pass


class WindowMismatch(ModelError):
    pass


class StageOutOfRange(ModelError):
    pass


class UnregisteredSymbol(ModelError):
    pass


class NonlinearExpression(ModelError):
    pass


# --- uncertainty sets -----------------------------------------------------

class UncertaintySetError(RoboptError):
    pass


class UnboundedSet(UncertaintySetError):
    pass


class EmptySet(UncertaintySetError):
    pass


# --- approximation schemes ------------------------------------------------

class ApproximationError(RoboptError):
    pass


class NeedsBoundsForBigM(ApproximationError):
    pass


class StochasticWithoutDistribution(ApproximationError):
    pass


class BreakpointOutsideSupport(ApproximationError):
    pass


class IncompatibleConfigs(ApproximationError):
    pass


class ExpectationObjectiveUnsupported(ApproximationError):
    pass


class RealAdaptiveUnsupported(ApproximationError):
    pass


class NotCoarser(ApproximationError):
    pass


# --- robustification ------------------------------------------------------

class ReformulationError(RoboptError):
    pass


class AdaptiveRemains(ReformulationError):
    pass


class MissingDualBounds(ReformulationError):
    pass


class UnboundedInteger(ReformulationError):
    pass


# --- solver backends ------------------------------------------------------

class SolverError(RoboptError):
    pass


class Infeasible(SolverError):
    pass


class Unbounded(SolverError):
    pass


class IterationLimit(SolverError):
    pass


class NodeLimit(SolverError):
    pass


class UnsupportedRows(SolverError):
    """Raised when the built-in backend is given second-order-cone rows."""


class ProcessFailure(SolverError):
    pass


class ParseFailure(SolverError):
    pass


# --- file I/O -------------------------------------------------------------

class RobIOError(RoboptError):
    pass


class RobSyntaxError(RobIOError):
    def __init__(self, message, line=None, column=None, expected=None):
        self.line = line
        self.column = column
        self.expected = expected
        if expected is not None:
            message = "%s (expected %s)" % (message, expected)
        if line is not None:
            pos = "line %d" % line
            if column is not None:
                pos += ", column %d" % column
            message = "%s: %s" % (pos, message)
        super().__init__(message)


class UnknownSection(RobIOError):
    pass


class DanglingReference(RobIOError):
    pass


class UncertainConstraintConservative(RuntimeWarning):
    """Uncertain hard constraints under finite adaptability are enforced
    over the whole set for every plan, which may be conservative."""
