"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`GradHydError`.
The two intermediate classes map onto CLI exit codes: :class:`ConfigError` (2)
and :class:`DataError` (3).
"""


class GradHydError(Exception):
    """Base class for library errors."""


class ConfigError(GradHydError):
    """Invalid configuration or argument combination."""


class DataError(GradHydError):
    """Invalid or inconsistent input data."""


# -- time series ------------------------------------------------------------

class LengthMismatch(DataError):
    pass


class NonFinite(DataError):
    pass


class NegativeDriver(DataError):
    pass


class BadHeader(DataError):
    pass


class BadRow(DataError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyData(DataError):
    pass


# -- models / solver --------------------------------------------------------

class OracleFailure(GradHydError):
    """Finite-difference reference could not be formed (non-finite values)."""


class NonFiniteResult(GradHydError):
    """Model dynamics produced NaN/Inf; indicates a bug in a model kernel."""


class SolverError(GradHydError):
    """Base class for integration failures."""


class StepSizeUnderflow(SolverError):
    pass


class MaxStepsExceeded(SolverError):
    pass


class NonFiniteState(SolverError):
    pass


# -- transforms / losses / optimizers --------------------------------------

class OnBoundary(GradHydError):
    pass


class ShapeMismatch(GradHydError):
    pass


class NotSPD(ConfigError):
    pass


class DegenerateObservations(DataError):
    pass


class DegenerateSimulation(GradHydError):
    pass


class ZeroScale(DataError):
    pass


class NonFiniteObjective(GradHydError):
    pass


class SingularNormalEquations(GradHydError):
    pass


class NonFiniteEvaluation(GradHydError):
    pass
