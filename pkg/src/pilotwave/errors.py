"""
Exception hierarchy. ValidationError subclasses map to exit code 2,
NumericalError subclasses to exit code 3.
"""


class PilotWaveError(Exception):
    exit_code = 1


class ValidationError(PilotWaveError):
    exit_code = 2


class NumericalError(PilotWaveError):
    exit_code = 3


class ScenarioError(ValidationError):
    """Scenario text could not be parsed or validated."""

    def __init__(self, message, key=None, line=None, column=None, suggestion=None):
        self.key = key
        self.line = line
        self.column = column
        self.suggestion = suggestion
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        hint = f"; did you mean '{suggestion}'?" if suggestion else ""
        super().__init__(f"{message}{where}{hint}")


class ConfigurationError(ValidationError):
    pass


class GridMismatchError(ValidationError):
    pass


class NormalizationError(ValidationError):
    pass


class RealityError(ValidationError):
    pass


class ToleranceError(NumericalError):
    pass


class DegeneracyError(NumericalError):
    pass


class SolverError(NumericalError):
    pass


class NodeError(NumericalError):
    def __init__(self, message, time=None, position=None):
        self.time = time
        self.position = position
        super().__init__(f"{message} at t={time}" if time is not None else message)


class LightlikeDegeneracyError(NumericalError):
    pass


class InstabilityError(NumericalError):
    pass


class InvalidTestError(NumericalError):
    pass
