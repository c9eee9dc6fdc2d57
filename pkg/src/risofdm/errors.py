"""Exception types shared across the simulator."""


class SimulatorError(Exception):
    """Base class for all errors raised by this package."""


class InvalidScenarioError(SimulatorError, ValueError):
    """A scenario parameter is outside its physical range."""


class DegenerateGeometryError(SimulatorError, ValueError):
    """Node positions coincide, so angles and delays are undefined."""


class InfeasibleScenarioError(SimulatorError, ValueError):
    """The delay spread needs more taps than there are subcarriers."""


class MetricError(SimulatorError, ValueError):
    """A metric is undefined or unmeasurable for the given inputs."""
