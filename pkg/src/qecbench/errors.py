"""Exception types raised across the package."""


class QecBenchError(Exception):
    """Base class for all package errors."""


class ParameterError(QecBenchError, ValueError):
    """A numeric parameter lies outside its admissible range."""


class ShapeError(QecBenchError, ValueError):
    """Operator or state dimensions do not agree."""


class ConfigurationError(QecBenchError):
    """Device, noise model or experiment configuration is incomplete or invalid."""


class DeviceFileError(ConfigurationError):
    """A device or experiment document could not be parsed or validated.

    ``problems`` holds every individual diagnostic so callers can report them
    all at once.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class CircuitError(QecBenchError, ValueError):
    """Malformed circuit or instruction."""


class PlacementError(QecBenchError):
    """A gate cannot be placed on the requested physical qubits."""


class RoutingError(PlacementError):
    """The router cannot satisfy a connectivity requirement."""


class CapacityError(QecBenchError):
    """The circuit needs more qubits than the device offers."""


class UnsupportedGateError(QecBenchError):
    """No decomposition chain exists from a gate to the device's native set."""


class ExecutionError(QecBenchError):
    """The simulator cannot execute the circuit as given."""
