"""Exception types shared across the simulator and the application layers."""


class ConfigError(ValueError):
    """Invalid configuration: bad shapes, incompatible parameters, etc."""


class ProtocolError(RuntimeError):
    """Malformed traffic observed at runtime (unknown slot, bad framing)."""


class CapacityError(ConfigError):
    """A requested structure exceeds a declared resource budget."""


class SimulationStalled(RuntimeError):
    """The simulation reached a state where pending work can never progress."""
