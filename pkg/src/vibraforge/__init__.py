"""Control plane for daisy-chained vibrotactile actuator arrays."""

__version__ = "0.1.0"
