"""Figure rendering for the simulator's summary CSV outputs."""

__version__ = "0.1.0"
