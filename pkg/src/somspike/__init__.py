"""Training kit for the soft self-organizing layer + spiking head classifier."""

__version__ = "0.1.0"
