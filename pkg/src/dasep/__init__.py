"""Two-species type D ASEP: generator, self-duality, quantum group checks and simulation."""

__version__ = "0.1.0"
