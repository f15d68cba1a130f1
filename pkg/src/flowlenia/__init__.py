"""Flow Lenia simulation, compression-complexity fitness, and rule evolution."""

__version__ = "0.1.0"
