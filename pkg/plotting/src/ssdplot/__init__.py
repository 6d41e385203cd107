"""Publication-style figures from ssd-sim run directories."""

__version__ = "0.1.0"
