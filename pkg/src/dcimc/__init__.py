"""Design-space exploration and netlist generation for digital compute-in-memory macros."""

__version__ = "0.1.0"
