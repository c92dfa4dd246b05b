"""Carbon-aware design-space exploration for computing hardware."""

__version__ = "0.1.0"
