"""Task and motion planning with virtual kinematic chains."""

__version__ = "0.1.0"
