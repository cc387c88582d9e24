"""Edit-magnitude scoring: similarity supervision, bucketed scorer, calibration, agreement."""

__version__ = "0.1.0"
