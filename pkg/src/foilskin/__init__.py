"""Closed-loop camber control of a soft foil from capacitive e-skin readings.

The package simulates the whole loop on a desk: a hydraulic foil plant, a
synthetic nine-channel capacitive skin, an MLP shape estimator trained on
aligned skin/marker logs, spline-based camber measurement and a PID
set-point regulator, plus the metrics used to score it.
"""

__version__ = "0.1.0"
