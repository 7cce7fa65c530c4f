"""Coarse-sensor attitude determination lab.

Synthetic microsatellite pass logs, a TRIAD baseline, a from-scratch
Conv1D attitude regressor, and an ablation harness that writes
machine-readable report tables.
"""

__version__ = "0.1.0"
