"""Batch figure rendering for the thruster-control benchmark.

This package reads the CSV files written by the analysis stage and the
trajectory dumps written by the simulation harness; it never imports the
simulator.  Each renderer writes PNG and SVG and returns a structural
summary (series counts, front vertex counts, inset windows) so scripts and
tests can verify the figures without image processing.
"""

from .pareto import plot_pareto
from .trajectory import plot_trajectory

__version__ = "0.1.0"
