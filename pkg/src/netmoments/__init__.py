"""Hierarchical eigen-moment measurement of weighted complete networks."""
from .network import WeightedNetwork, uniform_network, validate_network
from .eigen import EigenSummary, ec_moments, eigenvector_centrality, frobenius_radius, spectral_radius, summarize
from .synthesis import GridSpec, MetricTarget, default_grid, grid_targets, synthesize
from .abm import Scenario, SimOutcome, SimParams, run_scenario

__version__ = "0.1.0"
