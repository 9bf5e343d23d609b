"""Excitation-transfer dynamics in open quantum networks and their probability currents."""

__version__ = "0.1.0"

from .model import ConfigError, Model, build_generators, load_model, parse_config  # noqa: E402
from .propagator import PropagationError, Trajectory, propagate  # noqa: E402
from .currents import CurrentSeries, continuity_residual, total_currents  # noqa: E402
from .pathways import build_pathway_graph, export_graph, integrate_currents  # noqa: E402

__all__ = [
    "ConfigError", "Model", "build_generators", "load_model", "parse_config",
    "PropagationError", "Trajectory", "propagate",
    "CurrentSeries", "continuity_residual", "total_currents",
    "build_pathway_graph", "export_graph", "integrate_currents",
]
