"""Graph analysis and broadcast simulation for vehicular ad hoc networks."""

from .analytic import clustering_1d, clustering_2d, monte_carlo_clustering, prob_degree_above
from .exceptions import ConfigError, FitError, SimulationError, UndefinedMetricError, VanetError
from .fitting import (
    FitResult,
    GaussianModel,
    LogModel,
    PowerLawModel,
    PowerModel,
    classify_topology,
    fit_gaussian,
    fit_log,
    fit_power,
    fit_powerlaw,
)
from .graph import CommGraph, RangeModel, build_graph, components, is_link, torus_graph
from .metrics import (
    DegreeHistogram,
    GraphMetrics,
    MetricReport,
    average_shortest_path,
    connectivity_fraction,
    degree_distribution,
    metric_report,
    network_clustering,
)
from .scenario import (
    CAParams,
    HighwayConfig,
    Snapshot,
    UrbanConfig,
    generate,
    generate_highway,
    generate_urban,
    step_urban,
)
from .sim import SimConfig, run_flooding_oracle, run_once, run_simulation
from .uvcast import ProtocolParams, ROI, p_value, s_value

__version__ = "0.1.0"

__all__ = [
    "CAParams", "CommGraph", "ConfigError", "DegreeHistogram", "FitError", "FitResult",
    "GaussianModel", "GraphMetrics", "HighwayConfig", "LogModel", "MetricReport",
    "PowerLawModel", "PowerModel", "ProtocolParams", "ROI", "RangeModel", "SimConfig",
    "SimulationError", "Snapshot", "UndefinedMetricError", "UrbanConfig", "VanetError",
    "average_shortest_path", "build_graph", "classify_topology", "clustering_1d",
    "clustering_2d", "components", "connectivity_fraction", "degree_distribution",
    "fit_gaussian", "fit_log", "fit_power", "fit_powerlaw", "generate", "generate_highway",
    "generate_urban", "is_link", "metric_report", "monte_carlo_clustering", "network_clustering",
    "p_value", "prob_degree_above", "run_flooding_oracle", "run_once", "run_simulation",
    "s_value", "step_urban", "torus_graph",
]
