"""Monte Carlo experiments, lemma checks and result tables."""

from .engine import ExperimentPlan, PointResult, run_experiment, simulate_point
from .metrics import MetricRow, MetricsTable, mean_stderr
from .scenarios import Scenario, build_models, ray_si_correlation

__all__ = ["ExperimentPlan", "PointResult", "run_experiment", "simulate_point",
           "MetricRow", "MetricsTable", "mean_stderr", "Scenario", "build_models",
           "ray_si_correlation"]
