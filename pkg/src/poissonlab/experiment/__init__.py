"""Campaign orchestration, empirical bound checks and the command line interface."""

from .analysis import error_budget, gap_statistics, minami_check, spacing_statistics, wegner_check
from .campaign import ExperimentSummary, run_campaign, summarize, verify_run
from .config import ExperimentConfig

__all__ = ["ExperimentConfig", "ExperimentSummary", "error_budget", "gap_statistics",
           "minami_check", "run_campaign", "spacing_statistics", "summarize", "verify_run",
           "wegner_check"]
