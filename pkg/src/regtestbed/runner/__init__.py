"""End-to-end execution: simulations, experiments, reports and the CLI."""
from .experiment import ExperimentReport, PointResult, SimulationRecord, load_report, run_experiment
from .report import emit_report
from .simulation import PHASES, SimulationResult, SimulationSeeds, fund_wallets, run_simulation

__all__ = ["ExperimentReport", "PHASES", "PointResult", "SimulationRecord", "SimulationResult",
           "SimulationSeeds", "emit_report", "fund_wallets", "load_report", "run_experiment",
           "run_simulation"]
