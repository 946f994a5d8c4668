"""Radio Labeling - deterministic radio network simulation and labeling schemes."""

__version__ = "0.1.0"

from .experiment import ExperimentResult, ExperimentRunner
from .run_state import RunStage, RunState
from .scenario import Scenario, load_scenario

__all__ = [
    "ExperimentResult",
    "ExperimentRunner",
    "RunStage",
    "RunState",
    "Scenario",
    "load_scenario",
]
