"""Stage tracking for one experiment run."""

from copy import deepcopy
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional


class RunStage(str, Enum):
    INITIALIZED = "initialized"
    LABELING = "labeling"
    SIMULATION = "simulation"
    VERIFICATION = "verification"
    COMPLETED = "completed"
    FAILED = "failed"


STAGE_PREFIXES = {
    RunStage.LABELING: "labels",
    RunStage.SIMULATION: "trace",
    RunStage.VERIFICATION: "evidence",
}


@dataclass
class StageSnapshot:
    stage: RunStage
    processed_rounds: int = 0
    horizon: int = 0
    error: Optional[str] = None
    artifacts: Dict[str, Path] = field(default_factory=dict)


class RunState:
    def __init__(self) -> None:
        self.state = StageSnapshot(stage=RunStage.INITIALIZED)
        self.history: List[StageSnapshot] = []

    def update_state(
        self,
        stage: RunStage,
        processed_rounds: Optional[int] = None,
        error: Optional[str] = None,
    ) -> None:
        """Move to ``stage``, keeping a copy of the previous state."""
        self.history.append(deepcopy(self.state))
        self.state.stage = stage
        if processed_rounds is not None:
            self.state.processed_rounds = processed_rounds
        if error:
            self.state.error = error
            self.state.stage = RunStage.FAILED

    def add_artifact(self, name: str, path: Path) -> None:
        self.state.artifacts[name] = path

    @property
    def artifacts(self) -> Dict[str, Path]:
        return self.state.artifacts

    def get_artifacts_by_stage(self, stage: RunStage) -> List[Path]:
        """Artifacts written by ``stage``, recognised by their name prefix."""
        prefix = STAGE_PREFIXES.get(stage)
        if not prefix:
            return []
        return [
            path
            for name, path in self.state.artifacts.items()
            if name.startswith(prefix)
        ]

    def can_proceed(self) -> bool:
        return self.state.stage is not RunStage.FAILED

    def get_progress(self) -> float:
        """Simulated rounds as a percentage of the horizon."""
        if self.state.horizon == 0:
            return 0.0
        return min(100.0, self.state.processed_rounds / self.state.horizon * 100)

    def get_last_successful_stage(self) -> RunStage:
        for snapshot in reversed(self.history):
            if snapshot.stage is not RunStage.FAILED:
                return snapshot.stage
        return RunStage.INITIALIZED
