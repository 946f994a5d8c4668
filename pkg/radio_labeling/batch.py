"""Concurrent execution of many scenarios."""

import asyncio
import logging
from pathlib import Path
from typing import List, Optional, Sequence

from .config import SimulationSettings
from .experiment import ExperimentResult, ExperimentRunner
from .scenario import Scenario

logger = logging.getLogger(__name__)


class BatchRunner:
    """
    Runs scenarios side by side, each simulation in a worker thread.

    Runs share no mutable state, so results do not depend on scheduling.
    """

    def __init__(self, settings: Optional[SimulationSettings] = None):
        self.settings = settings or SimulationSettings()
        self.semaphore = asyncio.Semaphore(self.settings.max_concurrency)

    async def run_scenario(
        self,
        scenario: Scenario,
        output_dir: Optional[Path] = None,
        verify: bool = True,
    ) -> ExperimentResult:
        async with self.semaphore:
            loop = asyncio.get_running_loop()
            try:
                runner = ExperimentRunner(scenario, output_dir, self.settings)
                return await loop.run_in_executor(None, runner.execute, verify)
            except Exception as e:
                logger.error("Scenario %s failed: %s", scenario.name, str(e))
                raise

    async def run_all(
        self,
        scenarios: Sequence[Scenario],
        output_root: Optional[Path] = None,
        verify: bool = True,
    ) -> List[ExperimentResult]:
        """
        Execute every scenario.

        Args:
            scenarios: Scenarios, names should be unique
            output_root: Each scenario writes to ``output_root / name``
            verify: Run the invariant suites after each simulation

        Returns:
            Results in input order
        """
        tasks = []
        for scenario in scenarios:
            target = output_root / scenario.name if output_root is not None else None
            tasks.append(self.run_scenario(scenario, target, verify))
        results = await asyncio.gather(*tasks)
        failed = [r.name for r in results if r.exit_code != 0]
        if failed:
            logger.warning(
                "%d of %d scenarios failed: %s", len(failed), len(results), failed
            )
        return list(results)
