"""Command-line front end: label, run, verify, demo and report."""

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .artifacts import ArtifactStore
from .batch import BatchRunner
from .config import PolicyMode, SimulationSettings, load_config
from .demo_programs import PROGRAM_FAMILIES, program_family
from .errors import PreconditionError, RadioLabelingError
from .experiment import ExperimentResult, ExperimentRunner
from .graph_core import Coloring, Graph, Permutation, random_tree
from .run_state import STAGE_PREFIXES
from .scenario import Scenario, load_scenario
from .verify_oracles import (
    demo_automorphism_histories,
    demo_duplicate_labels_kn,
    demo_four_cycle,
    find_preserved_automorphism,
    label_length_report,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
AUTOMORPHISM_SEED_ATTEMPTS = 100


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radio-labeling",
        description="Radio network simulator and labeling-scheme toolkit",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def scenario_command(name: str, help_text: str, many: bool = False) -> None:
        sub = commands.add_parser(
            name, help=help_text, formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )
        sub.add_argument(
            "--scenario",
            type=Path,
            required=True,
            nargs="+" if many else None,
            help="Scenario JSON file" + ("s" if many else ""),
        )
        sub.add_argument("--out", type=Path, help="Artifact directory")
        sub.add_argument("--horizon", type=int, help="Override the round horizon")
        sub.add_argument(
            "--policy",
            choices=[mode.value for mode in PolicyMode],
            help="Override the gossip delay policy",
        )
        sub.add_argument("--seed", type=int, help="Override the graph seed")

    scenario_command("label", "Compute labels and scheme metadata")
    scenario_command("run", "Label and simulate, reporting completion", many=True)
    scenario_command("verify", "Label, simulate and run the invariant suites")
    scenario_command("report", "Measure label lengths against declared bounds")

    demo = commands.add_parser(
        "demo",
        help="Lower-bound demonstrations",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    demo.add_argument("kind", choices=["kn", "cycle", "automorphism"])
    demo.add_argument(
        "--program", choices=sorted(PROGRAM_FAMILIES), default="round-robin"
    )
    demo.add_argument("--n", type=int, default=5, help="Node count")
    demo.add_argument("--k", type=int, default=2, help="Source count (kn)")
    demo.add_argument("--horizon", type=int, default=1000)
    demo.add_argument("--seed", type=int, default=0, help="Tree seed (automorphism)")
    demo.add_argument("--out", type=Path, help="Directory for evidence.json")
    return parser


def apply_overrides(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    """Command-line flags win over the scenario file."""
    update: Dict[str, Any] = {}
    if args.horizon is not None:
        update["horizon"] = args.horizon
    if args.policy is not None:
        update["policy"] = PolicyMode(args.policy)
    if args.seed is not None:
        update["graph"] = scenario.graph.model_copy(update={"seed": args.seed})
    return scenario.model_copy(update=update) if update else scenario


def _emit(data: Dict[str, Any]) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def _summary(result: ExperimentResult) -> Dict[str, Any]:
    state = result.state
    artifacts = {
        stage.value: [str(path) for path in state.get_artifacts_by_stage(stage)]
        for stage in STAGE_PREFIXES
    }
    return {
        "scenario": result.name,
        "stage": state.state.stage.value,
        "error": state.state.error,
        "exit_code": result.exit_code,
        "progress": round(state.get_progress(), 2),
        "artifacts": {stage: paths for stage, paths in artifacts.items() if paths},
        "completion": result.completion.to_jsonable() if result.completion else None,
    }


def cmd_label(
    scenario: Scenario, out: Optional[Path], settings: SimulationSettings
) -> int:
    runner = ExperimentRunner(scenario, out, settings)
    labeling = runner.label()
    _emit({"labels": labeling.labels, "metadata": labeling.metadata})
    return 0


def cmd_report(
    scenario: Scenario, out: Optional[Path], settings: SimulationSettings
) -> int:
    runner = ExperimentRunner(scenario, out, settings)
    labeling = runner.label()
    report = label_length_report(labeling.labels, labeling.bounds).to_jsonable()
    report["scenario"] = scenario.name
    report["distinguishing_number"] = runner.network_distinguishing_number()
    if out is not None:
        ArtifactStore(out).store_json(report, "report.json")
    _emit(report)
    return 0 if all(report["within_bounds"].values()) else 2


async def cmd_run(
    scenarios: Sequence[Scenario],
    out: Optional[Path],
    settings: SimulationSettings,
    verify: bool,
) -> int:
    if len(scenarios) == 1:
        results = [ExperimentRunner(scenarios[0], out, settings).execute(verify)]
    else:
        batch = BatchRunner(settings)
        results = await batch.run_all(scenarios, out, verify)
    for result in results:
        summary = _summary(result)
        if verify:
            summary["evidence"] = result.evidence
        _emit(summary)
    return max(result.exit_code for result in results)


async def cmd_verify(
    scenarios: Sequence[Scenario], out: Optional[Path], settings: SimulationSettings
) -> int:
    """Run with every applicable invariant suite; a violation exits with 2."""
    return await cmd_run(scenarios, out, settings, verify=True)


def _symmetric_tree(n: int, seed: int) -> Tuple[Graph, Coloring, Permutation]:
    """First seeded random tree from ``seed`` on that has a symmetry."""
    for attempt in range(seed, seed + AUTOMORPHISM_SEED_ATTEMPTS):
        tree = random_tree(n, attempt)
        colouring = Coloring.uniform(n)
        phi = find_preserved_automorphism(tree, colouring)
        if phi is not None:
            return tree, colouring, phi
    raise PreconditionError(f"no symmetric tree on {n} nodes near seed {seed}")


def cmd_demo(args: argparse.Namespace) -> int:
    factory = program_family(args.program)
    if args.kind == "kn":
        evidence = demo_duplicate_labels_kn(
            args.n, args.k, factory, args.horizon, args.program
        )
    elif args.kind == "cycle":
        evidence = demo_four_cycle(factory, args.horizon, args.program)
    else:
        tree, colouring, phi = _symmetric_tree(args.n, args.seed)
        evidence = demo_automorphism_histories(
            tree, colouring, factory, phi, args.horizon, program_name=args.program
        )
    if args.out is not None:
        ArtifactStore(args.out).store_json(evidence, "evidence.json")
    _emit(evidence)
    return 0


async def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and dispatch to a command.

    Returns:
        Exit status: 0 solved and verified, 1 unsolved, 2 on any failure
    """
    args = build_parser().parse_args(argv)
    settings = load_config()
    logging.getLogger().setLevel(settings.log_level)
    try:
        if args.command == "demo":
            return cmd_demo(args)
        paths = args.scenario if isinstance(args.scenario, list) else [args.scenario]
        scenarios = [apply_overrides(load_scenario(path), args) for path in paths]
        if args.command == "label":
            return cmd_label(scenarios[0], args.out, settings)
        if args.command == "report":
            return cmd_report(scenarios[0], args.out, settings)
        if args.command == "verify":
            return await cmd_verify(scenarios, args.out, settings)
        return await cmd_run(scenarios, args.out, settings, verify=False)
    except RadioLabelingError as e:
        logger.error("%s failed: %s", args.command, str(e))
        return 2


def run() -> None:
    """Console-script entry point."""
    logging.basicConfig(
        level=logging.INFO,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    raise SystemExit(asyncio.run(main()))


if __name__ == "__main__":
    run()
