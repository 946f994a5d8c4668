"""Tests for the experiment runner."""

import csv
import json

import pytest

from radio_labeling.config import PolicyMode, SimulationSettings, load_config
from radio_labeling.errors import InvariantViolation, ScenarioError
from radio_labeling.experiment import ExperimentRunner
from radio_labeling.radio_sim import RunStatus
from radio_labeling.run_state import RunStage


def test_runner_initialization(make_scenario, settings, tmp_path):
    """Test runner initialization."""
    runner = ExperimentRunner(make_scenario(), tmp_path / "out", settings)
    assert runner.graph.node_count == 4
    assert runner.sources.k == 4
    assert runner.horizon == 100_000
    assert runner.state.state.horizon == 100_000
    assert runner.state.state.stage == RunStage.INITIALIZED


def test_settings_fill_open_values(make_scenario, settings):
    """Test that settings supply the horizon when the scenario has none."""
    runner = ExperimentRunner(make_scenario(horizon=None), settings=settings)
    assert runner.horizon == settings.horizon


def test_settings_supply_policy_and_fast_forward(make_scenario):
    """Test that scenario values win and settings fill the gaps."""
    settings = SimulationSettings(policy="faithful", fast_forward=False)
    runner = ExperimentRunner(make_scenario(algorithm="gossip"), settings=settings)
    assert runner.policy_mode is PolicyMode.FAITHFUL
    assert runner.policy.mode is PolicyMode.FAITHFUL
    assert runner.fast_forward is False

    scenario = make_scenario(algorithm="gossip", policy="registry", fast_forward=True)
    runner = ExperimentRunner(scenario, settings=settings)
    assert runner.policy.mode is PolicyMode.REGISTRY
    assert runner.fast_forward is True


def test_environment_drives_the_run(make_scenario, monkeypatch):
    """Test policy and fast-forward taken from RADIO_LABELING_* variables."""
    monkeypatch.setenv("RADIO_LABELING_POLICY", "faithful")
    monkeypatch.setenv("RADIO_LABELING_FAST_FORWARD", "false")
    settings = load_config(env_file=False)

    gossip = make_scenario(algorithm="gossip", graph={"kind": "path", "size": 3})
    result = ExperimentRunner(gossip, settings=settings).execute()
    assert result.exit_code == 2
    assert result.state.state.error.startswith("Labeling failed")

    result = ExperimentRunner(make_scenario(), settings=settings).execute(verify=False)
    assert result.exit_code == 0
    assert result.trace.stats.processed_rounds == result.trace.final_round
    assert result.trace.stats.skipped_rounds == 0


@pytest.mark.parametrize("limit,expected", [(10, 4), (3, None)])
def test_brute_force_limit_from_settings(make_scenario, limit, expected):
    """Test the configured limit on the network's distinguishing number."""
    scenario = make_scenario(graph={"kind": "complete", "size": 4}, sources=[0])
    settings = SimulationSettings(brute_force_limit=limit)
    runner = ExperimentRunner(scenario, settings=settings)
    assert runner.network_distinguishing_number() == expected


def test_distinguishing_number_of_trees_ignores_the_limit(make_scenario):
    settings = SimulationSettings(brute_force_limit=1)
    runner = ExperimentRunner(make_scenario(), settings=settings)
    assert runner.network_distinguishing_number() == 2


def test_invalid_scenario_fails_early(make_scenario):
    """Test that graph-dependent checks run on construction."""
    with pytest.raises(ScenarioError):
        ExperimentRunner(make_scenario(coordinator=7))


def test_label(make_scenario, tmp_path):
    """Test the labeling stage."""
    runner = ExperimentRunner(make_scenario(sources=[1]), tmp_path)
    labeling = runner.label()

    assert labeling.metadata["scheme"] == "kb"
    assert labeling.metadata["strat"] == 0
    assert labeling.bounds == {"kb": 5}
    assert runner.state.state.stage == RunStage.LABELING
    assert len(runner.state.get_artifacts_by_stage(RunStage.LABELING)) == 2
    assert (tmp_path / "labels.txt").read_text().splitlines()[0] == "0 01110"


def test_simulate(make_scenario, tmp_path):
    """Test the simulation stage."""
    runner = ExperimentRunner(make_scenario(), tmp_path)
    trace = runner.simulate(runner.label())

    assert trace.status is RunStatus.TERMINATED
    assert runner.state.state.stage == RunStage.SIMULATION
    assert runner.state.state.processed_rounds == trace.stats.processed_rounds
    assert runner.state.get_progress() > 0
    assert json.loads((tmp_path / "trace.json").read_text())["status"] == "terminated"


@pytest.mark.parametrize(
    "overrides",
    [
        {},
        {"graph": {"kind": "random-connected", "size": 8, "seed": 2}, "sources": [3]},
        {"algorithm": "gossip", "graph": {"kind": "random-tree", "size": 8}},
        {"algorithm": "tn", "graph": {"kind": "tn", "size": 4}},
        {"algorithm": "broadcast", "graph": {"kind": "path", "size": 5}},
        {
            "algorithm": "broadcast",
            "broadcast_variant": "ack",
            "graph": {"kind": "complete", "size": 4},
        },
        {"algorithm": "custom", "program": "flood", "sources": [0]},
    ],
)
def test_execute_success(make_scenario, tmp_path, overrides):
    """Test full runs that solve and verify."""
    runner = ExperimentRunner(make_scenario(**overrides), tmp_path)
    result = runner.execute()

    assert result.exit_code == 0, result.state.state.error
    assert result.completion.solved
    assert result.state.state.stage == RunStage.COMPLETED
    assert result.evidence["collision_soundness"] == len(result.trace.rounds)
    assert result.metrics["solved"] is True
    for name in ("labels", "labels_meta", "trace", "evidence", "trace_metrics"):
        assert result.state.artifacts[name].exists()


def test_execute_evidence_per_algorithm(make_scenario):
    """Test that each algorithm gets its own invariant suite."""
    gossip = ExperimentRunner(
        make_scenario(algorithm="gossip", graph={"kind": "star", "size": 3})
    ).execute()
    assert "gossip_invariants" in gossip.evidence

    tn = ExperimentRunner(
        make_scenario(algorithm="tn", graph={"kind": "tn", "size": 3})
    ).execute()
    assert tn.evidence["tn_schedule"]["completion_round"] <= 9

    broadcast = ExperimentRunner(
        make_scenario(algorithm="broadcast", graph={"kind": "path", "size": 3})
    ).execute()
    assert broadcast.evidence["broadcast"]["m"] == 2
    assert broadcast.evidence["broadcast"]["t_done"] == 6


def test_metrics_csv(make_scenario, tmp_path):
    """Test the metrics row written next to the trace."""
    runner = ExperimentRunner(make_scenario(name="metrics"), tmp_path)
    result = runner.execute()
    with (tmp_path / "metrics.csv").open() as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 1
    assert rows[0]["scenario"] == "metrics"
    assert rows[0]["algorithm"] == "kb"
    assert int(rows[0]["transmissions"]) == result.metrics["transmissions"]


def test_execute_unsolved(make_scenario):
    """Test runs that end without solving the task."""
    exhausted = ExperimentRunner(make_scenario(horizon=5)).execute()
    assert exhausted.exit_code == 1
    assert exhausted.trace.status is RunStatus.EXHAUSTED
    assert not exhausted.completion.solved

    silent = ExperimentRunner(
        make_scenario(algorithm="custom", program="all-transmit", horizon=50)
    ).execute()
    assert silent.exit_code == 1


def test_execute_without_verification(make_scenario):
    """Test that verification can be skipped."""
    result = ExperimentRunner(make_scenario()).execute(verify=False)
    assert result.exit_code == 0
    assert result.evidence == {}


def test_labeling_failure(make_scenario):
    """Test failure handling when labels cannot be computed."""
    scenario = make_scenario(
        algorithm="gossip", graph={"kind": "path", "size": 3}, policy="faithful"
    )
    result = ExperimentRunner(scenario).execute()

    assert result.exit_code == 2
    assert result.state.state.stage == RunStage.FAILED
    assert result.state.state.error.startswith("Labeling failed")
    assert result.trace is None


def test_verification_failure(make_scenario, mocker):
    """Test failure handling when an invariant is violated."""
    soundness = mocker.patch(
        "radio_labeling.experiment.check_collision_soundness",
        side_effect=InvariantViolation("collision soundness", "tampered"),
    )
    result = ExperimentRunner(make_scenario()).execute()

    soundness.assert_called_once()
    assert result.exit_code == 2
    assert result.state.state.stage == RunStage.FAILED
    assert result.state.state.error == "collision soundness: tampered"
    assert result.state.get_last_successful_stage() == RunStage.VERIFICATION
    assert result.completion.solved


def test_nothing_written_without_output_dir(make_scenario):
    """Test in-memory runs."""
    result = ExperimentRunner(make_scenario()).execute()
    assert result.state.artifacts == {}
