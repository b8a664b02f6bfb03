import filecmp
from pathlib import Path

import pytest

from reconfigsim.benchmarks import DcDividerBenchmark, StepResponseBenchmark
from reconfigsim.devices import DeviceKind, FaultMode
from reconfigsim.evolution import Preset, Termination, Truncation
from reconfigsim.ledger import Classification
from reconfigsim.scenario import (
    ScenarioError,
    bundled_scenario_names,
    bundled_scenario_path,
    load_scenario,
    resolve_scenario_path,
    run_campaign,
    run_seed,
    write_artifacts,
)

DIVIDER_SCENARIO = """
schema = 1
id = "test-divider"
seeds = [{seeds}]

[device]
name = "FPTA8"
kind = "FPTA"
size = 8
t_program_ms = 0.008

[device.transfer]
bus_width_bits = 8
clock_hz = 160000000
bitstream_bytes = 1

[benchmark]
id = "fpta-divider"

[ea]
preset = "recommended"
population_size = 10
max_generations = 30
mutation_rate = 0.05
elitism = 1
stop_on_success = true

[requirement]
deadline = "{deadline}"
classification = "soft"
"""


def write_divider_scenario(tmp_path, seeds="1, 2, 3", deadline="5s", **edits) -> Path:
    text = DIVIDER_SCENARIO.format(seeds=seeds, deadline=deadline)
    for old, new in edits.items():
        text = text.replace(old, new)
    path = tmp_path / "test.scenario"
    path.write_text(text)
    return path


class TestBundledScenarios:
    def test_all_three_ship(self):
        assert bundled_scenario_names() == ["example2", "fpta-divider", "ispPAC10-infeasible"]

    def test_example2_binds_the_canonical_plan(self):
        scenario = load_scenario(bundled_scenario_path("example2"))
        assert scenario.device.name == "AN220E04"
        assert scenario.benchmark.id == "example2-compensator"
        assert scenario.ea.population_size == 100
        assert scenario.ea.max_generations == 500
        assert scenario.ea.stop_on_success is False
        assert scenario.requirement.deadline_ns == 36_000_000_000_000
        assert scenario.requirement.classification is Classification.HARD
        assert [f.mode for f in scenario.faults] == [FaultMode.PARAMETER_DRIFT]
        cost = scenario.device.t_program_ns + scenario.benchmark.test_window_ns
        assert cost == 628_800_000
        assert scenario.ea.population_size * scenario.ea.max_generations * cost \
            == 31_440_000_000_000

    def test_fpta_divider_uses_recommended_preset(self):
        scenario = load_scenario(bundled_scenario_path("fpta-divider"))
        assert scenario.device.kind is DeviceKind.FPTA
        assert isinstance(scenario.benchmark, DcDividerBenchmark)
        assert scenario.ea.preset is Preset.RECOMMENDED
        assert isinstance(scenario.ea.selection, Truncation)
        assert scenario.ea.crossover_rate == 0.0
        assert len(scenario.seeds) == 50

    def test_infeasible_scenario_kills_the_derivative_module(self):
        scenario = load_scenario(bundled_scenario_path("ispPAC10-infeasible"))
        assert scenario.device.name == "ispPAC10"
        assert isinstance(scenario.benchmark, StepResponseBenchmark)
        assert [f.mode for f in scenario.faults] == [FaultMode.MODULE_DEAD]
        assert scenario.faults[0].target == 1
        assert scenario.requirement.deadline_ns == 21_600_000_000_000

    def test_resolve_by_name_or_path(self):
        by_name = resolve_scenario_path("fpta-divider")
        by_path = resolve_scenario_path(str(by_name))
        assert by_name == by_path
        with pytest.raises(ScenarioError):
            resolve_scenario_path("missing-scenario")


class TestLoadErrors:
    def test_toml_syntax_error_carries_line_info(self, tmp_path):
        path = tmp_path / "bad.scenario"
        path.write_text('schema = 1\nid = = "x"\n')
        with pytest.raises(ScenarioError, match="line 2"):
            load_scenario(path)

    def test_wrong_schema(self, tmp_path):
        path = tmp_path / "bad.scenario"
        path.write_text("schema = 2\n")
        with pytest.raises(ScenarioError, match="schema"):
            load_scenario(path)

    def test_missing_device_table(self, tmp_path):
        path = tmp_path / "bad.scenario"
        path.write_text('schema = 1\nid = "x"\nseeds = [1]\n')
        with pytest.raises(ScenarioError, match=r"\[device\]"):
            load_scenario(path)

    def test_unknown_profile(self, tmp_path):
        path = write_divider_scenario(tmp_path)
        text = path.read_text().replace(
            'name = "FPTA8"', 'profile = "XC4010"'
        )
        path.write_text(text)
        with pytest.raises(ScenarioError, match="unknown device"):
            load_scenario(path)

    def test_empty_seed_list(self, tmp_path):
        path = write_divider_scenario(tmp_path, seeds="")
        with pytest.raises(ScenarioError, match="seeds"):
            load_scenario(path)

    def test_fault_switch_out_of_range(self, tmp_path):
        path = write_divider_scenario(tmp_path)
        path.write_text(
            path.read_text()
            + '\n[[faults]]\nmode = "stuck-open"\ntarget = 99\n'
        )
        with pytest.raises(ScenarioError, match="switch 99"):
            load_scenario(path)

    def test_drift_on_divider_has_no_valid_targets(self, tmp_path):
        path = write_divider_scenario(tmp_path)
        path.write_text(
            path.read_text()
            + '\n[[faults]]\nmode = "parameter-drift"\ntarget = "plant_gain"\nmultiplier = 0.5\n'
        )
        with pytest.raises(ScenarioError, match="unknown parameter"):
            load_scenario(path)

    def test_unknown_preset(self, tmp_path):
        path = write_divider_scenario(tmp_path, **{'preset = "recommended"': 'preset = "magic"'})
        with pytest.raises(ScenarioError, match="unknown preset"):
            load_scenario(path)

    def test_benchmark_device_kind_mismatch(self, tmp_path):
        path = write_divider_scenario(
            tmp_path, **{'id = "fpta-divider"': 'id = "example2-compensator"'}
        )
        with pytest.raises(ScenarioError, match="FPAA"):
            load_scenario(path)

    def test_bad_duration_message_names_the_key(self, tmp_path):
        path = write_divider_scenario(tmp_path, deadline="5 parsecs")
        with pytest.raises(ScenarioError, match="deadline"):
            load_scenario(path)


class TestInlineBenchmark:
    def test_inline_step_benchmark_parses(self, tmp_path):
        path = tmp_path / "inline.scenario"
        path.write_text(
            """
schema = 1
id = "inline"
seeds = [1]

[device]
profile = "AN220E04"

[benchmark]
id = "custom-loop"
kind = "step-response"
plant_num = [400.0]
plant_den = [1.0, 12.0, 400.0]
test_window = "500ms"
max_settling_time = "150ms"
band = 0.05

[[benchmark.fields]]
name = "kp"
width = 10
lo = 0.5
hi = 4.0
module = 0

[[benchmark.fields]]
name = "kd"
width = 10
lo = 0.01
hi = 0.3
module = 1

[ea]
population_size = 4
max_generations = 2
mutation_rate = 0.01

[requirement]
deadline = "1h"
"""
        )
        scenario = load_scenario(path)
        assert scenario.benchmark.id == "custom-loop"
        assert scenario.benchmark.test_window_ns == 500_000_000
        assert scenario.benchmark.max_settling_time_s == 0.15
        assert scenario.benchmark.band == 0.05
        assert scenario.benchmark.fields[1].start == 10  # packed after kp
        outcome = run_seed(scenario, 1)
        assert outcome.result.evaluations == 8


class TestRunning:
    def test_run_seed_verdict_matches_ledger(self, tmp_path):
        scenario = load_scenario(write_divider_scenario(tmp_path))
        outcome = run_seed(scenario, 1)
        assert outcome.verdict.margin_ns == (
            scenario.requirement.deadline_ns - outcome.result.ledger.total_ns
        )
        assert outcome.effective == (
            outcome.verdict.logically_correct and outcome.verdict.temporally_correct
        )

    def test_campaign_sorts_and_aggregates(self, tmp_path):
        scenario = load_scenario(write_divider_scenario(tmp_path, seeds="3, 1, 2"))
        report = run_campaign(scenario)
        assert [o.seed for o in report.outcomes] == [1, 2, 3]
        assert report.success_rate == 1.0
        counts = report.verdict_counts()
        assert counts[(True, True)] == 3
        low, median, high = report.t_r_distribution()
        assert low <= median <= high

    def test_zero_deadline_scenario_exhausts_every_seed(self, tmp_path):
        scenario = load_scenario(write_divider_scenario(tmp_path, deadline="0s"))
        report = run_campaign(scenario)
        assert report.success_rate == 0.0
        for outcome in report.outcomes:
            assert outcome.result.termination is Termination.DEADLINE_EXHAUSTED
            assert outcome.result.evaluations == 0
            # within its own (zero) budget the run is temporally correct
            assert outcome.verdict.temporally_correct
            assert not outcome.effective

    def test_parallel_campaign_matches_sequential(self, tmp_path):
        scenario = load_scenario(write_divider_scenario(tmp_path, seeds="1, 2, 3, 4"))
        sequential = run_campaign(scenario, jobs=1)
        parallel = run_campaign(scenario, jobs=2)
        for a, b in zip(sequential.outcomes, parallel.outcomes):
            assert a.seed == b.seed
            assert a.result.best.bits == b.result.best.bits
            assert a.result.ledger.entries == b.result.ledger.entries
            assert a.result.history == b.result.history
            assert a.verdict == b.verdict


class TestArtifacts:
    def test_rerun_writes_byte_identical_artifacts(self, tmp_path):
        scenario = load_scenario(write_divider_scenario(tmp_path, seeds="1, 2"))
        report = run_campaign(scenario)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        write_artifacts(scenario, report, out_a)
        write_artifacts(scenario, run_campaign(scenario), out_b)
        files_a = sorted(p.relative_to(out_a) for p in out_a.rglob("*.csv"))
        files_b = sorted(p.relative_to(out_b) for p in out_b.rglob("*.csv"))
        assert files_a == files_b and files_a
        for rel in files_a:
            assert filecmp.cmp(out_a / rel, out_b / rel, shallow=False), rel

    def test_summary_schema_and_consistency(self, tmp_path):
        scenario = load_scenario(write_divider_scenario(tmp_path, seeds="1, 2"))
        report = run_campaign(scenario)
        out = tmp_path / "artifacts"
        write_artifacts(scenario, report, out)
        summary = (out / "summary.csv").read_text().splitlines()
        assert summary[0] == "seed,termination,evaluations,T_r_ns,logical,temporal,effective"
        assert len(summary) == 3
        for line, outcome in zip(summary[1:], report.outcomes):
            cells = line.split(",")
            assert int(cells[0]) == outcome.seed
            assert int(cells[2]) == outcome.result.evaluations
            # report T_r equals the ledger total, which equals the ledger
            # file's final cumulative value
            assert int(cells[3]) == outcome.result.ledger.total_ns
            ledger_lines = (out / f"seed-{outcome.seed}" / "ledger.csv").read_text().splitlines()
            assert int(ledger_lines[-1].split(",")[-1]) == outcome.result.ledger.total_ns
            fitness_lines = (out / f"seed-{outcome.seed}" / "fitness.csv").read_text().splitlines()
            assert len(fitness_lines) - 1 == outcome.result.generations_executed
