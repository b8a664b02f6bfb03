import filecmp
import subprocess
import sys

from reconfigsim.cli import main


def run_cli(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


class TestDevices:
    def test_lists_exactly_the_three_builtins(self, capsys):
        rc, out, _ = run_cli(capsys, "devices")
        rows = [line for line in out.splitlines() if not line.startswith("name")]
        assert rc == 0
        assert len(rows) == 3

    def test_tabulated_values_appear(self, capsys):
        _, out, _ = run_cli(capsys, "devices")
        isppac = next(line for line in out.splitlines() if "ispPAC10" in line)
        assert "100 ms" in isppac
        fpta = next(line for line in out.splitlines() if "FPTA2" in line)
        assert "0.008 ms" in fpta
        an220 = next(line for line in out.splitlines() if "AN220E04" in line)
        assert "3.8 ms" in an220 and "3.6864" in an220

    def test_extra_profiles_add_rows(self, capsys, tmp_path):
        path = tmp_path / "extra.toml"
        path.write_text(
            'schema = 1\n[[device]]\nname = "labFPAA"\nkind = "FPAA"\n'
            "size = 2\nt_program_ms = 7.5\n"
        )
        rc, out, _ = run_cli(capsys, "devices", "--profiles", str(path))
        assert rc == 0
        assert "labFPAA" in out and "7.5 ms" in out


class TestBudget:
    CANONICAL = ["budget", "--device", "AN220E04", "--t-eval", "625",
                 "--pop", "100", "--gens", "500"]

    def test_canonical_plan_exact_arithmetic(self, capsys):
        rc, out, _ = run_cli(capsys, *self.CANONICAL)
        assert rc == 0
        assert "per-evaluation cost: 628.8 ms" in out
        assert "plan: 100 x 500 = 50000 evaluations" in out
        assert "T_r for plan: 31440 s (~8.733 h)" in out

    def test_canonical_plan_surfaces_the_count_discrepancy(self, capsys):
        _, out, _ = run_cli(capsys, *self.CANONICAL)
        assert "500,000" in out and "50,000" in out and "~87.3 h" in out

    def test_other_plans_omit_the_note(self, capsys):
        _, out, _ = run_cli(capsys, "budget", "--device", "AN220E04", "--t-eval", "625",
                            "--pop", "100", "--gens", "499")
        assert "500,000" not in out

    def test_ten_hour_deadline_is_feasible(self, capsys):
        rc, out, _ = run_cli(capsys, *self.CANONICAL, "--deadline", "10h")
        assert rc == 0
        assert "temporally feasible" in out
        assert "57251 evaluations" in out
        assert "572 whole generations" in out

    def test_six_hour_deadline_is_not(self, capsys):
        rc, out, _ = run_cli(capsys, *self.CANONICAL, "--deadline", "6h")
        assert rc == 1
        assert "NOT temporally feasible" in out

    def test_isppac10_cannot_fit_the_plan_in_ten_hours(self, capsys):
        rc, out, _ = run_cli(capsys, "budget", "--device", "ispPAC10", "--t-eval", "625",
                             "--pop", "100", "--gens", "500", "--deadline", "10h")
        assert rc == 1
        assert "per-evaluation cost: 725 ms" in out
        assert "496 whole generations" in out

    def test_zero_generations_is_always_feasible(self, capsys):
        rc, out, _ = run_cli(capsys, "budget", "--device", "AN220E04", "--t-eval", "625",
                             "--pop", "100", "--gens", "0", "--deadline", "1ns")
        assert rc == 0
        assert "T_r for plan: 0 s" in out

    def test_custom_t_program(self, capsys):
        rc, out, _ = run_cli(capsys, "budget", "--t-program", "2.5", "--t-eval", "7.5",
                             "--pop", "10", "--gens", "10")
        assert rc == 0
        assert "per-evaluation cost: 10 ms" in out
        assert "T_r for plan: 1 s" in out

    def test_unknown_device_errors(self, capsys):
        rc, _, err = run_cli(capsys, "budget", "--device", "XC4010", "--t-eval", "625",
                             "--pop", "100", "--gens", "500")
        assert rc == 2
        assert "unknown device" in err

    def test_device_or_t_program_is_required(self, capsys):
        rc, _, err = run_cli(capsys, "budget", "--t-eval", "625", "--pop", "10", "--gens", "10")
        assert rc == 2
        assert "--device or --t-program" in err


class TestSimulateAndCampaign:
    def test_fpta_divider_all_seeds_effective(self, capsys, tmp_path):
        out_dir = tmp_path / "artifacts"
        rc, out, _ = run_cli(capsys, "simulate", "fpta-divider", "--out", str(out_dir))
        assert rc == 0
        assert "all seeds effective: yes" in out
        assert (out_dir / "summary.csv").exists()
        assert (out_dir / "seed-1" / "ledger.csv").exists()
        assert (out_dir / "seed-50" / "fitness.csv").exists()

    def test_seed_override_runs_one_seed(self, capsys):
        rc, out, _ = run_cli(capsys, "simulate", "fpta-divider", "--seed", "7")
        assert rc == 0
        assert "seed 7:" in out
        assert out.count("seed ") == 1

    def test_campaign_aggregates(self, capsys):
        rc, out, _ = run_cli(capsys, "campaign", "fpta-divider")
        assert rc == 0
        assert "seeds run: 50" in out
        assert "success rate: 1.000 (50/50 effective)" in out
        assert "effective=50" in out

    def test_nonexistent_scenario_errors(self, capsys):
        rc, _, err = run_cli(capsys, "simulate", "no-such-scenario")
        assert rc == 2
        assert "no bundled scenario" in err

    def test_trace_export(self, capsys, tmp_path):
        scenario = tmp_path / "tiny.scenario"
        scenario.write_text(
            """
schema = 1
id = "tiny"
seeds = [1]

[device]
profile = "AN220E04"

[benchmark]
id = "example2-compensator"

[ea]
population_size = 4
max_generations = 2
mutation_rate = 0.01

[requirement]
deadline = "1h"
"""
        )
        out_dir = tmp_path / "artifacts"
        rc, _, _ = run_cli(capsys, "simulate", str(scenario), "--out", str(out_dir), "--trace")
        assert rc == 0
        trace = (out_dir / "seed-1" / "best_response.csv").read_text().splitlines()
        assert trace[0] == "time_s,value"
        assert len(trace) == 4098  # header + 4097 samples

    def test_jobs_flag_does_not_change_artifacts(self, capsys, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(capsys, "campaign", "fpta-divider", "--out", str(a))
        run_cli(capsys, "campaign", "fpta-divider", "--jobs", "4", "--out", str(b))
        for rel in sorted(p.relative_to(a) for p in a.rglob("*.csv")):
            assert filecmp.cmp(a / rel, b / rel, shallow=False), rel


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "reconfigsim", "devices"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
    assert "AN220E04" in proc.stdout
