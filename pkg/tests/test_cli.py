import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from ponbench.cli import main
from ponbench.types import NetworkInstance, Solution


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def fixture_files(tmp_path, worked_fixture):
    inst, _, sol = worked_fixture
    inst_path = tmp_path / "instance.json"
    sol_path = tmp_path / "solution.json"
    inst_path.write_text(json.dumps(inst.to_dict()))
    sol_path.write_text(json.dumps(sol.to_dict()))
    return inst_path, sol_path


def test_generate_writes_instance(runner, tmp_path):
    out = tmp_path / "inst.json"
    result = runner.invoke(main, [
        "generate", "--scenario", "s4", "--n-du", "2", "--n-ru", "50",
        "--topology", "0", "--master-seed", "3", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    inst = NetworkInstance.from_dict(json.loads(out.read_text()))
    assert inst.n_dus == 2 and inst.n_rus == 50


def test_generate_usage_error_exits_2(runner):
    result = runner.invoke(main, ["generate", "--scenario", "s4", "--n-du", "2"])
    assert result.exit_code == 2


def test_generate_rejects_unknown_scenario_exits_1(runner, tmp_path):
    result = runner.invoke(main, [
        "generate", "--scenario", "mystery", "--n-du", "2", "--n-ru", "50",
    ])
    assert result.exit_code != 0


def test_evaluate_feasible_fixture(runner, fixture_files):
    inst_path, sol_path = fixture_files
    result = runner.invoke(main, [
        "evaluate", "--instance", str(inst_path), "--solution", str(sol_path),
        "--scenario", "s1",
    ])
    assert result.exit_code == 0, result.output
    body = json.loads(result.output)
    assert body["breakdown"]["total"] == pytest.approx(682650.0)
    assert body["feasible"] is True


def test_evaluate_infeasible_exits_1(runner, fixture_files, tmp_path):
    inst_path, sol_path = fixture_files
    broken = json.loads(sol_path.read_text())
    broken["splitter_counts"] = []
    bad_path = tmp_path / "bad.json"
    bad_path.write_text(json.dumps(broken))
    result = runner.invoke(main, [
        "evaluate", "--instance", str(inst_path), "--solution", str(bad_path),
        "--scenario", "s1",
    ])
    assert result.exit_code == 1


def test_solve_writes_solution(runner, fixture_files, tmp_path):
    inst_path, _ = fixture_files
    out = tmp_path / "sol.json"
    trace = tmp_path / "trace.csv"
    result = runner.invoke(main, [
        "solve", "--instance", str(inst_path), "--scenario", "s1",
        "--solver", "rssa", "--budget-s", "5", "--seed", "2",
        "--set", "patience=5", "--out", str(out), "--trace", str(trace),
    ])
    assert result.exit_code == 0, result.output
    sol = Solution.from_dict(json.loads(out.read_text()))
    assert len(sol.assignment) == 2
    header = trace.read_text().splitlines()[0]
    assert header == "run,feasible,true_cost,elapsed_s,w1,w2,w3"


def test_solve_infeasible_exits_1(runner, tmp_path):
    # a single RU 30 km away under the strict-latency profile
    inst = NetworkInstance.from_dict({
        "du_sites": [{"x": 0.0, "y": 0.0}],
        "splitter_sites": [{"x": 100.0, "y": 0.0}],
        "rus": [{"position": {"x": 30000.0, "y": 0.0},
                 "demand_gbps": 2.0, "proc_latency_us": 25.0}],
        "dist_ds": [[100.0]],
        "dist_sr": [[29900.0]],
        "seed": 0,
    })
    inst_path = tmp_path / "far.json"
    inst_path.write_text(json.dumps(inst.to_dict()))
    result = runner.invoke(main, [
        "solve", "--instance", str(inst_path), "--scenario", "s2",
        "--solver", "rssa", "--budget-s", "2", "--set", "patience=4",
    ])
    assert result.exit_code == 1
    assert "no-feasible-run" in result.output


def test_export_lp_and_import_sol(runner, fixture_files, tmp_path, worked_fixture):
    inst_path, _ = fixture_files
    lp_path = tmp_path / "model.lp"
    result = runner.invoke(main, [
        "export-lp", "--instance", str(inst_path), "--scenario", "s1",
        "--out", str(lp_path),
    ])
    assert result.exit_code == 0, result.output
    text = lp_path.read_text()
    assert text.startswith("Minimize") and text.rstrip().endswith("End")

    from ponbench.ilp import build_model, solution_to_values
    from ponbench.presets import DEFAULT_CATALOG, SCENARIOS, physical_params_for

    inst, params, sol = worked_fixture
    model = build_model(inst, params, DEFAULT_CATALOG, SCENARIOS["s1"])
    values = solution_to_values(model, sol)
    out_lines = "\n".join(f"{n} {v}" for n, v in values.items() if v)
    sol_file = tmp_path / "vars.sol"
    sol_file.write_text(out_lines + "\n# objective 682650\n")
    rebuilt_path = tmp_path / "rebuilt.json"
    result2 = runner.invoke(main, [
        "import-sol", "--instance", str(inst_path), "--scenario", "s1",
        "--solver-output", str(sol_file), "--out", str(rebuilt_path),
    ])
    assert result2.exit_code == 0, result2.output
    assert Solution.from_dict(json.loads(rebuilt_path.read_text())) == sol


def test_bench_and_report(runner, tmp_path):
    spec = {
        "scenario": "s4", "nd_sweep": [2], "nr_sweep": [50],
        "solvers": [{"name": "rssa", "overrides": {"t_run_s": 5.0, "patience": 5}}],
        "n_topologies": 2, "master_seed": 11,
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    bench_dir = tmp_path / "bench-out"
    result = runner.invoke(main, [
        "bench", "--spec", str(spec_path), "--out", str(bench_dir),
    ])
    assert result.exit_code == 0, result.output
    records = json.loads((bench_dir / "records.json").read_text())
    assert len(records) == 2
    assert (bench_dir / "records.csv").exists()
    assert (bench_dir / "determinism.sha256").exists()

    report_dir = tmp_path / "report-out"
    result2 = runner.invoke(main, [
        "report", "--records", str(bench_dir / "records.json"),
        "--out", str(report_dir),
    ])
    assert result2.exit_code == 0, result2.output
    summary = json.loads((report_dir / "summary.json").read_text())
    assert len(summary) == 1
    plot_files = list((report_dir / "plots").glob("*.csv"))
    assert plot_files
    for f in plot_files:
        assert f.read_text().splitlines()[0] == "x,solver,mean,ci_lo,ci_hi,component"
