import csv
import json
import math

import numpy as np
import pytest

from tsdiffusion.bench.cli import main
from tsdiffusion.bench.config import RunConfig, parse_tau_grid, read_run_config
from tsdiffusion.bench.experiments import (REGRET_COLUMNS, STABILIZATION_COLUMNS,
                                           run_regret_experiment, run_stabilization_sweep)
from tsdiffusion.bench.plotting import emit_plot
from tsdiffusion.bench.scenarios import BUILTIN, export_scenario, list_scenarios, load_scenario
from tsdiffusion.errors import (ConfigurationError, SchemaError, SolverError,
                                StabilityError)


# --------------------------------------------------------------- scenarios

def test_x29a_matrices():
    s = load_scenario("x29a")
    assert (s.p, s.q) == (4, 2)
    assert s.truth.A[0, 0] == -0.16 and s.truth.A[1, 0] == -15.2
    assert s.truth.B[0, 0] == -0.0006
    np.testing.assert_array_equal(s.noise.C, 0.25 * np.eye(4))
    np.testing.assert_array_equal(s.cost.Qx, np.eye(4))
    np.testing.assert_array_equal(s.cost.Qu, 0.1 * np.eye(2))
    assert s.dt == 1e-3 and s.sigma == 5.0 and s.tau0 == 20.0 and s.growth == 0.1


def test_b747_matrices():
    s = load_scenario("b747")
    assert (s.p, s.q) == (4, 2)
    assert s.truth.A[0, 2] == -0.980
    assert s.truth.B[2, 1] == -0.908


def test_glucose_matrices():
    s = load_scenario("glucose")
    assert (s.p, s.q) == (3, 1)
    np.testing.assert_array_equal(s.truth.A[0], [1.91, -2.82, 0.91])
    np.testing.assert_array_equal(s.truth.B[:, 0], [-0.0992, 0.0, 0.0])


@pytest.mark.parametrize("name", list(BUILTIN))
def test_initial_gains_stabilize(name):
    s = load_scenario(name)
    assert np.linalg.eigvals(s.truth.A + s.truth.B @ s.G_init).real.max() < 0


def test_list_scenarios():
    assert [n for n, *_ in list_scenarios()] == ["x29a", "b747", "glucose"]


def test_unknown_scenario():
    with pytest.raises(ConfigurationError):
        load_scenario("concorde")


@pytest.mark.parametrize("name", list(BUILTIN))
def test_export_round_trip(tmp_path, name):
    s = load_scenario(name)
    path = tmp_path / f"{name}.ini"
    export_scenario(s, path)
    back = load_scenario(str(path))
    for a, b in ((s.truth.A, back.truth.A), (s.truth.B, back.truth.B), (s.cost.Qx, back.cost.Qx),
                 (s.cost.Qu, back.cost.Qu), (s.noise.C, back.noise.C), (s.G_init, back.G_init)):
        np.testing.assert_array_equal(a, b)
    assert (back.dt, back.sigma, back.tau0, back.growth) == (s.dt, s.sigma, s.tau0, s.growth)


def test_inline_config_without_gain(tmp_path):
    path = tmp_path / "toy.ini"
    path.write_text("[drift]\nA = [[0.5, 1.0], [0.0, -1.0]]\nB = [[0.0], [1.0]]\n"
                    "[noise]\nC = [1.0, 1.0]\n")
    s = load_scenario(str(path))
    assert (s.p, s.q) == (2, 1)
    np.testing.assert_array_equal(s.noise.C, np.eye(2))
    assert np.linalg.eigvals(s.truth.A + s.truth.B @ s.G_init).real.max() < 0


def test_config_schema_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[drift]\nA = [[1, 2], [3]]\nB = [[1], [0]]\n")
    with pytest.raises(SchemaError):
        load_scenario(str(bad))
    bad.write_text("[weird]\nx = 1\n")
    with pytest.raises(SchemaError):
        load_scenario(str(bad))
    bad.write_text("[sim]\ndt = 0.001\n")
    with pytest.raises(SchemaError):
        load_scenario(str(bad))


def test_non_stabilizable_truth_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[drift]\nA = [[1.0, 0.0], [0.0, -1.0]]\nB = [[0.0], [1.0]]\n"
                    "[policy]\nG_init = [[0.0, 0.0]]\n")
    with pytest.raises((StabilityError, SolverError)):
        load_scenario(str(path))


def test_run_config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[scenario]\nname = glucose\n[sim]\nhorizon = 40\nreps = 3\nseed = 9\n"
                    "tau_grid = 2:6:2\n[policy]\npolicies = ts, optimal\ntau0 = 10\n")
    cfg = read_run_config(path)
    assert cfg.scenario.name == "glucose" and cfg.policies == ("ts", "optimal")
    assert (cfg.horizon, cfg.reps, cfg.seed) == (40.0, 3, 9)
    assert cfg.tau_grid == (2.0, 4.0, 6.0)
    assert cfg.schedule().tau0 == 10.0


def test_run_config_validation():
    s = load_scenario("x29a")
    with pytest.raises(ConfigurationError):
        RunConfig(scenario=s, reps=0)
    with pytest.raises(ConfigurationError):
        RunConfig(scenario=s, horizon=10.0)
    with pytest.raises(ConfigurationError):
        RunConfig(scenario=s, seed=2 ** 64)
    with pytest.raises(ConfigurationError):
        RunConfig(scenario=s, policies=("greedy",))
    with pytest.raises(ConfigurationError):
        RunConfig(scenario=s, tau_grid=(0.005,))


def test_parse_tau_grid():
    assert parse_tau_grid("4:20:4") == (4.0, 8.0, 12.0, 16.0, 20.0)
    assert parse_tau_grid("1,2.5") == (1.0, 2.5)
    with pytest.raises(ConfigurationError):
        parse_tau_grid("4:2:1")


# -------------------------------------------------------------- experiments

def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_stabilization_single_rep_deterministic(tmp_path):
    s = load_scenario("x29a")
    out = tmp_path / "a.csv"
    cfg = RunConfig(scenario=s, reps=1, seed=4, tau_grid=(4.0,), out=str(out))
    rows = run_stabilization_sweep(cfg)
    first = out.read_bytes()
    assert run_stabilization_sweep(cfg) == rows
    assert out.read_bytes() == first
    table = read_rows(out)
    assert tuple(table[0]) == STABILIZATION_COLUMNS and len(table) == 2
    assert table[1][1] == "1" and table[1][4] == "4"


def test_regret_csv_schema_and_optimal_zero(tmp_path):
    s = load_scenario("glucose")
    out = tmp_path / "r.csv"
    cfg = RunConfig(scenario=s, policies=("ts", "optimal"), horizon=60.0, reps=2, seed=1,
                    out=str(out))
    run_regret_experiment(cfg)
    table = read_rows(out)
    assert tuple(table[0]) == REGRET_COLUMNS
    body = table[1:]
    for row in body:
        assert row[0] in ("ts", "optimal") and row[2] in ("0", "1", "mean", "worst")
        assert all(math.isfinite(float(x)) for x in row[3:])
    assert all(float(r[3]) == 0.0 for r in body if r[0] == "optimal")
    ts_T = [float(r[1]) for r in body if r[0] == "ts" and r[2] == "0"]
    assert ts_T == [25.0, 50.0, 60.0]
    assert sum(r[2] == "worst" for r in body) == 6


def test_regret_csv_bytes_independent_of_parallelism(tmp_path):
    s = load_scenario("x29a")
    paths = []
    for jobs in (1, 3):
        out = tmp_path / f"j{jobs}.csv"
        run_regret_experiment(RunConfig(scenario=s, policies=("ts", "rand-est"), horizon=30.0,
                                        reps=3, seed=11, jobs=jobs, out=str(out)))
        paths.append(out.read_bytes())
    assert paths[0] == paths[1]


def test_worst_rows_are_pointwise_maxima(tmp_path):
    s = load_scenario("x29a")
    out = tmp_path / "w.csv"
    run_regret_experiment(RunConfig(scenario=s, policies=("ts",), horizon=60.0, reps=3,
                                    seed=2, out=str(out)))
    body = read_rows(out)[1:]
    for T in ("25", "50", "60"):
        reps = [float(r[4]) for r in body if r[1] == T and r[2] not in ("mean", "worst")]
        worst = [float(r[4]) for r in body if r[1] == T and r[2] == "worst"]
        mean = [float(r[4]) for r in body if r[1] == T and r[2] == "mean"]
        assert worst == [max(reps)]
        assert mean[0] == pytest.approx(np.mean(reps), rel=1e-15)


# ------------------------------------------------------------------ plots

def test_plots(tmp_path):
    s = load_scenario("x29a")
    st_csv, rg_csv = tmp_path / "s.csv", tmp_path / "r.csv"
    run_stabilization_sweep(RunConfig(scenario=s, reps=2, tau_grid=(2.0, 4.0), out=str(st_csv)))
    run_regret_experiment(RunConfig(scenario=s, policies=("ts", "rand-est"), horizon=30.0,
                                    reps=2, out=str(rg_csv)))
    for kind, src in (("stabilization", st_csv), ("regret", rg_csv), ("estimation", rg_csv)):
        out = tmp_path / f"{kind}.svg"
        emit_plot(src, kind, out)
        text = out.read_text()
        assert text.lstrip().startswith("<?xml") and "<svg" in text


def test_plot_rejects_empty_csv(tmp_path):
    src = tmp_path / "empty.csv"
    src.write_text(",".join(REGRET_COLUMNS) + "\n")
    out = tmp_path / "x.svg"
    with pytest.raises(SchemaError):
        emit_plot(src, "regret", out)
    assert not out.exists()


def test_plot_rejects_wrong_schema(tmp_path):
    src = tmp_path / "s.csv"
    src.write_text(",".join(STABILIZATION_COLUMNS) + "\n4,1,1,1,0\n")
    with pytest.raises(SchemaError):
        emit_plot(src, "regret", tmp_path / "x.svg")


# -------------------------------------------------------------------- CLI

def test_cli_scenario_list(capsys):
    assert main(["scenario", "list"]) == 0
    out = capsys.readouterr().out
    assert "x29a" in out and "p=3 q=1" in out


def test_cli_scenario_export(tmp_path):
    out = tmp_path / "b.ini"
    assert main(["scenario", "export", "b747", "--out", str(out)]) == 0
    np.testing.assert_array_equal(load_scenario(str(out)).truth.A, load_scenario("b747").truth.A)


def test_cli_care(tmp_path, capsys):
    out = tmp_path / "care.json"
    assert main(["care", "--scenario", "x29a", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "stability margin" in text and "K =" in text
    payload = json.loads(out.read_text())
    assert np.array(payload["K"]).shape == (4, 4) and payload["margin"] > 0


def test_cli_stabilize_and_control(tmp_path, capsys):
    st_csv, rg_csv = tmp_path / "s.csv", tmp_path / "r.csv"
    assert main(["stabilize", "--scenario", "x29a", "--tau-grid", "2:4:2", "--reps", "2",
                 "--sigma", "5", "--kappa-rule", "pow1.5", "--seed", "0",
                 "--out", str(st_csv)]) == 0
    assert len(read_rows(st_csv)) == 3
    assert main(["control", "--scenario", "x29a", "--policy", "ts,optimal", "--horizon", "30",
                 "--reps", "2", "--seed", "0", "--tau0", "20", "--growth", "0.1",
                 "--out", str(rg_csv)]) == 0
    assert "normalized regret" in capsys.readouterr().out
    svg = tmp_path / "r.svg"
    assert main(["plot", "--kind", "regret", "--in", str(rg_csv), "--out", str(svg)]) == 0
    assert svg.exists()


def test_cli_fixed_kappa(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["stabilize", "--scenario", "x29a", "--tau-grid", "2", "--reps", "1",
                 "--kappa-rule", "fixed:4", "--out", str(out)]) == 0


def test_cli_check(capsys):
    assert main(["check", "--suite", "perturbation"]) == 0
    assert capsys.readouterr().out.count("[PASS]") == 2


def test_cli_errors(capsys):
    assert main(["care", "--scenario", "nowhere"]) == 2
    assert "unknown scenario" in capsys.readouterr().err
    assert main(["control", "--scenario", "x29a", "--horizon", "5", "--reps", "1"]) == 2
    with pytest.raises(SystemExit):
        main(["stabilize", "--kappa-rule", "cube"])
