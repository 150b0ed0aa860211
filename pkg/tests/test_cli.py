import csv
import functools
import io
import json
from pathlib import Path
import subprocess
import sys

import pytest

import neurodyn
from neurodyn import bce, cli, deep, hinge, ode, phase, simulator, specfn, starvation

ROOT = Path(__file__).resolve().parent.parent
FIGURES = ROOT / "figures.json"

# every operation the modules expose as part of their contract
PUBLIC_OPERATIONS = {
    specfn: ["ei", "log_plus_ei", "inverse_log_plus_ei", "sigmoid", "sigmoid_inverse"],
    ode: ["integrate", "richardson_refine"],
    bce: ["solve_degenerate", "time_to_logit", "solve_hyperbolic", "convergence_bound",
          "convergence_time_ratio", "solve_top_left", "solve_multi_neuron", "orthogonal_class_rate",
          "solve_relaxed_h2"],
    phase: ["classify", "verify_fate"],
    deep: ["solve_deep_logit", "aligned_initial_logit"],
    hinge: ["solve_hinge", "time_to_margin", "compare_losses", "hinge_batch_classify"],
    starvation: ["starvation_bound", "starvation_bound_relaxed", "integrate_starvation", "integrate_to_tstar"],
    simulator: ["make_dataset", "sgd_step", "train", "check_mode_independence", "starvation_experiment"],
    cli: ["run_scenario", "load_config"],
}


def run_cli(*args, env=None):
    out, err = io.StringIO(), io.StringIO()
    old = sys.stdout, sys.stderr
    sys.stdout, sys.stderr = out, err
    try:
        code = cli.main(list(args))
    finally:
        sys.stdout, sys.stderr = old
    return code, out.getvalue(), err.getvalue()


def write_config(path, scenarios, version=1):
    path.write_text(json.dumps({"version": version, "scenarios": scenarios}))
    return path


class TestSubcommands:
    def test_trajectory_example(self):
        code, out, err = run_cli("trajectory", "--loss", "bce", "--u0", "0.5", "--norm", "0.7",
                                 "--p", "0.5", "--t-end", "10")
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["t", "u", "confidence"]
        assert rows[1][:2] == ["0.0", "0.5"]
        assert "rows" in err and " s)" in err

    def test_table1(self):
        code, out, _ = run_cli("starvation", "--table1")
        rows = list(csv.reader(io.StringIO(out)))
        assert code == 0 and len(rows) == 9
        assert {(r[0], r[1]) for r in rows[1:]} == {(l, d) for l in ("0.5", "0.2", "0.1", "0.01")
                                                     for d in ("0.01", "0.0001")}

    def test_phase_scan_small(self):
        code, out, _ = run_cli("phase-scan", "--norm", "0.7", "--grid", "5", "--range", "2")
        rows = list(csv.reader(io.StringIO(out)))
        assert code == 0 and len(rows) == 26
        assert rows[0] == ["y0", "z0", "norm", "region", "observed", "agree"]

    def test_json_format(self):
        code, out, _ = run_cli("hinge-compare", "--deltas", "0.1", "0.01", "--format", "json")
        doc = json.loads(out)
        assert code == 0 and doc["columns"] == ["delta", "t_bce", "t_hinge"] and len(doc["rows"]) == 2

    def test_output_file(self, tmp_path):
        target = tmp_path / "deep.csv"
        code, _, _ = run_cli("deep-logit", "--depths", "2", "3", "--t-end", "1", "--dt", "0.5", "-o", str(target))
        assert code == 0
        assert target.read_text().splitlines()[0] == "t,depth,u,confidence"

    @pytest.mark.parametrize("args,name", [
        (["trajectory", "--norm", "-1"], "norm"),
        (["trajectory", "--kind", "hyperbolic", "--y0", "1.0"], "z0"),
        (["hinge-compare", "--deltas", "0.7"], "deltas"),
        (["simulate", "--hidden", "3"], "hidden"),
        (["deep-logit", "--depths", "1"], "depths"),
    ])
    def test_validation_exit_code(self, args, name):
        code, _, err = run_cli(*args)
        assert code == 2 and repr(name) in err

    def test_region_error_is_invalid_input(self):
        code, _, err = run_cli("trajectory", "--kind", "hyperbolic", "--y0", "0.5", "--z0", "-1.0")
        assert code == 2 and "region" in err

    def test_numerical_failure_exit_code(self):
        code, _, err = run_cli("simulate", "--experiment", "starvation", "--max-steps", "10")
        assert code == 3 and "numerical failure" in err

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "neurodyn", "starvation", "--table1"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0 and proc.stdout.count("\n") == 9


class TestValidate:
    def test_unknown_parameter(self):
        with pytest.raises(cli.ValidationError, match="'bogus'"):
            cli.validate("trajectory", {"bogus": 1})

    def test_types(self):
        with pytest.raises(cli.ValidationError, match="'grid'"):
            cli.validate("phase-scan", {"grid": 4.5})
        with pytest.raises(cli.ValidationError, match="'class2'"):
            cli.validate("phase-scan", {"class2": "yes"})
        with pytest.raises(cli.ValidationError, match="'norm'"):
            cli.validate("phase-scan", {"norm": float("nan")})

    def test_defaults_filled(self):
        args = cli.validate("hinge-compare", {})
        assert args["u0"] == 0.1 and args["clipped"] is False


class TestConfig:
    def test_empty_is_noop(self, tmp_path):
        path = write_config(tmp_path / "c.json", [])
        assert cli.load_config(path) == []
        code, out, err = run_cli("run", str(path))
        assert code == 0 and out == "" and err == ""

    def test_missing_parameter_named(self, tmp_path):
        path = write_config(tmp_path / "c.json", [
            {"name": "ok", "command": "starvation", "parameters": {"table1": True}},
            {"name": "bad", "command": "trajectory", "parameters": {"kind": "hyperbolic", "z0": 1.0}},
        ])
        with pytest.raises(cli.ValidationError, match="'y0'"):
            cli.load_config(path)
        code, _, err = run_cli("run", str(path))
        assert code == 2 and "'y0'" in err
        assert not (tmp_path / "ok.csv").exists()

    def test_parse_error_has_location(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"version": 1,\n "scenarios": [\n  {"name": }\n ]}')
        with pytest.raises(cli.ValidationError, match="line 3"):
            cli.load_config(path)

    @pytest.mark.parametrize("doc", [{"version": 2, "scenarios": []}, {"version": 1, "extra": 1},
                                     {"version": 1, "scenarios": [{"name": "a", "command": "trajectory",
                                                                   "colour": "red"}]},
                                     {"version": 1, "scenarios": [{"command": "trajectory"}]},
                                     {"version": 1, "scenarios": [{"name": "a", "command": "plot"}]}])
    def test_structural_errors(self, tmp_path, doc):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(cli.ValidationError):
            cli.load_config(path)

    def test_parallel_runs_are_byte_identical(self, tmp_path, monkeypatch):
        scenarios = [
            {"name": f"s{i}", "command": "simulate", "output": f"s{i}.csv",
             "parameters": {"experiment": "history", "steps": 2000, "every": 100, "seed": 5, "lr": 1e-2}}
            for i in range(3)
        ] + [{"name": "deep", "command": "deep-logit", "output": "deep.json", "format": "json",
              "parameters": {"t_end": 2, "dt": 0.5}}]
        path = write_config(tmp_path / "c.json", scenarios)
        monkeypatch.setenv("NEURODYN_THREADS", "4")
        assert run_cli("run", str(path), "--out-dir", str(tmp_path / "a"))[0] == 0
        monkeypatch.setenv("NEURODYN_THREADS", "1")
        assert run_cli("run", str(path), "--out-dir", str(tmp_path / "b"))[0] == 0
        for name in ("s0.csv", "s1.csv", "s2.csv", "deep.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert (tmp_path / "a" / "s0.csv").read_bytes() == (tmp_path / "a" / "s2.csv").read_bytes()

    def test_thread_cap(self, monkeypatch):
        monkeypatch.setenv("NEURODYN_THREADS", "3")
        assert cli.thread_cap() == 3
        monkeypatch.setenv("NEURODYN_THREADS", "zero")
        assert cli.thread_cap() == 1

    def test_csv_floats_round_trip(self):
        table = cli.Table(["x"], [[0.1 + 0.2], [1e-300], [float("inf")]])
        lines = cli.render(table, "csv").splitlines()
        assert [float(v) for v in lines[1:]] == [0.1 + 0.2, 1e-300, float("inf")]


def test_shipped_figures_cover_every_operation(tmp_path, monkeypatch):
    calls = {}
    modules = [m for m in vars(neurodyn).values() if getattr(m, "__name__", "").startswith("neurodyn.")]
    for module, names in PUBLIC_OPERATIONS.items():
        for name in names:
            original = getattr(module, name)
            key = f"{module.__name__.split('.')[-1]}.{name}"
            calls[key] = 0

            def wrapper(*args, _orig=original, _key=key, **kwargs):
                calls[_key] += 1
                return _orig(*args, **kwargs)

            functools.update_wrapper(wrapper, original)
            for holder in modules + [neurodyn]:
                if getattr(holder, name, None) is original:
                    monkeypatch.setattr(holder, name, wrapper)
    monkeypatch.setenv("NEURODYN_THREADS", "4")
    scenarios = cli.load_config(FIGURES)
    assert scenarios, "figures.json has no scenarios"
    code, out, err = run_cli("run", str(FIGURES), "--out-dir", str(tmp_path))
    assert code == 0, err
    assert out.count("\n") == len(scenarios)
    for s in scenarios:
        assert (tmp_path / s.output_path).stat().st_size > 0
    missing = sorted(k for k, v in calls.items() if v == 0)
    assert not missing, f"figures.json never exercises: {missing}"


def test_dataset_side_output_lands_in_out_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    scenario = cli.make_scenario({
        "name": "ds", "command": "simulate", "output": "ds.csv",
        "parameters": {"experiment": "history", "steps": 10, "every": 5, "dataset_out": "ds.json"},
    })
    out = tmp_path / "results"
    cli.run_scenario(scenario, out)
    assert (out / "ds.json").exists() and (out / "ds.csv").exists()
    assert not (tmp_path / "ds.json").exists()
