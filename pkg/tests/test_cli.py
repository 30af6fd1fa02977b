import json

import pytest

from mbolab.cli import (
    EXIT_CONFIG,
    EXIT_INFEASIBLE,
    EXIT_OK,
    ConfigError,
    config_hash,
    load_config,
    main,
)


def test_load_config_and_overrides(tmp_path):
    cfg_file = tmp_path / "cfg.toml"
    cfg_file.write_text('n = 100\neps = 0.2\nscenario = "stationary-band"\n')
    cfg = load_config(cfg_file, {"n": 200, "h": None})
    assert cfg["n"] == 200  # flag wins
    assert cfg["eps"] == 0.2
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml", {})
    bad = tmp_path / "bad.toml"
    bad.write_text("n = [unclosed")
    with pytest.raises(ConfigError):
        load_config(bad, {})


def test_config_hash_stable():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_sample_command(tmp_path):
    out = tmp_path / "cloud.csv"
    rc = main(["sample", "-n", "50", "--seed", "1", "--output", str(out)])
    assert rc == EXIT_OK
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "x0,x1"
    assert len(lines) == 51


def test_sample_missing_n_is_config_error(tmp_path):
    rc = main(["sample", "--output", str(tmp_path / "c.csv")])
    assert rc == EXIT_CONFIG


def test_build_graph_command(tmp_path):
    out = tmp_path / "graph.csv"
    rc = main(["build-graph", "-n", "200", "--seed", "1", "--eps", "0.2", "--output", str(out)])
    assert rc == EXIT_OK
    assert out.exists()
    assert out.with_suffix(".degrees.csv").exists()


def test_spectrum_command_caches(tmp_path, capsys):
    out = tmp_path / "spec.csv"
    args = [
        "spectrum", "-n", "200", "--seed", "1", "--eps", "0.2", "-K", "8",
        "--cache-dir", str(tmp_path / "cache"), "--output", str(out),
    ]
    assert main(args) == EXIT_OK
    assert "cache miss" in capsys.readouterr().out
    assert main(args) == EXIT_OK
    assert "cache hit" in capsys.readouterr().out
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "l,eigenvalue,residual"
    assert len(lines) == 9


def test_spectrum_K_too_large_is_config_error(tmp_path):
    rc = main([
        "spectrum", "-n", "50", "--seed", "1", "--eps", "0.3", "-K", "500",
        "--cache-dir", str(tmp_path), "--output", str(tmp_path / "s.csv"),
    ])
    assert rc == EXIT_CONFIG


def test_run_stationary_band_scenario(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(
        'scenario = "stationary-band"\n'
        "n = 600\neps = 0.18\nh = 0.02\nsteps = 3\nseed = 2\n"
        f'output_dir = "{tmp_path / "out"}"\n'
        f'cache_dir = "{tmp_path / "cache"}"\n'
    )
    rc = main(["run", "--config", str(cfg)])
    assert rc == EXIT_OK
    out = tmp_path / "out"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["results"][0]["steps"] == 3
    assert "config_hash" in manifest
    assert (out / "trace_seed2.csv").exists()


def test_run_unknown_scenario_is_config_error(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('scenario = "nonsense"\nn = 100\neps = 0.2\nh = 0.02\n')
    assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG


def test_validate_schedule_admissible(capsys):
    rc = main(["validate-schedule", "-k", "2", "-s", "0.25", "-q", "1.5", "-n", "2000", "--c-h", "0.06"])
    assert rc == EXIT_INFEASIBLE  # admissible but eps below the sampling lower bound
    out = capsys.readouterr().out
    assert "inside the admissible" in out


def test_validate_schedule_inadmissible(capsys):
    rc = main(["validate-schedule", "-k", "2", "-s", "0.75", "-q", "4"])
    assert rc == EXIT_INFEASIBLE
    assert "outside the admissible" in capsys.readouterr().err


def test_validate_schedule_csv(capsys):
    rc = main(["validate-schedule", "-k", "2", "-s", "0.25", "-q", "1.5", "-n", "100", "1000", "--csv"])
    assert rc == EXIT_INFEASIBLE
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0].startswith("n,K,clamped,alpha,beta,h,eps")
    assert len(lines) == 3


def test_study_command(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(
        'scenario = "stationary-band"\n'
        "ns = [300, 500]\nseeds = [0]\neps = 0.2\nh = 0.02\nsteps = 2\n"
        f'output_dir = "{tmp_path / "out"}"\n'
        f'cache_dir = "{tmp_path / "cache"}"\n'
    )
    rc = main(["study", "--config", str(cfg)])
    assert rc == EXIT_OK
    out = tmp_path / "out"
    study = (out / "study.csv").read_text().strip().split("\n")
    assert len(study) == 3
    long = (out / "study_long.csv").read_text().strip().split("\n")
    assert long[0] == "metric,n,eps,h,K,seed,value"
    assert len(long) > 3


def test_report_region(tmp_path):
    rc = main(["report", "--region", "-k", "2", "--output-dir", str(tmp_path)])
    assert rc == EXIT_OK
    assert (tmp_path / "parameter_region.csv").exists()
    assert (tmp_path / "plot_parameter_region.py").exists()


def test_report_nothing_requested(tmp_path):
    assert main(["report", "--output-dir", str(tmp_path)]) == EXIT_CONFIG


def test_report_bad_trace_schema(tmp_path):
    bad = tmp_path / "trace.csv"
    bad.write_text("foo,bar\n1,2\n")
    assert main(["report", "--trace", str(bad), "--output-dir", str(tmp_path)]) == EXIT_CONFIG


def test_report_trace_and_study(tmp_path):
    trace = tmp_path / "trace.csv"
    trace.write_text(
        "step,time,ones_count,energy,changed_nodes\n"
        "0,0.0,100,,0\n1,0.05,80,,20\n2,0.1,60,,20\n3,0.15,40,,20\n"
    )
    rc = main(["report", "--trace", str(trace), "--r0", "0.3", "--output-dir", str(tmp_path / "r")])
    assert rc == EXIT_OK
    assert (tmp_path / "r" / "radius_vs_time.csv").exists()
    study = tmp_path / "study.csv"
    study.write_text("n,seed,normalized\n100,0,0.5\n1000,0,0.2\n")
    rc = main(["report", "--study", str(study), "--output-dir", str(tmp_path / "r2")])
    assert rc == EXIT_OK
    assert (tmp_path / "r2" / "error_vs_n.csv").exists()
    assert (tmp_path / "r2" / "plot_error_vs_n.py").exists()
