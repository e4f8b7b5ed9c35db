import json
import os

import numpy as np
import pytest

from ocolc.cli import main, load_trace_csv, read_config_file


def run_cli(*args):
    return main(list(args))


def test_run_writes_trace_and_summary(tmp_path):
    out = tmp_path / "o"
    code = run_cli(
        "run", "--problem", "toy", "--algo", "clipped-ogd", "--T", "400",
        "--beta", "0.5", "--seed", "1", "--out", str(out),
    )
    assert code == 0
    assert (out / "trace.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["T"] == 400
    assert summary["algo"] == "clipped-ogd"
    assert np.isfinite(summary["regret"])
    assert summary["agg_sum_clip"] >= 0.0
    assert summary["eta"] > 0 and summary["sigma"] > 0
    cols = load_trace_csv(out / "trace.csv")
    assert set(cols) == {"t", "fx", "g_max", "g_clip", "lambda_norm", "x_norm"}
    assert cols["t"].size == 400


def test_run_missing_T_is_usage_error(tmp_path, capsys):
    code = run_cli("run", "--problem", "toy", "--algo", "clipped-ogd", "--out", str(tmp_path))
    assert code == 2
    assert "T" in capsys.readouterr().err


def test_run_unknown_algo_is_usage_like_failure(tmp_path):
    code = run_cli(
        "run", "--problem", "toy", "--algo", "wat", "--T", "10", "--out", str(tmp_path)
    )
    assert code != 0


def test_run_strong_on_doubly_stochastic_uses_H1(tmp_path):
    out = tmp_path / "o"
    code = run_cli(
        "run", "--problem", "doubly-stochastic", "--d", "4", "--algo", "strong",
        "--T", "50", "--seed", "2", "--out", str(out),
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["eta"] is None  # time-varying schedule, no constant stepsize
    assert summary["problem"] == "doubly-stochastic"


def test_run_per_constraint_columns(tmp_path):
    out = tmp_path / "o"
    code = run_cli(
        "run", "--problem", "dispatch", "--algo", "clipped-ogd", "--T", "20",
        "--out", str(out), "--per-constraint-columns",
    )
    assert code == 0
    cols = load_trace_csv(out / "trace.csv")
    assert "g_1" in cols and "g_7" in cols


def test_trace_csv_roundtrip_bit_identical(tmp_path):
    from ocolc import AlgoConfig, run as run_algo, toy_problem
    from ocolc.cli import write_trace_csv

    tr = run_algo(toy_problem(), AlgoConfig("clipped-ogd", T=64), seed=9)
    path = tmp_path / "t.csv"
    write_trace_csv(tr, path)
    cols = load_trace_csv(path)
    assert np.array_equal(cols["fx"], tr.fx)
    assert np.array_equal(cols["g_max"], tr.g.max(axis=1))
    assert np.array_equal(cols["lambda_norm"], np.linalg.norm(tr.lam, axis=1))


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# comment\nproblem=toy\nalgo=clipped-ogd\nT=60\nseed=3\n")
    out = tmp_path / "o"
    assert run_cli("run", "--config", str(cfg), "--out", str(out)) == 0
    assert json.loads((out / "summary.json").read_text())["T"] == 60
    # explicit flag wins over the file
    assert run_cli("run", "--config", str(cfg), "--T", "30", "--out", str(out)) == 0
    assert json.loads((out / "summary.json").read_text())["T"] == 30


def test_read_config_rejects_malformed(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("problem toy\n")
    with pytest.raises(ValueError, match="key=value"):
        read_config_file(cfg)


def test_sweep_cardinality_and_determinism(tmp_path):
    out = tmp_path / "o"
    args = (
        "sweep", "--problem", "toy", "--T-grid", "100,200",
        "--algos", "ogd,a-ogd,clipped-ogd", "--seeds", "2", "--out", str(out),
    )
    assert run_cli(*args) == 0
    body1 = (out / "sweep.csv").read_bytes()
    lines = body1.decode().strip().splitlines()
    assert len(lines) == 1 + 3 * 2 * 2  # header + algos * horizons * seeds
    assert lines[0] == "algo,T,seed,regret,sum_g,sum_clip,sum_clip_sq,max_step_violation"
    stats = (out / "sweep_stats.csv").read_text().strip().splitlines()
    assert len(stats) == 1 + 3 * 2
    # byte-identical on rerun
    assert run_cli(*args) == 0
    assert (out / "sweep.csv").read_bytes() == body1


def test_sweep_parallel_matches_serial(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    base = (
        "sweep", "--problem", "toy", "--T-grid", "100,200",
        "--algos", "clipped-ogd,ogd", "--seeds", "2",
    )
    assert run_cli(*base, "--out", str(out1)) == 0
    assert run_cli(*base, "--out", str(out2), "--jobs", "2") == 0
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()


def test_oracle_caches(tmp_path, capsys):
    out = tmp_path / "o"
    args = ("oracle", "--problem", "toy", "--seed", "4", "--T", "150", "--out", str(out))
    assert run_cli(*args) == 0
    first = capsys.readouterr().out
    assert first.startswith("solved")
    assert run_cli(*args) == 0
    assert capsys.readouterr().out.startswith("cached")


def test_oracle_dispatch_residual(tmp_path, capsys):
    out = tmp_path / "o"
    code = run_cli(
        "oracle", "--problem", "dispatch", "--seed", "0", "--T", "100", "--out", str(out)
    )
    assert code == 0
    blobs = [f for f in os.listdir(out) if f.startswith("oracle-")]
    blob = json.loads((out / blobs[0]).read_text())
    assert blob["residual"] <= 1e-6


def test_dispatch_demand_csv_flag(tmp_path):
    demand = tmp_path / "d.csv"
    demand.write_text("t,demand\n" + "\n".join(f"{i},{30 + i % 5}" for i in range(40)) + "\n")
    out = tmp_path / "o"
    code = run_cli(
        "run", "--problem", "dispatch", "--demand-csv", str(demand),
        "--demand-rescale", "0.5", "--algo", "clipped-ogd", "--T", "30", "--out", str(out),
    )
    assert code == 0


def test_outdir_env_default(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("OCOLC_OUTDIR", str(tmp_path / "envout"))
    code = run_cli("run", "--problem", "toy", "--algo", "clipped-ogd", "--T", "20")
    assert code == 0
    assert (tmp_path / "envout" / "summary.json").exists()
