import json

import numpy as np
import pytest

from fracnls.cli import benchmark_systems, load_config, main

BASE = {
    "model": "dnls",
    "grid": {"a": -20.0, "b": 20.0, "M": 32, "N": 4, "t_final": 0.04,
             "alpha": 1.5, "rho": 2.0},
    "solver": {"kind": "cnas-gmres", "omega": 0.5, "tol": 1e-8},
}


def write_config(tmp_path, name="cfg.json", **overrides):
    cfg = json.loads(json.dumps(BASE))
    for key, val in overrides.items():
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_sha256=")
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return lines[0], header, rows


def strip_wall(header, rows):
    keep = [i for i, h in enumerate(header) if not h.startswith("wall")]
    return [[r[i] for i in keep] for r in rows]


# ---------------------------------------------------------------------------
# exit codes

def test_missing_config_exits_2(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "o")]) == 2


def test_invalid_json_exits_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["solve", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_unknown_model_exits_2(tmp_path):
    cfg = write_config(tmp_path, model="kdv")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_bad_threads_exits_2(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--threads", "0"]) == 2


def test_solver_failure_exits_3(tmp_path):
    cfg = write_config(tmp_path,
                       solver={"kind": "gmres", "tol": 1e-12, "max_it": 1})
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_evolve_failure_exits_3(tmp_path):
    cfg = write_config(tmp_path,
                       solver={"kind": "gmres", "tol": 1e-12, "max_it": 1})
    assert main(["evolve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_dense_spectrum_cap_exits_2(tmp_path):
    cfg = write_config(tmp_path, grid={"M": 2048},
                       spectrum={"mode": "dense"})
    assert main(["spectrum", "--config", str(cfg),
                 "--out", str(tmp_path / "o")]) == 2


# ---------------------------------------------------------------------------
# subcommand outputs

def test_solve_outputs(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    hashline, header, rows = read_csv(out / "solve.csv")
    assert header[:2] == ["field", "solver"]
    assert rows[0][0] == "u" and rows[0][1] == "cnas-gmres"
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["command"] == "solve"
    assert manifest["config_sha256"] in hashline
    assert manifest["outputs"] == ["solve.csv"]
    assert manifest["config"]["model"] == "dnls"
    assert "wall_time_s" in manifest


def test_sweep_outputs_and_manifest_minimum(tmp_path):
    cfg = write_config(tmp_path, sweep={"lo": 0.3, "hi": 0.5, "step": 0.1})
    out = tmp_path / "out"
    assert main(["sweep-omega", "--config", str(cfg), "--out", str(out)]) == 0
    _, header, rows = read_csv(out / "sweep.csv")
    assert header == ["omega", "it_total", "converged", "wall_ms"]
    assert len(rows) == 3
    manifest = json.loads((out / "run.json").read_text())
    its = [int(r[1]) for r in rows]
    assert manifest["min_it"] == min(its)
    lo_w, hi_w = manifest["argmin_omega_interval"]
    assert lo_w <= hi_w


def test_spectrum_dense_outputs(tmp_path):
    cfg = write_config(tmp_path, spectrum={"mode": "dense"})
    out = tmp_path / "out"
    assert main(["spectrum", "--config", str(cfg), "--out", str(out)]) == 0
    _, header, rows = read_csv(out / "spectrum.csv")
    assert header == ["matrix", "re", "im"]
    names = {r[0] for r in rows}
    assert {"R", "nass", "cnas", "circle_center", "circle_radius"} <= names
    # preconditioned eigenvalues stay inside the clustering circle
    manifest = json.loads((out / "run.json").read_text())
    sigma = manifest["sigma"]
    nass = np.array([[float(r[1]), float(r[2])] for r in rows if r[0] == "nass"])
    dist = np.hypot(nass[:, 0] - 1.0, nass[:, 1])
    assert np.max(dist) <= sigma + 1e-8


def test_spectrum_ritz_mode(tmp_path):
    cfg = write_config(tmp_path,
                       spectrum={"mode": "ritz", "arnoldi_steps": 20,
                                 "matrices": ["cnas"]})
    out = tmp_path / "out"
    assert main(["spectrum", "--config", str(cfg), "--out", str(out)]) == 0
    _, _, rows = read_csv(out / "spectrum.csv")
    assert sum(r[0] == "cnas" for r in rows) <= 20


def test_evolve_outputs(tmp_path):
    cfg = write_config(tmp_path, evolve={"snapshot_stride": 2})
    out = tmp_path / "out"
    assert main(["evolve", "--config", str(cfg), "--out", str(out)]) == 0
    _, header, rows = read_csv(out / "conservation.csv")
    assert header[:5] == ["n", "t", "Q1", "Q2", "E"]
    assert len(rows) >= 2
    # dnls: Q2 column is empty
    assert rows[0][3] == ""
    assert (out / "snapshots.csv").exists()
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["max_relerr_Q1"] < 1e-6
    assert set(manifest["outputs"]) == {"conservation.csv", "snapshots.csv"}


def test_bench_outputs_and_dense_cap_skip(tmp_path):
    cfg = write_config(tmp_path,
                       bench={"solvers": ["gmres", "cnas-gmres", "dense"],
                              "M": [16, 32], "dense_cap": 16})
    out = tmp_path / "out"
    assert main(["bench", "--config", str(cfg), "--out", str(out)]) == 0
    _, header, rows = read_csv(out / "bench.csv")
    assert header[0] == "solver"
    assert len(rows) == 5   # 3 solvers at M=16, dense skipped at M=32
    manifest = json.loads((out / "run.json").read_text())
    assert manifest["skipped"] == [
        {"solver": "dense", "M": 32, "reason": "dense capped at M<=16"}]


# ---------------------------------------------------------------------------
# determinism

def test_repeat_runs_identical_modulo_wall_time(tmp_path):
    cfg = write_config(tmp_path, sweep={"lo": 0.3, "hi": 0.5, "step": 0.1})
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["sweep-omega", "--config", str(cfg),
                     "--out", str(out), "--seed", "42"]) == 0
        outs.append(out)
    csvs = []
    manifests = []
    for out in outs:
        hashline, header, rows = read_csv(out / "sweep.csv")
        csvs.append((hashline, strip_wall(header, rows)))
        m = json.loads((out / "run.json").read_text())
        m.pop("wall_time_s")
        manifests.append(m)
    assert csvs[0] == csvs[1]
    assert manifests[0] == manifests[1]


def test_threads_do_not_change_results(tmp_path):
    cfg = write_config(tmp_path, sweep={"lo": 0.3, "hi": 0.6, "step": 0.1})
    results = []
    for name, threads in (("t1", "1"), ("t4", "4")):
        out = tmp_path / name
        assert main(["sweep-omega", "--config", str(cfg), "--out", str(out),
                     "--threads", threads]) == 0
        _, header, rows = read_csv(out / "sweep.csv")
        results.append(strip_wall(header, rows))
    assert results[0] == results[1]


# ---------------------------------------------------------------------------
# library-level helpers

def test_benchmark_systems_coupled_count(tmp_path):
    cfg_path = write_config(tmp_path, model="cnls",
                            grid={"beta": 1.0, "rho": 1.0})
    cfg = load_config(cfg_path)
    systems = benchmark_systems(cfg.grid, cfg.model)
    assert len(systems) == 2
    assert all(s.T.dim == cfg.grid.M for s in systems)


def test_load_config_rejects_bad_solver(tmp_path):
    from fracnls.cli import ConfigError
    p = write_config(tmp_path, solver={"tol": 2.0})
    with pytest.raises(ConfigError):
        load_config(p)
