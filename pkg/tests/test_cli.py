from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from polymerlab.cli import (ConfigError, ExperimentConfig, crossover_bracket, load_config, main,
                            parse_config, resolve_workers)


def write(tmp: Path, name: str, obj) -> str:
    p = tmp / name
    p.write_text(json.dumps(obj), encoding="utf-8")
    return str(p)


def read_csv(p: Path) -> list[dict]:
    with open(p, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def snapshot(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_defaults_and_schema():
    cfg = ExperimentConfig()
    assert cfg.betas == [1.0] and cfg.seeds.replica_count == 8 and cfg.k_top == 16
    assert cfg.spec.kind == "gaussian"
    cfg = parse_config({"beta_grid": [0.1, 0.2], "disorder": {"kind": "table", "values": [0, 1],
                                                              "probabilities": [0.5, 0.5]}})
    assert cfg.betas == [0.1, 0.2] and cfg.spec.kind == "table"


@pytest.mark.parametrize("obj,path", [
    ({"beta_grid": [0.5, 0.2]}, "beta_grid"),
    ({"beta_grid": []}, "beta_grid"),
    ({"seeds": {"replica_count": 0}}, "seeds.replica_count"),
    ({"disorder": {"kind": "bernoulli_pm", "p": 1.5}}, "disorder.bernoulli_pm.p"),
    ({"eps_grid": [0.1, 0.1]}, "eps_grid"),
    ({"d": 0}, "d"),
    ({"n_stepz": 3}, "n_stepz"),
    ({"delta_grid": [0.5]}, "<root>"),
])
def test_validation_messages_carry_paths(obj, path):
    with pytest.raises(ConfigError) as e:
        parse_config(obj)
    assert path in str(e.value)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_workers_env(monkeypatch):
    monkeypatch.setenv("POLYMERLAB_WORKERS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(2) == 2
    monkeypatch.setenv("POLYMERLAB_WORKERS", "x")
    with pytest.raises(ConfigError):
        resolve_workers(None)
    monkeypatch.delenv("POLYMERLAB_WORKERS")
    assert resolve_workers(None) == 1


def test_simulate_beta_zero_and_determinism(tmp_path):
    cfg = write(tmp_path, "c.json", {"beta": 0.0, "n_steps": 15,
                                     "seeds": {"base_seed": 4, "replica_count": 8},
                                     "thinning": 5, "output": {"format": "both", "snapshots": True}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "1"]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "c"), "--workers", "8"]) == 0
    a, b, c = (snapshot(tmp_path / x) for x in "abc")
    assert a == b == c
    rows = read_csv(tmp_path / "a" / "trajectory_beta=0.0_r0000.csv")
    assert all(float(r["F"]) == 0.0 for r in rows)
    assert "trajectory_beta=0.0_r0007.ndjson" in a
    assert "trajectory_beta=0.0_r0000_snapshots.ndjson" in a


def test_simulate_energy_csv(tmp_path):
    cfg = write(tmp_path, "c.json", {"beta": 0.5, "n_steps": 5, "seeds": {"replica_count": 2},
                                     "energy": {"trajectories": 4, "replicas": 8}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "energy_beta=0.5.csv")
    assert list(rows[0]) == ["step", "mean", "stderr", "replicas", "analytic"]
    assert rows[0]["analytic"] != "" and rows[1]["analytic"] == ""


def test_scan(tmp_path):
    cfg = write(tmp_path, "s.json", {"beta_grid": [0.0, 0.5, 1.0, 2.0], "n_steps": 200,
                                     "seeds": {"replica_count": 6}, "delta_grid": [0.5],
                                     "K_grid": [20], "cesaro_checkpoints": [50, 200]})
    assert main(["scan", "--config", cfg, "--out", str(tmp_path / "s"), "--workers", "2"]) == 0
    rows = read_csv(tmp_path / "s" / "scan.csv")
    lam = [float(r["lambda_hat"]) for r in rows]
    se = [float(r["lambda_stderr"]) for r in rows]
    assert lam[0] == 0.0
    assert all(l >= -4 * s for l, s in zip(lam, se))
    assert all(b - a > 0 for a, b in zip(lam, lam[1:]))
    assert "cesaro_G@delta=0.5,K=20" in rows[0] and "cesaro_max@n=200" in rows[0]
    summary = json.loads((tmp_path / "s" / "scan_summary.json").read_text())
    assert summary["crossover"]["upper"] is not None


def test_crossover_bracket_is_a_bracket():
    class R:
        def __init__(self, b, l, s):
            self.beta, self.lambda_hat, self.lambda_stderr = b, l, s
    res = [R(0.1, 0.0, 0.01), R(0.2, 0.01, 0.01), R(0.4, 0.2, 0.01), R(0.8, 0.5, 0.01)]
    br = crossover_bracket(res)
    assert (br["lower"], br["upper"]) == (0.2, 0.4)


def test_profiles_fixtures(tmp_path):
    assert main(["profiles", "--out", str(tmp_path / "q")]) == 0
    q = json.loads((tmp_path / "q" / "profile.json").read_text())
    assert q == {"d": 1, "parts": [{"label": 0, "atoms": [[0, 0.5]]}]}
    cfg = write(tmp_path, "r.json", {"profiles": {"fixture": "r"}})
    assert main(["profiles", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    r = json.loads((tmp_path / "r" / "profile.json").read_text())
    assert sorted(len(p["atoms"]) for p in r["parts"]) == [1, 1, 2]


def test_profiles_from_ndjson(tmp_path):
    lines = [json.dumps({"atoms": [[0, 0.5], [n, 0.5]]}) for n in (40, 80, 120)]
    src = tmp_path / "seq.ndjson"
    src.write_text("\n".join(lines) + "\n", encoding="utf-8")
    cfg = write(tmp_path, "p.json", {"profiles": {"input": str(src)}})
    assert main(["profiles", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    out = json.loads((tmp_path / "o" / "profile.json").read_text())
    assert len(out["parts"]) == 2
    src.write_text("not json\n", encoding="utf-8")
    assert main(["profiles", "--config", cfg, "--out", str(tmp_path / "o2")]) == 2


def test_metric_check(tmp_path):
    cfg = write(tmp_path, "m.json", {"metric_check": {"cases": 150, "d": 2}})
    assert main(["metric-check", "--config", cfg, "--out", str(tmp_path / "m"), "--workers", "2"]) == 0
    rows = read_csv(tmp_path / "m" / "metric_oracle.csv")
    assert list(rows[0]) == ["case_id", "d_exact", "d_upper", "gap", "n_atoms_f", "n_atoms_g"]
    assert len(rows) == 150
    s = json.loads((tmp_path / "m" / "metric_check.json").read_text())
    assert s["triangle_violations"] == 0 and s["symmetry_violations"] == 0
    assert s["upper_below_exact"] == 0


def test_fixed_point(tmp_path):
    cfg = write(tmp_path, "f.json", {"beta": 1.0, "n_steps": 17, "seeds": {"replica_count": 2},
                                     "fixed_point": {"probes": [0, 4, 16]}})
    assert main(["fixed-point", "--config", cfg, "--out", str(tmp_path / "f"), "--workers", "2"]) == 0
    rows = read_csv(tmp_path / "f" / "residual_beta=1.0.csv")
    assert list(rows[0]) == ["n", "residual", "flagged_upper_bound", "seed"]
    assert [r["n"] for r in rows] == ["0", "4", "16"] * 2
    assert all(r["flagged_upper_bound"] in ("true", "false") for r in rows)
    bad = write(tmp_path, "g.json", {"n_steps": 10, "fixed_point": {"probes": [0, 10]}})
    assert main(["fixed-point", "--config", bad, "--out", str(tmp_path / "g")]) == 2


def test_plot(tmp_path):
    data = tmp_path / "series.csv"
    data.write_text("n,a,b\n1,0.5,0.1\n2,0.3,\n4,0.2,0.05\n", encoding="utf-8")
    cfg = write(tmp_path, "p.json", {"plot": {"input": str(data), "x": "n", "y": ["a", "b"],
                                              "logx": True}})
    out = tmp_path / "o"
    assert main(["plot", "--config", cfg, "--out", str(out)]) == 0
    svg = (out / "series.svg").read_text(encoding="utf-8")
    assert 'version="1.1"' in svg and svg.lstrip().startswith("<?xml")
    first = (out / "series.svg").read_bytes()
    assert main(["plot", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "series.svg").read_bytes() == first


def test_plot_empty_csv_writes_nothing(tmp_path):
    data = tmp_path / "empty.csv"
    data.write_text("n,a\n", encoding="utf-8")
    cfg = write(tmp_path, "p.json", {"plot": {"input": str(data), "x": "n", "y": ["a"]}})
    out = tmp_path / "o"
    assert main(["plot", "--config", cfg, "--out", str(out)]) == 2
    assert not out.exists() or not any(out.iterdir())
    cfg = write(tmp_path, "q.json", {"plot": {"input": str(data), "x": "n", "y": ["zz"]}})
    assert main(["plot", "--config", cfg, "--out", str(out)]) == 2
