import csv
import json
import statistics

import pytest

from cybercim.cli import EXIT_DIVERGENCE, EXIT_IO, EXIT_OK, EXIT_VALIDATION, cycle_table, main, parse_seeds


def run(args):
    return main([str(a) for a in args])


def load(path):
    data = json.loads(path.read_text())
    data.pop("timing")
    return data


def test_solve_bundled_sample(tmp_path):
    out = tmp_path / "r.json"
    assert run(["solve", "--seed", 7, "--out", out]) == EXIT_OK
    res = json.loads(out.read_text())
    assert "ber" in res["metric"]
    assert res["n"] == 16
    # default tiling for n=16 is (1, 16, 16): (16/16) * (16/16 + 32)
    assert res["config"]["tiling"] == {"p_b": 1, "p_r": 16, "p_c": 16}
    assert res["cycles_per_step"] == 33
    assert set(res["timing"]) == {"timestamp", "wall_ms"}
    assert len(res["energy_trace"]["steps"]) == 101


def test_solve_is_deterministic_and_replayable(tmp_path):
    a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    args = ["solve", "--seed", 3, "--algorithm", "closed-loop"]
    assert run(args + ["--out", a]) == EXIT_OK
    assert run(args + ["--out", b]) == EXIT_OK
    assert load(a) == load(b)
    assert run(["solve", "--config", a, "--out", c]) == EXIT_OK
    assert load(a) == load(c)


def test_solve_generated_cs_with_alternating(tmp_path):
    cfg = {
        "instance": {"generator": "cs-random", "n": 32, "alpha": 0.8, "a": 0.2, "zeta": 0.0},
        "algorithm": "alternating",
        "params": {"threshold": {"n_outer": 3}, "sor": {"n_step": 100}},
        "seed": 1,
    }
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run(["solve", "--config", tmp_path / "c.json", "--out", tmp_path / "r.json"]) == EXIT_OK
    res = json.loads((tmp_path / "r.json").read_text())
    assert "rmse" in res["metric"]
    assert len(res["outer"]) == 3
    assert res["config"]["params"]["alternating"]["r_init"] == "lasso"
    for e in res["outer"]:
        assert e["eta"] ** 2 == 2 * e["lam"]


def test_solve_sor_on_true_support(tmp_path):
    cfg = {"instance": {"generator": "cs-random", "n": 64, "alpha": 0.8, "a": 0.1, "zeta": 0.0},
           "algorithm": "sor", "seed": 2}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run(["solve", "--config", tmp_path / "c.json", "--out", tmp_path / "r.json"]) == EXIT_OK
    res = json.loads((tmp_path / "r.json").read_text())
    assert res["metric"]["rmse"] < 1e-3


def test_trajectory_output(tmp_path):
    assert run(["solve", "--trajectory", tmp_path / "t.csv", "--out", tmp_path / "r.json"]) == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "t.csv").open()))
    assert list(rows[0]) == ["step", "spin", "c", "s_or_e"]
    assert len(rows) == 102 * 16


def test_sor_on_ising_is_validation_error(tmp_path, capsys):
    assert run(["solve", "--algorithm", "sor"]) == EXIT_VALIDATION
    assert "instance" in capsys.readouterr().err


@pytest.mark.parametrize(
    "cfg,field",
    [
        ({"params": {"open-loop": {"dt": -1}}}, "params.open-loop"),
        ({"params": {"open-loop": {"bogus": 1}}}, "params.open-loop"),
        ({"seed": -4}, "seed"),
        ({"tiling": {"p_b": 1, "p_r": 5, "p_c": 16}}, "tiling"),
        ({"instance": {"generator": "cdma", "alpha": 0.01}}, "alpha"),
        ({"unknown": 1}, "config"),
    ],
)
def test_field_level_validation(tmp_path, capsys, cfg, field):
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run(["solve", "--config", tmp_path / "c.json"]) == EXIT_VALIDATION
    assert field in capsys.readouterr().err


def test_divergence_exit_code(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"params": {"open-loop": {"dt": 5.0, "p_max": 50.0}}}))
    assert run(["solve", "--config", tmp_path / "c.json"]) == EXIT_DIVERGENCE


def test_io_exit_codes(tmp_path):
    assert run(["solve", "--config", tmp_path / "missing.json"]) == EXIT_IO
    assert run(["solve", "--instance", tmp_path / "missing.ccim"]) == EXIT_IO
    (tmp_path / "broken.json").write_text("{not json")
    assert run(["solve", "--config", tmp_path / "broken.json"]) == EXIT_IO
    (tmp_path / "junk.ccim").write_bytes(b"junk")
    assert run(["solve", "--instance", tmp_path / "junk.ccim"]) == EXIT_IO


def test_gen_instance_then_solve(tmp_path):
    path = tmp_path / "i.ccim"
    assert run(["gen-instance", "--generator", "cs-random", "--n", 32, "--alpha", 0.8, "--a", 0.2,
                "--zeta", 0.0, "--seed", 4, "--out", path]) == EXIT_OK
    assert (tmp_path / "i.ccim.truth.csv").exists()
    cfg = {"instance": {"file": str(path)}, "algorithm": "alternating",
           "params": {"threshold": {"n_outer": 2}, "sor": {"n_step": 50}}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run(["solve", "--config", tmp_path / "c.json", "--out", tmp_path / "r.json"]) == EXIT_OK
    res = json.loads((tmp_path / "r.json").read_text())
    assert res["config"]["params"]["alternating"]["r_init"] == "zeros"
    assert "rmse" in res["metric"]


def test_metric_absent_without_truth(tmp_path):
    (tmp_path / "i.csv").write_text("0,1\n1,0\n0.5,-0.5\n")
    assert run(["solve", "--instance", tmp_path / "i.csv", "--out", tmp_path / "r.json"]) == EXIT_OK
    assert "metric" not in json.loads((tmp_path / "r.json").read_text())


def test_sweep_cdma_grid(tmp_path):
    cfg = {"instance": {"generator": "cdma", "n": 256, "zeta": 0.05},
           "algorithms": ["open-loop", "closed-loop"], "seeds": "0-19",
           "grid": {"param": "alpha", "values": [0.6, 0.7, 0.8]}}
    (tmp_path / "s.json").write_text(json.dumps(cfg))
    assert run(["sweep", "--config", tmp_path / "s.json", "--workers", 1, "--out", tmp_path / "a.csv"]) == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "a.csv").open()))
    assert len(rows) == 120
    assert all(r["status"] == "ok" for r in rows)
    for alpha in ("0.6", "0.7", "0.8"):
        med = {alg: statistics.median(float(r["metric"]) for r in rows
                                      if r["value"] == alpha and r["algorithm"] == alg)
               for alg in ("open-loop", "closed-loop")}
        assert med["closed-loop"] <= med["open-loop"]


def test_sweep_deterministic_across_worker_counts(tmp_path):
    cfg = {"instance": {"generator": "cdma", "n": 32, "zeta": 0.1},
           "algorithms": ["open-loop", "closed-loop"], "seeds": [0, 1, 2],
           "grid": {"param": "alpha", "values": [0.6, 0.9]}}
    (tmp_path / "s.json").write_text(json.dumps(cfg))
    bodies = []
    for w, name in ((1, "a.csv"), (2, "b.csv")):
        assert run(["sweep", "--config", tmp_path / "s.json", "--workers", w, "--out", tmp_path / name]) == EXIT_OK
        rows = list(csv.DictReader((tmp_path / name).open()))
        for r in rows:
            r.pop("wall_ms")
        bodies.append(rows)
    assert bodies[0] == bodies[1]
    assert [(r["value"], r["algorithm"], r["seed"]) for r in bodies[0]][:4] == [
        ("0.6", "open-loop", "0"), ("0.6", "open-loop", "1"), ("0.6", "open-loop", "2"), ("0.6", "closed-loop", "0")]


def test_sweep_records_partial_failures(tmp_path):
    cfg = {"instance": {"generator": "cdma", "n": 16, "alpha": 1.0}, "seeds": [0, 1],
           "grid": {"param": "open-loop.dt", "values": [0.1, 30.0]}}
    (tmp_path / "s.json").write_text(json.dumps(cfg))
    assert run(["sweep", "--config", tmp_path / "s.json", "--workers", 1, "--out", tmp_path / "a.csv"]) == EXIT_OK
    status = [r["status"] for r in csv.DictReader((tmp_path / "a.csv").open())]
    assert status[:2] == ["ok", "ok"]
    assert all(s.startswith("diverged") for s in status[2:])


def test_sweep_threshold_grid(tmp_path):
    cfg = {"instance": {"generator": "cs-random", "n": 32, "alpha": 0.8, "a": 0.2}, "algorithm": "alternating",
           "seeds": [0], "grid": {"param": "eta", "values": [0.1, 0.3]},
           "params": {"threshold": {"n_outer": 2}, "sor": {"n_step": 50}}}
    (tmp_path / "s.json").write_text(json.dumps(cfg))
    assert run(["sweep", "--config", tmp_path / "s.json", "--workers", 1, "--out", tmp_path / "a.csv"]) == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "a.csv").open()))
    assert [r["value"] for r in rows] == ["0.1", "0.3"]
    assert all(r["status"] == "ok" for r in rows)


def test_sweep_validation(tmp_path):
    (tmp_path / "e.json").write_text(json.dumps({"seeds": [1], "grid": {"param": "alpha", "values": []}}))
    assert run(["sweep", "--config", tmp_path / "e.json"]) == EXIT_VALIDATION
    (tmp_path / "f.json").write_text(json.dumps({"seeds": []}))
    assert run(["sweep", "--config", tmp_path / "f.json"]) == EXIT_VALIDATION


def test_workers_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("CCIM_WORKERS", "zero")
    (tmp_path / "s.json").write_text(json.dumps({"seeds": [0]}))
    assert run(["sweep", "--config", tmp_path / "s.json"]) == EXIT_VALIDATION
    monkeypatch.setenv("CCIM_WORKERS", "1")
    assert run(["sweep", "--config", tmp_path / "s.json", "--out", tmp_path / "o.csv"]) == EXIT_OK


def test_parse_seeds():
    assert parse_seeds("0-3,10") == [0, 1, 2, 3, 10]
    assert parse_seeds("5") == [5]


def test_estimate_cycles_table(capsys):
    assert run(["estimate-cycles", "--n", 4096, "--algorithm", "open-loop", "--clock-mhz", 30]) == EXIT_OK
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert rows[0]["cycles"] == "10240"
    # 10240 cycles at 30 MHz; the hardware measured 341.5 us
    assert float(rows[0]["time_us"]) == pytest.approx(341.333, abs=1e-3)
    assert abs(float(rows[0]["time_us"]) - 341.5) < 0.2


def test_estimate_cycles_sb_and_sor():
    assert cycle_table([2048], "sb")[0]["cycles"] == 576
    assert cycle_table([1024], "sor")[0]["cycles"] == 576


def test_estimate_cycles_divisibility(capsys):
    assert run(["estimate-cycles", "--n", 1000]) == EXIT_VALIDATION
    assert run(["estimate-cycles", "--n", 64, "--p-r", 7]) == EXIT_VALIDATION
    assert run(["estimate-cycles", "--n", 64, "--clock-mhz", 0]) == EXIT_VALIDATION


def test_unknown_preset(capsys):
    assert run(["solve", "--preset", "nope"]) == EXIT_VALIDATION
    assert "preset" in capsys.readouterr().err


def test_f64_precision_changes_nothing_structural(tmp_path):
    assert run(["solve", "--precision", "f64", "--seed", 7, "--out", tmp_path / "r.json"]) == EXIT_OK
    res = json.loads((tmp_path / "r.json").read_text())
    assert res["config"]["precision"] == "f64"
    assert res["metric"]["ber"] == 0.0
