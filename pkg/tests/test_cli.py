import csv
import json

import numpy as np
import pytest

from matkaczmarz.cli import main, run_bench
from matkaczmarz.problems import load_instance


def read_history(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iter", "rrn", "elapsed_seconds"]
    return rows[1:]


def test_generate_is_deterministic(tmp_path, capsys):
    assert main(["--seed", "7", "--out", str(tmp_path / "a"), "generate", "dense", "40", "10", "20"]) == 0
    assert main(["--seed", "7", "--out", str(tmp_path / "b"), "generate", "dense", "40", "10", "20"]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == ["A.csv", "B.csv", "C.csv", "Xstar.csv", "meta.json"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    assert "dense-40x10x20" in capsys.readouterr().out


def test_bad_family_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["--out", str(tmp_path), "generate", "nope", "4", "2", "4"])
    assert exc.value.code == 1


def test_solve_from_directory_and_inline(tmp_path):
    main(["--seed", "1", "--out", str(tmp_path / "inst"), "generate", "dense", "20", "5", "10"])
    out = tmp_path / "run"
    code = main(["--seed", "3", "--out", str(out), "solve", "--instance", str(tmp_path / "inst")])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["converged"] and summary["error_to_oracle"] < 1e-3
    hist = read_history(out / "history.csv")
    assert int(hist[-1][0]) == summary["iters"]
    assert float(hist[-1][1]) <= 1e-5
    code = main(["--seed", "1", "--out", str(tmp_path / "inline"), "solve", "--family", "dense",
                 "--dims", "20", "5", "10", "--tol", "0", "--max-iters", "50"])
    assert code == 2


def test_solve_reduction_summary(tmp_path):
    base = ["--seed", "2", "solve", "--family", "dense", "--dims", "20", "5", "10"]
    main(["--out", str(tmp_path / "me")] + base)
    main(["--out", str(tmp_path / "pm")] + base + ["--method", "pm", "--alpha", "1", "--beta", "0"])
    me = json.loads((tmp_path / "me" / "summary.json").read_text())
    pm = json.loads((tmp_path / "pm" / "summary.json").read_text())
    for key in ("iters", "final_rrn", "error_to_oracle", "converged"):
        assert me[key] == pm[key]


def test_solve_reports_instance_violation(tmp_path, capsys):
    d = tmp_path / "bad"
    main(["--out", str(d), "generate", "dense", "6", "2", "4"])
    (d / "A.csv").write_text("# rows=6\n# cols=2\n" + "0,0\n" + "1,1\n" * 5)
    assert main(["--out", str(tmp_path / "o"), "solve", "--instance", str(d)]) == 1
    assert "zero row" in capsys.readouterr().err


def test_bench_table(tmp_path):
    code = main(["--seed", "10", "--out", str(tmp_path), "bench", "--dims", "20", "5", "10",
                 "--repeats", "3", "--thetas", "0.5,0.9"])
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "bench.csv")))
    assert [r["method"] for r in rows] == ["me-rgrk", "pm-rgrk", "nm-rgrk"] * 2
    assert all(r["su"] for r in rows)
    again = run_bench("dense", (20, 5, 10), ["me", "pm", "nm"] and ["me-rgrk"], [0.5], 3, 10)
    assert again[0].it == int(rows[0]["it"])


def test_bench_single_repeat_matches_solve(tmp_path):
    rows = run_bench("dense", (20, 5, 10), ["nm-rgrk"], [0.9], 1, seed_base=4)
    main(["--seed", "4", "--out", str(tmp_path), "solve", "--family", "dense", "--dims", "20", "5", "10",
          "--method", "nm"])
    s = json.loads((tmp_path / "summary.json").read_text())
    assert rows[0].it_mean == rows[0].it_median == s["iters"]
    assert rows[0].seeds == [4]


def test_bounds(tmp_path):
    code = main(["--out", str(tmp_path), "bounds", "--family", "dense", "--dims", "20", "5", "10",
                 "--alphas", "0.9,2.5", "--betas", "1e-5,0.3"])
    assert code == 0
    rep = json.loads((tmp_path / "bounds.json").read_text())
    assert 0 < rep["spectral"]["rho_tilde"] <= 1
    for block in rep["methods"].values():
        for d in block["grid"]:
            if d["alpha"] == 2.5:
                assert not d["params_admissible"]
            if d["params_admissible"]:
                assert d["q1"] < 1
    assert (tmp_path / "bounds.csv").exists()


def test_bounds_identity_instance(tmp_path):
    d = tmp_path / "eye"
    d.mkdir()
    for name in ("A", "B", "C"):
        (d / f"{name}.csv").write_text("# rows=3\n# cols=3\n1,0,0\n0,1,0\n0,0,1\n")
    main(["--out", str(tmp_path / "o"), "bounds", "--instance", str(d)])
    rep = json.loads((tmp_path / "o" / "bounds.json").read_text())
    assert rep["spectral"]["rho_tilde"] == pytest.approx(1 / 9)


def test_fit_artifacts(tmp_path):
    args = ["--seed", "5", "fit", "--surface", "2", "--m", "24", "--p", "16", "--n", "12",
            "--method", "nm", "--tol", "0.05"]
    assert main(["--out", str(tmp_path / "a")] + args) == 0
    main(["--out", str(tmp_path / "b")] + args)
    for name in ("data.csv", "fit.obj", "fit.csv", "history.csv", "summary.json"):
        assert (tmp_path / "a" / name).exists()
    ha = [r[:2] for r in read_history(tmp_path / "a" / "history.csv")]
    hb = [r[:2] for r in read_history(tmp_path / "b" / "history.csv")]
    assert ha == hb
    s = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert s["converged"] and s["final_rrn"] <= 0.05
    with pytest.raises(SystemExit):
        main(["--out", str(tmp_path), "fit", "--surface", "x"])
    assert main(["--out", str(tmp_path / "c"), "fit", "--surface", "3"]) == 1


def test_history_round_trip_matches_summary(tmp_path):
    main(["--seed", "8", "--out", str(tmp_path), "solve", "--family", "lowrank", "--dims", "16", "6", "8",
          "--r1", "4", "--r2", "4", "--method", "pm"])
    s = json.loads((tmp_path / "summary.json").read_text())
    hist = read_history(tmp_path / "history.csv")
    assert float(repr(s["final_rrn"])) == s["final_rrn"]
    assert int(hist[-1][0]) == s["iters"]


def test_invariant_breach_exit_code(tmp_path, monkeypatch):
    import matkaczmarz.solver as solver

    monkeypatch.setattr(solver, "DRIFT_LIMIT", -1.0)
    code = main(["--out", str(tmp_path), "solve", "--family", "dense", "--dims", "20", "5", "10",
                 "--refresh-period", "5", "--tol", "0", "--max-iters", "20"])
    assert code == 3
