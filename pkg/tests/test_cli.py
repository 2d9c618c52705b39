import csv
import json
import subprocess
import sys

import pytest

from foursplit.bench import CSV_COLUMNS
from foursplit.cli import main


@pytest.fixture
def instance(tmp_path):
    path = tmp_path / "p.json"
    assert main(["gen", "--seed", "4", "--n", "20", "--q", "7", "--out", str(path)]) == 0
    return path


def test_gen_writes_schema(instance, tmp_path):
    d = json.loads(instance.read_text())
    assert (d["n"], d["m"], d["q"], d["seed"]) == (20, 20, 7, 4)
    assert d["alpha"] == 0.05 and set(d["a"]) == {9.0}
    again = tmp_path / "q.json"
    main(["gen", "--seed", "4", "--n", "20", "--q", "7", "--out", str(again)])
    assert again.read_bytes() == instance.read_bytes()


def test_gen_options(tmp_path):
    out = tmp_path / "r.json"
    assert main(["gen", "--seed", "1", "--n", "6", "--m", "9", "--q", "2",
                 "--alpha", "0.3", "--a", "2.5", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert (d["m"], d["alpha"], d["a"][0]) == (9, 0.3, 2.5)


@pytest.mark.parametrize("alg", ["fb4op", "fbhf-ls", "tseng-ls"])
def test_solve_each_algorithm(instance, tmp_path, alg, capsys):
    out = tmp_path / "s.json"
    assert main(["solve", "--instance", str(instance), "--algorithm", alg,
                 "--tol", "1e-7", "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["algorithm"] == alg and res["converged"] and res["final_residual"] <= 1e-7
    assert len(res["x"]) == 20 and len(res["u"]) == 7 and len(res["v"]) == 20
    assert set(res["kkt"]) >= {"stationarity", "primal_feas", "dual_feas", "complementarity"}
    assert "iterations=" in capsys.readouterr().out


def test_solve_history(instance, tmp_path):
    out, hist = tmp_path / "s.json", tmp_path / "h.csv"
    assert main(["solve", "--instance", str(instance), "--out", str(out), "--history", str(hist)]) == 0
    rows = list(csv.DictReader(hist.open()))
    assert len(rows) == json.loads(out.read_text())["iterations"]
    assert rows[0]["n"] == "0" and float(rows[0]["gamma"]) > 0


def test_solve_literal_flags(instance, tmp_path):
    out = tmp_path / "s.json"
    code = main(["solve", "--instance", str(instance), "--out", str(out),
                 "--paper-literal-grad", "--paper-literal-gamma"])
    assert code in (0, 3)
    assert "iterations" in json.loads(out.read_text())


def test_solve_line_search_failure_exits_3(instance, tmp_path):
    out = tmp_path / "s.json"
    assert main(["solve", "--instance", str(instance), "--sigma", "0.99", "--out", str(out)]) == 3
    assert json.loads(out.read_text())["error"]


def test_invalid_input_exits_2(tmp_path, instance):
    out = tmp_path / "s.json"
    assert main(["solve", "--instance", str(tmp_path / "missing.json"), "--out", str(out)]) == 2
    broken = tmp_path / "b.json"
    broken.write_text("{not json")
    assert main(["solve", "--instance", str(broken), "--out", str(out)]) == 2
    d = json.loads(instance.read_text())
    d["y0"][0] = -1.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    assert main(["solve", "--instance", str(bad), "--out", str(out)]) == 2
    assert main(["solve", "--instance", str(instance), "--algorithm", "admm", "--out", str(out)]) == 2
    assert main(["gen", "--seed", "1", "--n", "0", "--q", "1", "--out", str(out)]) == 2
    assert main(["solve", "--instance", str(instance), "--sigma", "1.5", "--out", str(out)]) == 2
    assert main(["bench", "--csv", str(out), "--algorithms", "nope", "--seeds", "1"]) == 2
    assert main([]) == 2


def test_bench_outputs(tmp_path, capsys):
    out, table = tmp_path / "b.csv", tmp_path / "t.txt"
    code = main(["bench", "--sizes", "12", "--qfracs", "1/3,1/2", "--seeds", "2",
                 "--algorithms", "fb4op,fbhf-ls,tseng-ls", "--tol", "1e-5",
                 "--csv", str(out), "--table", str(table)])
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 1 + 2 * 2 * 3
    assert {r[4] for r in rows[1:]} == {"4", "6"}
    text = table.read_text()
    assert "q=4" in text and "q=6" in text and "avg_iterations" in text
    assert "fbhf-ls" in capsys.readouterr().out


def test_bench_no_timing_is_reproducible(tmp_path):
    args = ["bench", "--sizes", "10", "--qfracs", "0.5", "--seeds", "2", "--tol", "1e-5", "--no-timing"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--csv", str(a)]) == 0
    assert main(args + ["--csv", str(b), "--parallelism", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_bench_failure_exits_3(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench", "--sizes", "10", "--qfracs", "0.5", "--seeds", "1",
                 "--sigma", "0.99", "--csv", str(out)]) == 3
    assert len(out.read_text().splitlines()) == 3


def test_module_entry_point(tmp_path):
    out = tmp_path / "p.json"
    proc = subprocess.run([sys.executable, "-m", "foursplit", "gen", "--seed", "0", "--n", "4",
                           "--q", "2", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
    proc = subprocess.run([sys.executable, "-m", "foursplit", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "bench" in proc.stdout
