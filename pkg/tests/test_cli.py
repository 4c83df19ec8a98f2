"""Command-line interface: subcommands, exit codes, output round-trips, and
determinism."""

import io
import json
import os

import numpy as np
import pytest

from stfehull import network as N
from stfehull.cli import run
from stfehull.gapstats import gap_report
from stfehull.envelope import RawInstance
from stfehull import activations as A
from stfehull.tightener import BoundsReport


def invoke(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def test_envelope_eval_vertex_tightness():
    code, out, _ = invoke(
        ["envelope", "eval", "-w", "10,5", "-b", "-10", "--act", "sigmoid", "1,1"]
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["value"] == pytest.approx(doc["function"], abs=1e-12)
    assert len(doc["supergradient"]) == 2


def test_envelope_eval_act_params():
    code, out, _ = invoke(
        ["envelope", "eval", "-w", "2", "-b", "0", "--act", "elu",
         "--act-params", "alpha=1.7", "0.5"]
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["function"] == pytest.approx(A.elu(1.7).value(1.0))


def test_separate_inside_and_cut():
    base = ["separate", "-w", "1,1", "-b", "0", "--act", "relu", "--point", "0.5,0.5"]
    code, out, _ = invoke(base + ["-y", "1.0"])
    assert code == 0 and json.loads(out) == {"inside": True}
    code, out, _ = invoke(base + ["-y", "1.2", "--mode", "env"])
    doc = json.loads(out)
    assert code == 0 and doc["inside"] is False
    assert doc["violation"] > 0
    assert len(doc["normal"]) == 3


def test_gap_report_formats_and_determinism(tmp_path):
    argv = ["gap-report", "-w", "10,5", "-b", "-10", "--act", "sigmoid",
            "--samples", "30000", "--seed", "1"]
    code, out1, _ = invoke(argv)
    code2, out2, _ = invoke(argv)
    assert code == code2 == 0
    assert out1 == out2
    doc = json.loads(out1)
    lib = gap_report(RawInstance([10, 5], -10, A.sigmoid(), [[0, 1]] * 2), 30000, 1)
    assert doc["mean_f"] == lib.mean_f
    code, out_csv, _ = invoke(argv + ["--format", "csv"])
    header, row = out_csv.strip().split("\n")
    assert header.split(",")[0] == "mean_f"
    assert float(row.split(",")[0]) == lib.mean_f


def test_make_net_then_tighten_round_trip(tmp_path):
    net_path = tmp_path / "n.nn.json"
    csv_path = tmp_path / "r.csv"
    code, _, _ = invoke(["make-net", "--layers", "3,4,4,2", "--act", "selu",
                         "--seed", "3", "--out", str(net_path)])
    assert code == 0
    net = N.load_json(net_path)
    assert net.input_dim == 3
    code, _, _ = invoke(["tighten", "--net", str(net_path), "--mode", "hest",
                         "--out", str(csv_path)])
    assert code == 0
    with open(csv_path) as fh:
        rep = BoundsReport.read_csv(fh)
    assert len(rep.rows) == 16
    # determinism of the whole pipeline
    csv2 = tmp_path / "r2.csv"
    invoke(["tighten", "--net", str(net_path), "--mode", "hest", "--out", str(csv2)])
    assert csv_path.read_text() == csv2.read_text()


def test_tighten_env_dominates_hest_rowwise(tmp_path):
    net_path = tmp_path / "n.nn.json"
    invoke(["make-net", "--layers", "4,4,4,4,2", "--act", "elu", "--seed", "21",
            "--out", str(net_path)])
    env_csv, hest_csv = tmp_path / "env.csv", tmp_path / "hest.csv"
    assert invoke(["tighten", "--net", str(net_path), "--mode", "env",
                   "--out", str(env_csv)])[0] == 0
    assert invoke(["tighten", "--net", str(net_path), "--mode", "hest",
                   "--out", str(hest_csv)])[0] == 0
    with open(env_csv) as fh:
        env_rows = BoundsReport.read_csv(fh).by_key()
    with open(hest_csv) as fh:
        hest_rows = BoundsReport.read_csv(fh).by_key()
    assert env_rows.keys() == hest_rows.keys()
    for key in env_rows:
        assert env_rows[key].improvement >= hest_rows[key].improvement - 1e-6, key


def test_tighten_threads_env_var(tmp_path, monkeypatch):
    net_path = tmp_path / "n.nn.json"
    invoke(["make-net", "--layers", "3,3,3,2", "--act", "sigmoid", "--seed", "0",
            "--out", str(net_path)])
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    invoke(["tighten", "--net", str(net_path), "--out", str(out_a)])
    monkeypatch.setenv("STFE_HULL_THREADS", "3")
    invoke(["tighten", "--net", str(net_path), "--out", str(out_b)])
    assert out_a.read_text() == out_b.read_text()


def test_surface_grid(tmp_path):
    code, out, _ = invoke(["surface", "-w", "10,5", "-b", "-10", "--act", "sigmoid",
                           "--grid", "5"])
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "x1,x2,f,h,conc,region"
    assert len(lines) == 26
    regions = {line.split(",")[-1] for line in lines[1:]}
    assert regions <= {"Rf", "Rl", "R1", "R2"}
    for line in lines[1:]:
        f, h, c = (float(v) for v in line.split(",")[2:5])
        assert f <= c + 1e-9 <= h + 2e-9


def test_surface_rejects_3d():
    code, _, err = invoke(["surface", "-w", "1,1,1", "-b", "0", "--act", "sigmoid"])
    assert code == 1
    assert "2-D" in err


def test_usage_errors_exit_1():
    code, _, err = invoke(["separate", "-w", "1,1"])
    assert code == 1 and "usage error" in err
    code, _, err = invoke(["envelope", "eval", "-w", "1,x", "-b", "0",
                           "--act", "relu", "0.5"])
    assert code == 1


def test_input_errors_exit_2(tmp_path):
    code, _, err = invoke(["tighten", "--net", "/does/not/exist.json",
                           "--out", str(tmp_path / "x.csv")])
    assert code == 2 and "input error" in err
    bad = tmp_path / "bad.nn.json"
    bad.write_text("{not json")
    code, _, err = invoke(["tighten", "--net", str(bad), "--out", str(tmp_path / "y.csv")])
    assert code == 2
    # point outside the instance box is an input-data problem
    code, _, err = invoke(["envelope", "eval", "-w", "1,1", "-b", "0",
                           "--act", "relu", "1.5,0.5"])
    assert code == 2


def test_numerical_failure_exit_3(monkeypatch, tmp_path):
    """LP infeasibility (and kin) maps to exit code 3 with a diagnostic."""
    import stfehull.cli as cli
    from stfehull.tightener import InconsistentBoundsError

    net_path = tmp_path / "n.nn.json"
    invoke(["make-net", "--layers", "2,2,2", "--act", "relu", "--seed", "0",
            "--out", str(net_path)])

    def boom(*args, **kwargs):
        raise InconsistentBoundsError("base relaxation infeasible")

    monkeypatch.setattr(cli, "tighten_all", boom)
    code, _, err = invoke(["tighten", "--net", str(net_path),
                           "--out", str(tmp_path / "x.csv")])
    assert code == 3 and "numerical failure" in err


def test_all_numbers_are_17_digit_stable():
    code, out, _ = invoke(["surface", "-w", "1,1", "-b", "0", "--act", "sigmoid",
                           "--grid", "3"])
    assert code == 0
    # repr round-trip: parsing and reformatting reproduces the text
    for line in out.strip().split("\n")[1:]:
        for tok in line.split(",")[:5]:
            assert format(float(tok), ".17g") == tok
