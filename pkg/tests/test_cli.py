import json
import math
import subprocess
import sys

import numpy as np
import pytest

from dualcurv import io
from dualcurv.bodies import Ball, Polytope
from dualcurv.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, main
from dualcurv.core_convex import BodyIndicator, GridSpec, Quadratic
from dualcurv.minkowski_solver import discretized_density
from dualcurv.weighted_variation import Weight


@pytest.fixture
def files(tmp_path):
    paths = {}

    def put(name, obj):
        p = tmp_path / name
        io.write_json(p, obj)
        paths[name.split(".")[0]] = str(p)

    put("gaussian.json", io.function_to_dict(Quadratic(1.0)))
    put("ball1.json", io.function_to_dict(BodyIndicator(Ball(1.0))))
    put("ball2.json", io.function_to_dict(BodyIndicator(Ball(2.0))))
    put("unit_ball.json", io.body_to_dict(Ball(1.0)))
    put("square.json", io.body_to_dict(Polytope.box([1.0, 1.0])))
    mu = discretized_density(GridSpec(2, 4.0, 33), Weight(2.0), lambda y: np.exp(-0.5 * np.sum(y**2, axis=-1)))
    put("gauss_mu.json", io.measure_to_dict(mu.measure))
    put("line_mu.json", {"kind": "euclidean", "dim": 2, "atoms": [[1.0, 0.0, 0.5], [-1.0, 0.0, 0.5]]})
    put("flat.json", {"kind": "grid", "dim": 2, "radius": 3.0, "nodes": 5, "values": [0.0] * 25})
    paths["dir"] = tmp_path
    return paths


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    assert code == EXIT_OK, out
    return json.loads(out)


# examples ------------------------------------------------------------------------------------


def test_moment_of_gaussian(files, capsys):
    res = run_json(capsys, ["moment", "--fn", files["gaussian"], "--q", "2"])
    assert res["moment"] == pytest.approx(2 * math.pi, rel=1e-9)


def test_varcheck_balls(files, capsys):
    res = run_json(capsys, ["varcheck", "--f", files["ball2"], "--g", files["ball1"], "--q", "1"])
    for key in ("lhs", "rhs", "layer_cake"):
        assert res[key] == pytest.approx(2 * math.pi, rel=1e-3)
    assert "hypothesis_flags" in res


def test_minkowski_converges(files, capsys):
    res = run_json(capsys, ["minkowski", "--mu", files["gauss_mu"], "--q", "2"])
    assert res["converged"] and res["residual"] <= 0.05
    assert "admissibility" in res and "flags" in res
    assert res["f0"]["kind"] == "grid"


def test_conjugate_closed_form(files, capsys):
    res = run_json(capsys, ["conjugate", "--fn", files["ball1"]])
    assert res["conjugate"]["kind"] == "support"


def test_conjugate_on_grid(files, capsys):
    res = run_json(capsys, ["conjugate", "--fn", files["gaussian"], "--grid-res", "17", "--radius", "2"])
    desc = res["conjugate"]
    assert desc["kind"] == "grid" and desc["nodes"] == 17


def test_supconv_of_balls(files, capsys):
    res = run_json(capsys, ["supconv", "--f", files["ball1"], "--g", files["ball1"], "--t", "1"])
    assert res["result"]["kind"] == "indicator" and res["result"]["body"]["r"] == pytest.approx(2.0)


def test_tv_and_coarea(files, capsys):
    tv = run_json(capsys, ["tv", "--fn", files["ball1"], "--L", files["unit_ball"], "--q", "2"])
    assert tv["boundary"] == pytest.approx(2 * math.pi) and tv["bulk"] == 0.0
    co = run_json(capsys, ["coarea", "--fn", files["gaussian"], "--L", files["unit_ball"], "--q", "2"])
    ref = run_json(capsys, ["tv", "--fn", files["gaussian"], "--L", files["unit_ball"], "--q", "2"])
    assert co["total"] == pytest.approx(ref["total"], rel=2e-2)


def test_body_report(files, capsys):
    res = run_json(capsys, ["body", "--body", files["square"], "--q", "2"])
    assert res["dual_quermass"] == pytest.approx(4.0)
    assert res["measure_total"] == pytest.approx(8.0)
    assert len(res["polar"]["vertices"]) == 4


def test_dualcurv_report(files, capsys):
    res = run_json(capsys, ["dualcurv", "--fn", files["ball2"], "--q", "1"])
    assert res["euclidean_total"] == pytest.approx(4 * math.pi, rel=1e-9)
    assert res["spherical_total"] == pytest.approx(2 * math.pi, rel=1e-9)


def test_selftest_subset(files, capsys):
    out = files["dir"] / "st"
    code = main(["selftest", "--only", "2", "--out", str(out)])
    text = capsys.readouterr().out
    assert code == EXIT_OK
    assert "[PASS]  2 moment oracle" in text and "[PASS] 12 determinism" in text
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0] == "criterion,title,passed,summary"
    assert json.loads((out / "results.json").read_text())["criteria"][0]["passed"]


# outputs -------------------------------------------------------------------------------------


def test_csv_output(files, capsys):
    assert main(["moment", "--fn", files["gaussian"], "--q", "2", "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "q,moment" and lines[1].startswith("2,6.28318530718")


def test_csv_measure_header(files, capsys):
    assert main(["body", "--body", files["square"], "--q", "1", "--format", "csv"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == "v0,v1,weight"


def test_out_file_matches_stdout(files, capsys):
    target = files["dir"] / "m.json"
    assert main(["moment", "--fn", files["gaussian"], "--q", "1", "--out", str(target)]) == EXIT_OK
    assert capsys.readouterr().out == ""
    text = target.read_text()
    assert main(["moment", "--fn", files["gaussian"], "--q", "1"]) == EXIT_OK
    assert capsys.readouterr().out == text


def test_outputs_round_trip_as_inputs(files, capsys):
    d = files["dir"]
    assert main(["conjugate", "--fn", files["ball1"], "--out", str(d / "c.json")]) == EXIT_OK
    assert main(["conjugate", "--fn", str(d / "c.json"), "--out", str(d / "cc.json")]) == EXIT_OK
    assert json.loads((d / "cc.json").read_text())["conjugate"]["kind"] == "indicator"
    assert main(["supconv", "--f", files["ball1"], "--g", files["ball1"], "--t", "1", "--out", str(d / "s.json")]) == 0
    res = run_json(capsys, ["moment", "--fn", str(d / "s.json"), "--q", "2"])
    assert res["moment"] == pytest.approx(4 * math.pi)
    assert main(["body", "--body", files["square"], "--q", "2", "--out", str(d / "b.json")]) == EXIT_OK
    res = run_json(capsys, ["body", "--body", str(d / "b.json"), "--q", "2"])
    assert res["dual_quermass"] == pytest.approx(4.0)
    assert main(["minkowski", "--mu", files["gauss_mu"], "--q", "2", "--out", str(d / "r.json")]) == EXIT_OK
    res = run_json(capsys, ["moment", "--fn", str(d / "r.json"), "--q", "2"])
    assert res["moment"] > 0
    assert main(["dualcurv", "--fn", files["gaussian"], "--q", "2", "--out", str(d / "e.json")]) == EXIT_OK
    res = run_json(capsys, ["minkowski", "--mu", str(d / "e.json"), "--q", "2", "--max-iter", "1", "--tol", "1e6"])
    assert res["converged"] and res["iterations"] == 0


def test_threads_do_not_change_bytes(files, capsys):
    texts = []
    for threads in ("1", "8"):
        assert main(["dualcurv", "--fn", files["gaussian"], "--q", "1.5", "--threads", threads]) == EXIT_OK
        texts.append(capsys.readouterr().out)
    assert texts[0] == texts[1]


# configuration -------------------------------------------------------------------------------


def test_config_supplies_arguments(files, capsys):
    cfg = files["dir"] / "cfg.json"
    cfg.write_text(json.dumps({"fn": files["gaussian"], "q": 1}))
    res = run_json(capsys, ["moment", "--config", str(cfg)])
    assert res["q"] == 1.0
    res = run_json(capsys, ["moment", "--config", str(cfg), "--q", "2"])
    assert res["q"] == 2.0 and res["moment"] == pytest.approx(2 * math.pi)


@pytest.mark.parametrize("cfg", [{"bogus": 1}, {"q": -1}, {"format": "xml"}])
def test_bad_config_is_invalid(files, capsys, cfg):
    path = files["dir"] / "bad_cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["moment", "--fn", files["gaussian"], "--q", "2", "--config", str(path)]) == EXIT_INVALID
    assert "invalid input" in capsys.readouterr().err


# exit codes ----------------------------------------------------------------------------------


def test_validation_errors_exit_2(files, capsys):
    bad = files["dir"] / "bad.json"
    bad.write_text("{oops")
    cases = [
        ["moment", "--fn", str(files["dir"] / "missing.json"), "--q", "2"],
        ["moment", "--fn", str(bad), "--q", "2"],
        ["moment", "--fn", files["gaussian"], "--q", "-1"],
        ["moment", "--fn", files["gaussian"]],
        ["moment", "--fn", files["gaussian"], "--q", "2", "--bogus"],
        ["frobnicate"],
        ["minkowski", "--mu", files["line_mu"], "--q", "2"],
        ["minkowski", "--mu", files["gauss_mu"], "--q", "2", "--grid-res", "64"],
        ["varcheck", "--f", files["gaussian"], "--g", files["ball1"], "--q", "1", "--t-list", "0.1,0"],
        ["moment", "--fn", files["gaussian"], "--q", "2", "--threads", "0"],
    ]
    for argv in cases:
        assert main(argv) == EXIT_INVALID, argv
    capsys.readouterr()


def test_subspace_measure_message(files, capsys):
    assert main(["minkowski", "--mu", files["line_mu"], "--q", "2"]) == EXIT_INVALID
    assert "concentrated on a proper subspace" in capsys.readouterr().err


def test_numerical_failures_exit_3(files, capsys):
    assert main(["moment", "--fn", files["flat"], "--q", "2"]) == EXIT_NUMERICAL
    assert "moment may be infinite" in capsys.readouterr().err
    out = files["dir"] / "nc.json"
    code = main(["minkowski", "--mu", files["gauss_mu"], "--q", "2", "--max-iter", "1", "--tol", "1e-6",
                 "--out", str(out)])
    assert code == EXIT_NUMERICAL
    assert "did not converge" in capsys.readouterr().err
    assert json.loads(out.read_text())["converged"] is False


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "dualcurv.cli", "moment", "--fn", files["gaussian"], "--q", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and json.loads(proc.stdout)["moment"] == pytest.approx(2 * math.pi)
