from __future__ import annotations

import io
import json
import os
import re
import subprocess
import sys

import pytest

from monocone.cli import run

from conftest import EX34_TEXT, FAMILY_DIR, GOLDEN_TEXT, MAXPLUS_PAIR_TEXT, geomean_family


@pytest.fixture(scope="module")
def famdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("families")
    for name, text in {
        "ex34.fam": EX34_TEXT,
        "golden.fam": GOLDEN_TEXT,
        "pair.fam": MAXPLUS_PAIR_TEXT,
        "geo.fam": geomean_family(0.5),
        "bad_neg.fam": "dim 2\nmap bad = [ -1*x1 ; x2 ]\n",
        "bad_syntax.fam": "dim 2\nmap f = [ x1 + ; x2 ]\n",
        "bad_dim.fam": "dim 2\nmap f = [ x1 ]\n",
        "bad_geo.fam": "dim 2\nmap f = [ geo(0.3: x1, 0.3: x2) ; x2 ]\n",
        "empty.fam": "",
    }.items():
        (d / name).write_text(text)
    return d


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def call_json(*argv):
    code, out, err = call(*argv, "--json")
    assert code == 0, err
    return json.loads(out)


def test_jsr_example(famdir):
    rep = call_json("jsr", famdir / "ex34.fam", "--max-len", 10)
    res = rep["result"]
    assert res["lower"] == 1.0 and res["lower_word"] == "f" and res["lower_vector"] == [1.0, 0.0]
    assert res["upper"] == pytest.approx(11 ** 0.1, rel=1e-15)
    assert [a for _, a in res["alpha_seq"]] == [float(m + 1) for m in range(1, 11)]
    assert rep["family"]["n"] == 2
    assert [m["name"] for m in rep["family"]["maps"]] == ["f", "g", "h"]
    assert rep["flags"] == {"converged": False, "budget_exceeded": False}
    assert rep["wall_time_s"] >= 0


def test_stability_example(famdir):
    res = call_json("stability", famdir / "ex34.fam", "--scale", 0.9, "--max-len", 8)["result"]
    assert res["verdict"] == "Stable"
    assert res["word"] == "g g g g g g g"
    assert res["norm"] == pytest.approx(0.9 ** 7 * 2, abs=1e-12)


def test_structure_example(famdir):
    res = call_json("structure", famdir / "ex34.fam")["result"]
    assert res["irreducible"] is True
    assert res["primitive"] is False
    assert res["primitivity_witness"] == [1]
    assert res["graph_strongly_connected"] is True


def test_other_commands(famdir):
    assert call_json("probe", famdir / "ex34.fam", "--depth", 12)["result"]["growth_classification"] == "growing"
    res = call_json("radius", famdir / "geo.fam")["result"]
    assert res["lower"] <= 0.5 <= res["upper"]
    res = call_json("partial", famdir / "ex34.fam", "--support", "2", "--max-len", 6)["result"]
    assert res["support"] == [2] and all(v == 1.0 for _, v in res["estimate_seq"])
    res = call_json("subradius", famdir / "ex34.fam", "--max-len", 5)["result"]
    assert [b for _, b in res["beta_seq"]] == [2.0] * 5
    res = call_json("norm", famdir / "ex34.fam", "--x", "1,-2", "--level", 3)["result"]
    assert res["value"] == 6.0
    res = call_json("barabanov", famdir / "pair.fam", "--x", "1,2", "--outer", 2, "--inner", 2)["result"]
    assert res["achieving_map"] in ("a", "b")
    res = call_json("simulate", famdir / "ex34.fam", "--scale", 0.9, "--policy", "periodic:g", "--steps", 200)["result"]
    assert res["estimate"] == pytest.approx(0.9 * 2 ** (1 / 200), abs=1e-12)
    assert len(res["series"]) == 200
    res = call_json("simulate", famdir / "ex34.fam", "--policy", "random", "--seed", 5, "--steps", 20)["result"]
    again = call_json("simulate", famdir / "ex34.fam", "--policy", "random", "--seed", 5, "--steps", 20)["result"]
    assert res["series"] == again["series"]


def test_radius_requires_map_for_families(famdir):
    code, _, err = call("radius", famdir / "ex34.fam")
    assert code == 1 and "--map" in err
    res = call_json("radius", famdir / "ex34.fam", "--map", "g")["result"]
    assert res["map"] == "g" and res["lower"] <= 1.0 <= res["upper"]


def test_json_numbers_round_trip(famdir):
    code, out, _ = call("jsr", famdir / "golden.fam", "--json")
    rep = json.loads(out)

    def walk(v):
        if isinstance(v, float):
            assert float(repr(v)) == v
            assert repr(v) in out
        elif isinstance(v, dict):
            for x in v.values():
                walk(x)
        elif isinstance(v, list):
            for x in v:
                walk(x)

    walk(rep)


def test_human_output_goes_to_stderr_under_json(famdir):
    code, out, err = call("jsr", famdir / "golden.fam", "--json")
    assert out.count("\n") == 1 and out.startswith("{")
    assert "lower:" in err
    code, out, err = call("jsr", famdir / "golden.fam")
    assert "lower:" in out and err == ""


def _numbers(text):
    return {float(t) for t in re.findall(r"-?\d+\.\d+(?:e-?\d+)?", text)}


def test_json_contains_every_human_number(famdir):
    code, out, err = call("jsr", famdir / "golden.fam", "--json")
    rep_numbers = _numbers(out)
    human = err.rsplit("wall_time_s", 1)[0]
    assert _numbers(human) <= rep_numbers


@pytest.mark.parametrize("c", [0.5, 2.0])
@pytest.mark.parametrize("name", ["ex34.fam", "golden.fam", "pair.fam", "geo.fam"])
def test_scale_then_jsr_is_exact(famdir, name, c):
    base = call_json("jsr", famdir / name, "--max-len", 8)["result"]
    scaled = call_json("jsr", famdir / name, "--max-len", 8, "--scale", c)["result"]
    for key in ("lower", "upper", "gsr_lower"):
        assert scaled[key] == c * base[key]
    assert [v for _, v in scaled["alpha_seq"]] == [v * c ** m for m, v in base["alpha_seq"]]


@pytest.mark.parametrize(
    "argv, code",
    [
        (["jsr", "{d}/bad_neg.fam"], 2),
        (["jsr", "{d}/bad_syntax.fam"], 2),
        (["structure", "{d}/bad_dim.fam"], 2),
        (["jsr", "{d}/bad_geo.fam"], 2),
        (["jsr", "{d}/empty.fam"], 2),
        (["jsr", "{d}/missing.fam"], 1),
        (["frobnicate", "{d}/ex34.fam"], 1),
        ([], 1),
        (["jsr"], 1),
        (["jsr", "{d}/ex34.fam", "--max-len", "abc"], 1),
        (["jsr", "{d}/ex34.fam", "--max-len", "0"], 1),
        (["jsr", "{d}/ex34.fam", "--scale", "-1"], 1),
        (["partial", "{d}/ex34.fam"], 1),
        (["partial", "{d}/ex34.fam", "--support", "3"], 1),
        (["norm", "{d}/ex34.fam", "--x", "1,2,3"], 1),
        (["simulate", "{d}/ex34.fam", "--policy", "periodic:zz"], 1),
        (["simulate", "{d}/ex34.fam", "--policy", "sometimes"], 1),
        (["radius", "{d}/ex34.fam", "--map", "nope"], 1),
        (["jsr", "{d}/ex34.fam", "--max-len", "6"], 0),
        (["jsr", "{d}/ex34.fam", "--max-len", "6", "--strict"], 3),
        (["jsr", "{d}/golden.fam", "--max-len", "30", "--budget", "100"], 0),
        (["jsr", "{d}/golden.fam", "--max-len", "30", "--budget", "100", "--strict"], 4),
        (["radius", "{d}/geo.fam", "--strict"], 0),
        (["radius", "{d}/ex34.fam", "--map", "f", "--max-iter", "20", "--strict"], 3),
        (["--help"], 0),
    ],
)
def test_exit_code_matrix(famdir, argv, code):
    got, _, err = call(*[a.format(d=famdir) for a in argv])
    assert got == code, err


def test_parse_error_reports_position(famdir):
    code, _, err = call("jsr", famdir / "bad_syntax.fam")
    assert code == 2 and "bad_syntax.fam:2:" in err


def test_budget_flag_without_strict(famdir):
    rep = call_json("jsr", famdir / "golden.fam", "--max-len", 30, "--budget", 100)
    assert rep["flags"]["budget_exceeded"] is True


def test_bundled_family_files():
    for name in ("example34.fam", "golden.fam", "geomean09.fam", "maxplus_pair.fam"):
        code, out, err = call("structure", os.path.join(FAMILY_DIR, name), "--json")
        assert code == 0, err


def test_module_entry_point():
    path = os.path.join(FAMILY_DIR, "example34.fam")
    proc = subprocess.run([sys.executable, "-m", "monocone", "probe", path, "--depth", "6", "--json"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["result"]["growth_classification"] == "growing"
