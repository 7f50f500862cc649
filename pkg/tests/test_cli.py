import csv
import json

import pytest

from symmarkov.cli import main
from symmarkov.generators import birth_death, complete_graph, path_graph
from symmarkov.measure import dumps_measure, loads_measure


def write(path, obj):
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


@pytest.fixture
def k3(tmp_path):
    return write(tmp_path / "k3.json", dumps_measure(complete_graph(3)))


@pytest.fixture
def p5(tmp_path):
    return write(tmp_path / "p5.json", dumps_measure(path_graph(5)))


@pytest.fixture
def broken(tmp_path):
    doc = {"schema": 1, "mu": [1.0, 1.0, 1.0],
           "triplets": [[0, 1, 1.0], [1, 0, 2.0], [1, 2, 1.0], [2, 1, 1.0]]}
    return write(tmp_path / "broken.json", doc)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_passes(capsys, k3):
    code, out, _ = run(capsys, "check", "--input", k3)
    assert code == 0
    doc = json.loads(out)
    assert doc["passed"] and len(doc["result"]["clauses"]) == 7
    assert all(c["passed"] for c in doc["result"]["clauses"])
    m = doc["manifest"]
    assert m["toolkit"] == "symmarkov" and m["command"] == "check" and len(m["inputs"]["--input"]["sha256"]) == 64


def test_check_broken(capsys, broken):
    code, _, err = run(capsys, "check", "--input", broken)
    assert code == 1 and "AsymmetryError" in err
    code, out, _ = run(capsys, "check", "--input", broken, "--force")
    assert code == 2
    assert json.loads(out)["passed"] is False


def test_usage_errors(capsys, k3, tmp_path):
    assert run(capsys, "check")[0] == 1
    assert run(capsys, "check", "--input", str(tmp_path / "missing.json"))[0] == 1
    assert run(capsys, "check", "--input", k3, "--tol", "-1")[0] == 1
    code, _, err = run(capsys, "frobnicate")
    assert code == 1
    bad = write(tmp_path / "bad.json", "{not json")
    assert run(capsys, "validate", "--input", bad)[0] == 1
    extra = write(tmp_path / "extra.json", {"schema": 1, "mu": [1, 1], "triplets": [[0, 1, 1]], "colour": 1})
    assert run(capsys, "validate", "--input", extra)[0] == 1


def test_validate_and_spectrum(capsys, k3):
    code, out, _ = run(capsys, "validate", "--input", k3)
    doc = json.loads(out)
    assert code == 0 and doc["result"]["irreducible"] and doc["result"]["states"] == 3
    code, out, _ = run(capsys, "spectrum", "--input", k3)
    ev = json.loads(out)["result"]["P"]
    assert code == 0 and ev == pytest.approx([-0.5, -0.5, 1.0], abs=1e-14)


def test_energy(capsys, tmp_path):
    p3 = write(tmp_path / "p3.json", dumps_measure(path_graph(3)))
    code, out, _ = run(capsys, "energy", "--input", p3, "--indicator", "[0, 1]")
    res = json.loads(out)["result"]
    assert code == 0 and res["crossing_mass"] == 1.0 and res["nu_A"] == 3.0


def test_harmonic(capsys, tmp_path):
    bd = write(tmp_path / "bd.json", dumps_measure(birth_death(5)))
    boundary = write(tmp_path / "b.json", {"states": [0, 4], "values": [0.0, 1.0]})
    code, out, _ = run(capsys, "harmonic", "--input", bd, "--boundary", boundary)
    vals = json.loads(out)["result"]["values"]
    assert code == 0
    assert vals == pytest.approx([(1 - 2.0 ** -i) / (1 - 2.0 ** -4) for i in range(5)], rel=1e-14, abs=1e-15)
    out_csv = tmp_path / "h.csv"
    code, _, _ = run(capsys, "harmonic", "--input", bd, "--boundary", boundary, "--format", "csv",
                     "--out", str(out_csv))
    rows = list(csv.reader(out_csv.open()))
    assert code == 0 and rows[0] == ["state", "value"] and len(rows) == 6


def test_equiv(capsys, tmp_path):
    k2 = write(tmp_path / "k2.json", dumps_measure(complete_graph(2)))
    code, out, _ = run(capsys, "equiv", "--input", k2, "--q", "[1, 2]")
    assert code == 0 and json.loads(out)["passed"]
    assert run(capsys, "equiv", "--input", k2)[0] == 1
    assert run(capsys, "equiv", "--input", k2, "--q", "[1, 0]")[0] == 1
    code, _, _ = run(capsys, "equiv", "--input", k2, "--r", "[[1, 3], [3, 1]]")
    assert code == 0


def test_simulate(capsys, tmp_path):
    c2 = write(tmp_path / "c2.json", dumps_measure(path_graph(2)))
    path = tmp_path / "paths.csv"
    code, _, _ = run(capsys, "simulate", "--input", c2, "--start", "[0]", "--horizon", "3", "--paths", "4",
                     "--format", "csv", "--out", str(path))
    rows = list(csv.reader(path.open()))
    assert code == 0 and rows[0] == ["path_id", "step", "state"]
    assert [r[2] for r in rows[1:5]] == ["0", "1", "0", "1"] and len(rows) == 17
    code, a, _ = run(capsys, "simulate", "--input", c2, "--paths", "10", "--seed", "5")
    code, b, _ = run(capsys, "simulate", "--input", c2, "--paths", "10", "--seed", "5")
    assert a == b


def test_green(capsys, p5):
    code, out, _ = run(capsys, "green", "--input", p5, "--domain", "[1,2,3]", "--target", "[2]")
    res = json.loads(out)["result"]
    assert code == 0 and res["values"] == pytest.approx([1, 2, 1], rel=1e-14)
    code, out, _ = run(capsys, "green", "--input", p5, "--domain", "[1,2,3]", "--target", "[2]",
                       "--method", "series")
    assert code == 0 and json.loads(out)["result"]["values"] == pytest.approx([1, 2, 1], rel=1e-10)
    assert run(capsys, "green", "--input", p5, "--domain", "[0,1,2,3,4]", "--target", "[2]")[0] == 1


def test_discretize(capsys, tmp_path):
    out = tmp_path / "net"
    code, _, _ = run(capsys, "discretize", "--kernel", "1", "--levels", "3", "--out", str(out))
    assert code == 0
    files = sorted(p.name for p in out.iterdir())
    assert files == ["certificates.json", "level_01.json", "level_02.json", "level_03.json"]
    cert = json.loads((out / "certificates.json").read_text())
    assert cert["passed"] and cert["result"]["roundtrip"]["passed"]
    m = loads_measure((out / "level_02.json").read_text())
    assert m.n == 4
    assert run(capsys, "discretize", "--kernel", "x - y", "--out", str(tmp_path / "bad"))[0] == 1
    assert run(capsys, "discretize", "--kernel", "x +", "--out", str(tmp_path / "bad"))[0] == 1


def test_discretize_deterministic(capsys, tmp_path):
    texts = []
    for name in ("a", "b"):
        run(capsys, "discretize", "--kernel", "exp(-4*(x-y)^2)", "--levels", "4", "--out", str(tmp_path / name))
        texts.append([(tmp_path / name / f).read_bytes() for f in ("level_04.json", "certificates.json")])
    assert texts[0][0] == texts[1][0]
    # manifests differ only in the output directory
    a, b = (json.loads(t[1]) for t in texts)
    a["manifest"]["config"].pop("out"), b["manifest"]["config"].pop("out")
    assert a == b


def test_check_deterministic(capsys, k3, tmp_path):
    report = tmp_path / "r.json"
    run(capsys, "check", "--input", k3, "--report", str(report))
    first = report.read_bytes()
    run(capsys, "check", "--input", k3, "--report", str(report))
    assert report.read_bytes() == first
