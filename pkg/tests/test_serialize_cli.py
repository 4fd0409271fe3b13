import csv
import json
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pingpong import serialize as ser
from pingpong.cli import main

SPEC_ANCHORS = ["--p1", "1,0,0", "--L1", "0,1,1", "--p2", "0,1,0", "--L2", "1,0,1",
                "--p3", "0,0,1", "--L3", "1,-1,0"]


@given(st.fractions())
def test_rational_round_trip(x):
    assert ser.dec_rat(ser.enc_rat(x)) == x


@given(st.lists(st.lists(st.integers(), min_size=3, max_size=3), min_size=3, max_size=3))
def test_matrix_round_trip(rows):
    m = tuple(map(tuple, rows))
    assert ser.dec_matrix(ser.enc_matrix(m)) == m


def test_decoders_reject_bad_input():
    with pytest.raises(ser.MalformedInput):
        ser.dec_int(3)
    with pytest.raises(ser.MalformedInput):
        ser.dec_rat("1/0")
    with pytest.raises(ser.MalformedInput):
        ser.loads('{"kind": "x"}')
    with pytest.raises(ser.MalformedInput):
        ser.loads("[1, 2")


def _same_bytes(doc, key, enc, dec):
    text = ser.dumps(doc)
    again = dict(ser.loads(text))
    again[key] = enc(dec(again[key]))
    return ser.dumps(again) == text


def test_system_and_certificate_round_trip(dense_build, thrown, started, spec8):
    assert _same_bytes({"kind": "t", "schema_version": "1", "s": ser.enc_system(dense_build.system)},
                       "s", ser.enc_system, ser.dec_system)
    assert _same_bytes({"kind": "t", "schema_version": "1", "b": ser.enc_batches(dense_build.batches)},
                       "b", ser.enc_batches, ser.dec_batches)
    assert _same_bytes({"kind": "t", "schema_version": "1", "c": ser.enc_full_cert(thrown[1])},
                       "c", ser.enc_full_cert, ser.dec_full_cert)
    assert _same_bytes({"kind": "t", "schema_version": "1", "c": ser.enc_start_cert(started[1])},
                       "c", ser.enc_start_cert, ser.dec_start_cert)
    assert _same_bytes({"kind": "t", "schema_version": "1", "f": ser.enc_family_spec(spec8)},
                       "f", ser.enc_family_spec, ser.dec_family_spec)
    assert ser.dec_system(ser.enc_system(thrown[0])) == thrown[0]


# --------------------------------------------------------------------------
# command line

@pytest.fixture(scope="module")
def dense_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "dense.json"
    code = main(["build-dense", "--n", "3", "--p", "1,0,0", "--L", "0,1,0", "--eps", "1/100",
                 "--delta", "1/50", "--seed", "7", "--out", str(path)])
    assert code == 0
    return path


def test_build_dense_and_verify(dense_file, tmp_path):
    doc = json.loads(dense_file.read_text())
    assert doc["kind"] == "dense_build" and len(doc["system"]["generators"]) == 12
    assert doc["manifest"]["seed"] == "7" and doc["manifest"]["n"] == "3"
    assert main(["verify", "--system", str(dense_file), "--out", str(tmp_path / "rep.json")]) == 0
    assert json.loads((tmp_path / "rep.json").read_text())["ok"] is True


def test_verify_reports_bad_radii(dense_file, tmp_path, capsys):
    s = json.loads(dense_file.read_text())["system"]
    s["generators"][0]["eps2"] = "1/2"
    bad = tmp_path / "bad.json"
    bad.write_text(ser.dumps(ser.document("schottky_system", **s)))
    assert main(["verify", "--system", str(bad), "--out", str(tmp_path / "rep.json")]) == 1
    rep = json.loads((tmp_path / "rep.json").read_text())
    assert rep["kind"] == "pingpong_certificate" and not rep["result"]["ok"]
    assert "1" in {v["condition"] for v in rep["result"]["violations"]}
    assert "condition 1" in capsys.readouterr().err


def test_exit_codes(tmp_path):
    assert main(["verify", "--system", str(tmp_path / "missing.json")]) == 3
    (tmp_path / "junk.json").write_text("{not json")
    assert main(["verify", "--system", str(tmp_path / "junk.json")]) == 3
    assert main(["build-dense", "--p", "1,0,0", "--L", "1,0,0", "--eps", "1/100", "--delta", "1/50"]) == 1
    assert main(["build-dense", "--p", "1,0", "--L", "0,1,0", "--eps", "1/100", "--delta", "1/50"]) == 3
    assert main(["build-dense", "--p", "1,0,0", "--L", "0,1,0", "--eps", "x", "--delta", "1/50"]) == 3
    assert main(["nonsense"]) == 3
    assert main(["avoid-step", "--L0", "1,0,0", "--L1", "0,0,1", "--L2", "0,1,0", "--p0", "0,1,1",
                 "--rho2", "1/100", "--g", "1,0,0;0,0,-1;0,1,0", "--L", "0,1,0", "--depth", "0",
                 "--out", str(tmp_path / "x.json")]) == 2


def test_determinism(tmp_path):
    args = ["start", "--k", "0,0,1;1,0,0;0,1,0", *SPEC_ANCHORS, "--eps", "1/4", "--delta", "1/4", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a.json")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.json")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert main(["verify", "--system", str(tmp_path / "a.json"), "--out", str(tmp_path / "v.json")]) == 0


def test_family_commands(tmp_path):
    spec = tmp_path / "spec.json"
    assert main(["family", "--size", "4", "--bits", "0110", "--spec-out", str(spec),
                 "--out", str(tmp_path / "m.json")]) == 0
    assert main(["verify", "--system", str(spec), "--out", str(tmp_path / "v1.json")]) == 0
    assert main(["verify", "--system", str(tmp_path / "m.json"), "--out", str(tmp_path / "v2.json")]) == 0
    assert main(["family-cert", "--spec", str(spec), "--f", "0110", "--g", "0100",
                 "--out", str(tmp_path / "c.json")]) == 0
    assert main(["verify", "--system", str(tmp_path / "c.json"), "--out", str(tmp_path / "v3.json")]) == 0
    assert main(["family-cert", "--spec", str(spec), "--f", "0110", "--g", "0110"]) == 1
    assert main(["family", "--spec", str(spec), "--bits", "01"]) == 1


def test_congruence_command(tmp_path):
    out = tmp_path / "c.json"
    assert main(["congruence", "--moduli", "3,4", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())["results"]
    assert [(r["closure_order"], r["formula_order"]) for r in rows] == [("5616", "5616"), ("43008", "43008")]


def _trace(tmp_path, system, *extra):
    out = tmp_path / "t.csv"
    assert main(["orbit-trace", "--system", str(system), "--out", str(out), *extra]) == 0
    with open(out, newline="") as fh:
        return list(csv.DictReader(fh)), out


def test_orbit_trace(tmp_path):
    from pingpong.exact_core import Ball, Region
    from pingpong.schottky import Generator, SchottkySystem
    from pingpong.unipotent import elementary, power
    u = power(elementary(3, 0, 1), 22)
    A = Region((Ball(u.point, F(1, 100)),))
    sys = SchottkySystem((Generator(u, F(1, 100), F(1, 4)),), A, A.with_tube(u.hyperplane, F(1, 4)))
    path = tmp_path / "one.json"
    path.write_text(ser.dumps(ser.document("schottky_system", **ser.enc_system(sys))))

    rows, _ = _trace(tmp_path, path, "--start", "1,1,1", "--mode", "powers", "--samples", "5")
    assert len(rows) == 5
    d = [float(r["dist_to_center"]) for r in rows]
    assert all(a > b for a, b in zip(d, d[1:]))
    assert all(r["guaranteed"] == "1" for r in rows)

    rows, out = _trace(tmp_path, path, "--start", "1,1,1", "--samples", "0")
    assert rows == [] and out.read_text().startswith("word_id,word,x0,x1,x2,")

    rows, _ = _trace(tmp_path, path, "--start", "1,0,5", "--mode", "powers", "--samples", "3")
    assert all(r["guaranteed"] == "0" for r in rows)
