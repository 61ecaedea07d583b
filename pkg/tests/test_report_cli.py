"""Configuration parsing, report records and the command-line entry point."""
import csv
import io
import json

import pytest

from s1avg.cli import main
from s1avg.errors import ConfigError
from s1avg.report import CONFIG_KEYS, TAGS, Record, Report, RunConfig, parse_config_file


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# -- configuration ---------------------------------------------------------------


def test_config_file_parsing():
    cfg = parse_config_file("# comment\nscenario = quartic\nnodes = 64  # trailing\ntol=1e-8\n"
                            "identity-check = yes\n")
    assert cfg == {"scenario": "quartic", "nodes": 64, "tol": 1e-8, "identity_check": True}
    with pytest.raises(ConfigError):
        parse_config_file("colour = blue\n")
    with pytest.raises(ConfigError):
        parse_config_file("nodes 64\n")
    with pytest.raises(ConfigError):
        parse_config_file("nodes = many\n")


def test_flags_override_file_values():
    cfg = RunConfig.build("average", {"nodes": 64, "seed": 1}, {"nodes": 128, "seed": None})
    assert cfg.get("nodes") == 128 and cfg.seed == 1
    with pytest.raises(ConfigError):
        cfg.get("colour")
    with pytest.raises(ConfigError):
        RunConfig.build("average", {}, {"format": "xml"})


def test_point_parsing():
    cfg = RunConfig.build("average", {}, {"point": "1,0;0.5,-0.5"})
    assert cfg.points(2).tolist() == [[1.0, 0.0], [0.5, -0.5]]
    with pytest.raises(ConfigError):
        cfg.points(3)
    with pytest.raises(ConfigError):
        RunConfig.build("average", {}, {"point": "1,a"}).points(2)
    with pytest.raises(ConfigError):
        RunConfig.build("average").points(2)


def test_config_keys_cover_common_flags():
    for key in ("scenario", "point", "delta", "epsilon", "nodes", "tol", "seed", "probes",
                "output", "format"):
        assert key in CONFIG_KEYS


# -- records ---------------------------------------------------------------------


def test_record_tags_are_validated():
    with pytest.raises(ValueError):
        Record("x", "made.up", {})
    assert Record("x", "avg.S", {}).tag in TAGS


def test_report_serialization():
    import numpy as np
    rep = Report("average", {"seed": 0})
    rep.add("a", "avg.average", {"v": np.float64(0.5), "arr": np.arange(2), "bad": float("nan")},
            True)
    rep.add("b", "avg.S", {"nested": {"x": 1}}, None)
    data = json.loads(rep.to_json())
    assert data["results"][0]["values"] == {"v": 0.5, "arr": [0, 1], "bad": "nan"}
    assert data["metadata"]["command"] == "average"
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["name", "tag", "passed", "key", "value"]
    assert ["b", "avg.S", "", "nested.x", "1"] in rows
    assert rep.exit_code() == 0
    rep.add("c", "avg.S", {}, False)
    assert rep.exit_code() == 1


# -- command line ------------------------------------------------------------------


def test_average_command(capsys):
    code, out, _ = run(capsys, "average", "--scenario", "harmonic", "--field", "q2",
                       "--point", "1,0", "--identity-check")
    assert code == 0
    recs = json.loads(out)["results"]
    assert recs[0]["values"]["avg"] == pytest.approx(0.5, abs=1e-12)
    assert recs[0]["values"]["s"] == pytest.approx(0.0, abs=1e-12)
    assert recs[1]["tag"] == "avg.LS" and recs[1]["passed"]


def test_csv_output_to_file(capsys, tmp_path):
    target = tmp_path / "out.csv"
    code, out, _ = run(capsys, "average", "--field", "q", "--point", "0,1", "--format", "csv",
                       "--output", str(target))
    assert code == 0 and out == ""
    assert target.read_text().startswith("name,tag,passed,key,value")


def test_config_file_is_read(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("scenario = harmonic\nfield = q2\npoint = 0,1\n")
    code, out, _ = run(capsys, "average", "--config", str(cfg))
    assert code == 0
    assert json.loads(out)["results"][0]["values"]["avg"] == pytest.approx(0.5)
    cfg.write_text("colour = blue\n")
    assert run(capsys, "average", "--config", str(cfg))[0] == 2


def test_solve_command(capsys):
    code, out, _ = run(capsys, "solve", "--scenario", "quartic", "--field", "qp3", "--probes", "6")
    assert code == 0
    assert all(r["passed"] is not False for r in json.loads(out)["results"])


@pytest.mark.parametrize("delta,code", [("3/8", 0), ("1", 1)])
def test_monodromy_command(capsys, delta, code):
    argv = ["monodromy", "--delta", delta, "--point", "1,0"]
    if delta == "3/8":
        argv += ["--k", "2"]
    assert run(capsys, *argv)[0] == code


def test_hamiltonize_refusal_exit_code(capsys):
    code, out, _ = run(capsys, "hamiltonize", "--scenario", "adiabatic-negative", "--probes", "4")
    assert code == 1
    assert json.loads(out)["results"][0]["tag"] == "sf.solvability"


def test_resonance_table_command(capsys):
    code, out, _ = run(capsys, "resonance-table", "--r-values", "1/2,1/3,2")
    assert code == 0
    rows = {r["values"]["r"]: r["values"] for r in json.loads(out)["results"]}
    assert rows["1/2"]["k"] == 2 and "2" not in rows


def test_error_exit_codes(capsys):
    assert run(capsys, "average", "--bogus")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "average", "--field", "nope", "--point", "1,0")[0] == 2
    assert run(capsys, "average", "--scenario", "harmonic", "--delta", "1", "--point", "1,0")[0] == 2
    assert run(capsys, "average", "--point", "9,0")[0] == 3
    assert run(capsys, "accept", "--criteria", "99")[0] == 2


def test_accept_list(capsys):
    code, out, err = run(capsys, "accept", "--list")
    assert code == 0
    assert len(json.loads(out)["results"]) == 11
    assert len(err.strip().splitlines()) == 11


def test_tightened_tolerances_fail(capsys):
    code, out, err = run(capsys, "accept", "--criteria", "5", "--tol-scale", "1e-12")
    assert code == 1
    assert "criterion  5 FAIL" in err


def test_json_output_is_deterministic(capsys):
    a = run(capsys, "accept", "--criteria", "5,10")
    b = run(capsys, "accept", "--criteria", "5,10")
    assert a[0] == b[0] == 0
    assert json.loads(a[1])["results"] == json.loads(b[1])["results"]
