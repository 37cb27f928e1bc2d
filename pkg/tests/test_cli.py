import csv
import json

import pytest

from strata_lab.cli import EXIT_BUDGET, EXIT_OK, EXIT_PRECONDITION, EXIT_USAGE, run


def _run(tmp_path, *argv):
    return run(["--out", str(tmp_path), *argv])


def _json(tmp_path, stem):
    return json.loads((tmp_path / f"{stem}.json").read_text())


def test_surface_validate(tmp_path, capsys):
    assert _run(tmp_path, "surface", "validate", "--builder", "octagon") == EXIT_OK
    doc = _json(tmp_path, "surface_validate")
    assert doc["schema"] == "surface/1"
    assert doc["report"]["genus"] == 2
    assert json.loads(capsys.readouterr().out) == doc


def test_surface_build_from_file(tmp_path):
    f = tmp_path / "s.json"
    f.write_text(json.dumps({"lshape": {"a": 2.0, "b": 3.0}}))
    assert _run(tmp_path, "surface", "build", "--file", str(f)) == EXIT_OK
    assert _json(tmp_path, "surface_build")["report"]["in_H2"] is True


def test_sc_enum_rows(tmp_path):
    assert _run(tmp_path, "sc", "enum", "--builder", "origami:12,13", "--L", "1") == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "sc_enum.csv").open()))
    assert len(rows) == 12
    assert set(rows[0]) == {"hol_x", "hol_y", "length", "start", "end"}
    assert _json(tmp_path, "sc_enum")["count"] == 12


def test_csv_uses_round_trip_floats(tmp_path):
    assert _run(tmp_path, "cyl", "--builder", "octagon", "--dir", "1,0") == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "cyl.csv").open()))
    circ = sorted(float(r["circumference"]) for r in rows)
    assert circ[1] == 2 + 2**0.5
    assert repr(circ[1]) in (tmp_path / "cyl.csv").read_text()


def test_unknown_subcommand(tmp_path, capsys):
    assert _run(tmp_path, "frobnicate") == EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_missing_command(tmp_path):
    assert _run(tmp_path) == EXIT_USAGE


def test_invalid_parameter_exit(tmp_path):
    assert _run(tmp_path, "sc", "enum", "--builder", "octagon", "--L", "-1") == EXIT_USAGE
    assert _run(tmp_path, "surface", "validate", "--builder", "klein") == EXIT_USAGE


def test_budget_exit(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"budgets": {"wedges": 50}}))
    assert _run(tmp_path, "--config", str(cfg), "sc", "enum", "--builder", "octagon", "--L", "20") == EXIT_BUDGET


def test_bad_config_constant(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"constants": {"kappa1": 3.0}}))
    assert _run(tmp_path, "--config", str(cfg), "inj") == EXIT_USAGE


def test_precondition_exit(tmp_path):
    assert _run(tmp_path, "closing", "run", "--builder", "origami:12,13", "--t", "1", "--D", "0") == EXIT_PRECONDITION


def test_env_overrides_output_dir(tmp_path, monkeypatch):
    target = tmp_path / "env"
    monkeypatch.setenv("STRATA_LAB_OUT", str(target))
    assert run(["--out", str(tmp_path / "ignored"), "inj", "--builder", "torus"]) == EXIT_OK
    assert (target / "inj.json").exists()
    assert not (tmp_path / "ignored").exists()


def test_inj_along_flow(tmp_path):
    assert _run(tmp_path, "inj", "--builder", "torus", "--t", "1", "--s", "0") == EXIT_OK
    assert _json(tmp_path, "inj")["injectivity_radius"] == pytest.approx(0.36787944117144233)


def test_nondiv_commands(tmp_path):
    assert _run(tmp_path, "nondiv", "mw", "--builder", "octagon", "--normalize", "--t", "3", "--eps", "0.1,0.05", "--beta", "0.1") == EXIT_OK
    doc = _json(tmp_path, "nondiv_mw")
    assert doc["antitone"] and len(doc["cells"]) == 2
    assert _run(tmp_path, "nondiv", "good", "--builder", "octagon", "--cells", "5", "--grid", "1000") == EXIT_OK
    assert _json(tmp_path, "nondiv_good")["violations"] == []
    assert _run(tmp_path, "nondiv", "polybound", "--a2", "0", "--a3", "1") == EXIT_OK
    assert 0 <= _json(tmp_path, "nondiv_polybound")["measure"] <= 1


def test_veech_commands(tmp_path):
    assert _run(tmp_path, "veech", "member", "--builder", "origami:12,13", "--matrix", "1,2,0,1") == EXIT_OK
    assert _json(tmp_path, "veech_member")["member"] is True
    assert _run(tmp_path, "veech", "parabolic", "--builder", "origami:12,13", "--dir", "0,1") == EXIT_OK
    assert _json(tmp_path, "veech_parabolic")["matrix"] == [1, 0, 2, 1]
    assert _run(tmp_path, "veech", "hyperbolic", "--builder", "origami:12,13") == EXIT_OK
    doc = _json(tmp_path, "veech_hyperbolic")
    assert doc["matrix"] == [5, 2, 2, 1] and doc["class"] == "hyperbolic"


def test_margulis_command(tmp_path):
    assert _run(tmp_path, "margulis", "--builder", "origami:12,13", "--t", "2", "--beta", "0.99", "--nu", "0.5") == EXIT_OK
    doc = _json(tmp_path, "margulis")
    assert doc["nu"] == 0.5 and doc["sheet_ok"]
    assert len(list(csv.DictReader((tmp_path / "margulis.csv").open()))) == doc["scan"]["grid_size"]


@pytest.mark.parametrize(
    "argv",
    [
        ["nondiv", "good", "--builder", "octagon", "--cells", "10", "--grid", "1000"],
        ["margulis", "--builder", "origami:12,13", "--t", "2", "--beta", "0.99"],
    ],
)
def test_repeated_runs_are_byte_identical(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["--seed", "3", "--out", str(a), *argv]) == EXIT_OK
    assert run(["--seed", "3", "--out", str(b), *argv]) == EXIT_OK
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes()
