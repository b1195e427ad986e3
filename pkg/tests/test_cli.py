import csv
import io
import json

import pytest

from dirac_delta import cli
from dirac_delta.cli import ConfigError, SweepSpec, parse_config, render, run_audit, run_solve
from dirac_delta.core import DeltaConvention, SolverBudgetExceeded


def write(tmp_path, doc):
    p = tmp_path / "cfg.json"
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(p)


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("doc, field", [
    ("{not json", "<root>"),
    ("[1, 2]", "<root>"),
    ({"g": 1.0}, "<root>"),
    ({"preset": "double", "g": 1.0}, "mR"),
    ({"preset": "double", "g": "x", "mR": 1}, "g"),
    ({"preset": "double", "g": 1.0, "mR": -1}, "mR"),
    ({"preset": "quad", "g": 1.0, "mR": 1}, "preset"),
    ({"preset": "double", "g": 1.0, "mR": 1, "methods": ["fem"]}, "methods[0]"),
    ({"preset": "double", "g": 1.0, "mR": 1, "convention": "periodic"}, "convention"),
    ({"preset": "double", "g": 1.0, "mR": 1, "solver": {"grid_points": 1}}, "solver"),
    ({"preset": "double", "g": 1.0, "mR": 1, "solver": {"speed": 3}}, "solver.speed"),
    ({"centers": [{"position": 0.0}]}, "centers[0].strength"),
    ({"centers": [{"position": 1.0, "strength": 1}, {"position": 0.0, "strength": 1}]}, "centers"),
    ({"centers": [{"position": 0.0, "strength": 1}], "methods": ["closedform"]}, "methods"),
    ({"preset": "double", "g": 1.0, "sweep": {"axis": "x", "start": 0, "stop": 1, "count": 3}}, "sweep.axis"),
    ({"preset": "double", "g": 1.0, "sweep": {"axis": "mR", "start": 1, "stop": 0, "count": 3}}, "sweep"),
])
def test_config_errors_name_the_field(doc, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(doc if isinstance(doc, str) else json.dumps(doc))
    assert str(exc.value).startswith(field)


def test_config_defaults_and_conventions():
    cfg = parse_config(json.dumps({"preset": "triple_same", "g": 1.0, "mR": 0.5}))
    assert cfg.methods == ("greens", "transfer")
    assert cfg.conventions == (DeltaConvention.CAYLEY,)
    assert (cfg.mR1, cfg.mR2) == (0.5, 0.5)
    both = parse_config(json.dumps({"preset": "single", "g": 1.0, "convention": "both"}))
    assert set(both.conventions) == {DeltaConvention.CAYLEY, DeltaConvention.SQUEEZE}


def test_mass_scales_positions():
    cfg = parse_config(json.dumps({"centers": [{"position": 0.0, "strength": -1.0},
                                               {"position": 2.0, "strength": -1.0}], "m": 2.0}))
    assert list(cfg.problem.positions) == [0.0, 1.0]


def test_solve_rows_all_methods():
    cfg = parse_config(json.dumps({"preset": "double", "g": 1.0, "mR": 1.0, "convention": "both",
                                   "methods": ["greens", "transfer", "closedform"]}))
    rows = run_solve(cfg)
    by = {}
    for r in rows:
        by.setdefault((r["method"], r["convention"]), []).append(r["E_over_m"])
    assert set(by) == {("greens", "cayley"), ("transfer", "cayley"), ("transfer", "squeeze"),
                       ("closedform", "cayley"), ("closedform", "squeeze")}
    assert by["greens", "cayley"] == pytest.approx(by["transfer", "cayley"], abs=1e-10)
    assert by["closedform", "squeeze"] == pytest.approx(by["transfer", "squeeze"], abs=1e-10)
    assert {r["branch"] for r in rows if r["method"] == "closedform"} <= {"plus", "minus", "plus+minus"}


def test_solve_command_csv(tmp_path, capsys):
    code, out, _ = run(["solve", "--config", write(tmp_path, {"preset": "single", "g": 1.0})], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert tuple(rows[0]) == cli.COLUMNS
    assert [float(r["E_over_m"]) for r in rows] == pytest.approx([0.6, 0.6])


def test_solve_command_json_to_file(tmp_path, capsys):
    out = tmp_path / "out.json"
    cfg = write(tmp_path, {"centers": [{"position": 0.0, "strength": -2.0}], "methods": ["greens"]})
    code, stdout, _ = run(["solve", "--config", cfg, "--format", "json", "--output", str(out)], capsys)
    assert code == 0 and stdout == ""
    (row,) = json.loads(out.read_text())["rows"]
    assert row["preset"] == "custom" and row["E_over_m"] == pytest.approx(0.0, abs=1e-12)


def test_exit_code_config_error(tmp_path, capsys, caplog):
    code, out, _ = run(["solve", "--config", write(tmp_path, {"preset": "double", "g": 1.0})], capsys)
    assert code == 1 and out == ""
    assert "config error: mR" in caplog.text
    assert cli.main(["solve", "--config", str(tmp_path / "missing.json")]) == 1
    assert cli.main(["sweep"]) == 1


def test_exit_code_solver_failure(tmp_path, capsys, caplog, monkeypatch):
    def exhausted(*args, **kwargs):
        raise SolverBudgetExceeded("refinement budget exhausted")

    monkeypatch.setattr(cli, "transfer_spectrum", exhausted)
    cfg = write(tmp_path, {"preset": "double", "g": 1.0, "mR": 1.0})
    code, out, _ = run(["solve", "--config", cfg], capsys)
    assert code == 2 and out == ""
    assert "solver failure" in caplog.text and "budget" in caplog.text


def test_zero_coupling_gives_empty_rows():
    cfg = parse_config(json.dumps({"preset": "double", "g": 0.0, "mR": 1.0}))
    assert cfg.problem is None
    rows = cli.solve_rows(cfg)
    assert {r["status"] for r in rows} == {"empty"}
    with pytest.raises(ConfigError):
        run_solve(cfg)


def test_sweep_from_config(tmp_path, capsys):
    cfg = write(tmp_path, {"preset": "double", "g": 1.5, "methods": ["transfer"], "convention": "squeeze",
                           "sweep": {"axis": "mR", "start": 0.0, "stop": 2.0, "count": 5}})
    code, out, _ = run(["sweep", "--config", cfg], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    data = [r for r in rows if r["status"] != "marker"]
    assert sorted({float(r["mR1"]) for r in data}) == pytest.approx([1e-6, 0.5, 1.0, 1.5, 2.0])
    markers = {r["method"] for r in rows if r["status"] == "marker"}
    assert markers == {"merged_limit", "single_2g", "single_limit"}


def test_sweep_values_replace_zero_distance():
    v = SweepSpec("mR", 0.0, 1.0, 3, 1.5).values()
    assert list(v) == [1e-6, 0.5, 1.0]
    assert list(SweepSpec("g", 0.0, 1.0, 3, 1.0).values()) == [0.0, 0.5, 1.0]


def test_figure_registry():
    assert sorted(cli.FIGURES) == [f"figure{i}{p}" for i in range(1, 5) for p in "ab"]
    with pytest.raises(ConfigError):
        cli.figure_config("figure9")


def test_unknown_figure_rejected_by_parser():
    with pytest.raises(SystemExit):
        cli.main(["sweep", "--figure", "figure9"])


@pytest.mark.parametrize("preset", ["double", "dipole", "triple_same", "triple_alt"])
def test_audit_passes(preset):
    rows = run_audit(parse_config(json.dumps({"preset": preset, "g": 1.5, "mR": 1.0})))
    assert rows and not [r for r in rows if r["status"] == "fail"]
    checks = {r["check"] for r in rows}
    if preset == "dipole":
        assert {"annihilation", "pm_symmetry", "far_separation"} <= checks
    if preset == "triple_alt":
        assert {"merged_decoupled", "decoupled_constancy"} <= checks


def test_audit_flags_cayley_non_additivity():
    rows = run_audit(parse_config(json.dumps({"preset": "double", "g": 1.5, "mR": 1.0})))
    add = {(r["method"], r["convention"]): r["status"] for r in rows if r["check"] == "additivity"}
    assert add[("transfer", "squeeze")] == "pass"
    assert add[("greens", "cayley")] == "expected-fail"


def test_audit_command_exit_codes(tmp_path, capsys):
    code, out, _ = run(["audit", "--config", write(tmp_path, {"preset": "dipole", "g": 1.0, "mR": 1.0})], capsys)
    assert code == 0 and tuple(next(csv.reader(io.StringIO(out)))) == cli.AUDIT_COLUMNS
    code, _, _ = run(["audit", "--config", write(tmp_path, {"preset": "single", "g": 1.0})], capsys)
    assert code == 1


def test_render_number_format():
    text = render([{"a": 1 / 3, "b": None, "c": "x"}], ("a", "b", "c"), "csv")
    assert text == "a,b,c\n0.333333333333333,,x\n"
    assert json.loads(render([{"a": 1 / 3}], ("a",), "json")) == {"rows": [{"a": 0.333333333333333}]}
