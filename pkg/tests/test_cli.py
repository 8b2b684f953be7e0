import csv
import json

import pytest

from concavity_lab import cli
from concavity_lab.experiments import default_config, run_experiment

TORSION = {"p": 2, "source": {"type": "power", "q": 0}, "domain": "square", "h": 0.03125}


@pytest.fixture
def out(tmp_path, monkeypatch):
    root = tmp_path / "out"
    monkeypatch.setenv("CONCAVITY_LAB_OUT", str(root))
    return root


def write(path, obj):
    path.write_text(json.dumps(obj) if not isinstance(obj, str) else obj, encoding="utf-8")
    return path


def test_parse_minimal_config(tmp_path):
    rc = cli.parse_config(write(tmp_path / "t.json", TORSION))
    assert rc.command == "solve" and rc.solve["h"] == 0.03125 and not rc.reference_mode


def test_unknown_nested_key_named(tmp_path):
    bad = dict(TORSION, source={"type": "power", "q": 0, "qq": 1})
    with pytest.raises(cli.ConfigError, match="source.qq"):
        cli.parse_config(write(tmp_path / "b.json", bad))


def test_coarse_grid_rejected_before_solving(tmp_path):
    with pytest.raises(cli.ConfigError, match="inradius/4"):
        cli.parse_config(write(tmp_path / "c.json", dict(TORSION, h=0.125)))


def test_type_errors_and_line_context(tmp_path):
    with pytest.raises(cli.ConfigError, match="p: expected a number"):
        cli.parse_config(write(tmp_path / "p.json", dict(TORSION, p="two")))
    with pytest.raises(cli.ConfigError, match=r":3:"):
        cli.parse_config(write(tmp_path / "j.json", '{\n "p": 2,\n "h": ,\n}'))


def test_override_applied_before_validation(tmp_path):
    rc = cli.parse_config(write(tmp_path / "t.json", TORSION), overrides={"h": 1 / 16})
    assert rc.solve["h"] == 1 / 16
    with pytest.raises(cli.ConfigError):
        cli.parse_config(write(tmp_path / "t.json", TORSION), overrides={"h": 0.3})


def test_solve_writes_field_and_summary(tmp_path, out):
    cfg = write(tmp_path / "tors.json", dict(TORSION, transform={"power": {"gamma": 0.5}}))
    assert cli.main(["solve", str(cfg)]) == 0
    summary = json.loads((out / "solve" / "tors" / "solve.json").read_text())
    assert {"lambda", "iterations", "residual", "energy", "min_u", "max_u"} <= set(summary)
    assert summary["concavity"]["sup_defect"] <= summary["concavity"]["tau"]
    assert (out / "solve" / "tors" / "u.csv").read_text().startswith("x,y,value,class\n")


def test_missing_file_exit_2(tmp_path, out):
    assert cli.main(["solve", str(tmp_path / "none.json")]) == 2
    assert cli.main(["concavity", str(tmp_path / "none.csv"), str(tmp_path / "none.json")]) == 2
    assert cli.main(["report", str(tmp_path / "nowhere")]) == 2


def test_concavity_and_transform_commands(tmp_path, out, capsys):
    cli.main(["solve", str(write(tmp_path / "t.json", TORSION))])
    field = out / "solve" / "t" / "u.csv"
    sqrt = write(tmp_path / "sqrt.json", {"power": {"gamma": 0.5}})
    assert cli.main(["concavity", str(field), str(sqrt)]) == 0
    rep = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert rep["functional"] == "C"
    assert cli.main(["transform", str(field), str(sqrt), "-o", str(tmp_path / "w.csv")]) == 0
    assert cli.main(["concavity", str(tmp_path / "w.csv"),
                     str(write(tmp_path / "id0.json", {"power": {"gamma": 1.0}}))]) == 0
    # squaring the torsion function destroys concavity
    ident = write(tmp_path / "id.json", {"power": {"gamma": 1.0}})
    squared = tmp_path / "u2.csv"
    rows = list(csv.reader(field.open()))
    with squared.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(rows[0])
        for r in rows[1:]:
            w.writerow([r[0], r[1], repr(float(r[2]) ** 2), r[3]])
    assert cli.main(["concavity", str(squared), str(ident)]) == 1


def test_unknown_experiment_and_bad_flags(out):
    assert cli.main(["experiment", "nope"]) == 2
    assert cli.main(["experiment", "comparison", "--threads", "0"]) == 2
    assert cli.main(["frobnicate"]) == 2


def test_empty_report_is_valid(tmp_path):
    cli.emit_report([], tmp_path / "r")
    assert json.loads((tmp_path / "r" / "report.json").read_text()) == {"experiments": [], "passed": True}
    assert (tmp_path / "r" / "summary.csv").read_text() == "experiment,name,sup_defect,bound,tau,verdict\n"


def test_perturbed_sweep_csv_schema(tmp_path):
    cfg = default_config("perturbed_bound")
    cfg.update(h=1 / 32, pq=[[2.0, 0.0]], eps=[0.0, 0.4, 0.9], delta_h=[4])
    res = run_experiment("perturbed_bound", cfg)
    cli.emit_report([res], tmp_path)
    sweeps = [p for p in (tmp_path / "perturbed_bound").glob("*.csv") if p.name != "summary.csv"]
    assert sweeps
    header = sweeps[0].read_text().splitlines()[0].split(",")
    assert {"osc", "defect", "bound"} <= set(header)


def test_experiment_reference_mode_is_byte_stable(tmp_path, monkeypatch):
    blobs = []
    for run in ("a", "b"):
        root = tmp_path / run
        monkeypatch.setenv("CONCAVITY_LAB_OUT", str(root))
        assert cli.main(["experiment", "triangle_counterexample", "--reference-mode"]) == 0
        blobs.append({p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()})
    assert blobs[0] == blobs[1]
    assert "triangle_counterexample/report.json" in blobs[0]
    assert cli.main(["report", str(tmp_path / "a")]) == 0
