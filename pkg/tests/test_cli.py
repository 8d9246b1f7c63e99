import json
import subprocess
import sys

import pytest

from stochcontact.cli import (
    KINDS,
    OUT_ENV,
    SCENARIO_DIR,
    ValidationError,
    config_hash,
    list_scenarios,
    load_scenario,
    main,
    run,
)

REEB = SCENARIO_DIR / "reeb.toml"
HEAT = SCENARIO_DIR / "heat.toml"

FLOW = """\
name = "{name}"
kind = "flow"
seed = 3

[flow]
hamiltonian = "reeb_linear"
params = {{ k = 0.5 }}
y0 = [1.0]
wp0 = [2.0]
h = 1e-2
steps = 100
{extra}
"""


def write(tmp_path, text, name="s.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def report(out, name):
    return json.loads((out / name / "report.json").read_text())


# -- bundled scenarios ---------------------------------------------------------


def test_reeb_scenario(tmp_path):
    assert main(["flow", "--config", str(REEB), "--out", str(tmp_path), "--quiet"]) == 0
    rep = report(tmp_path, "reeb")
    assert rep["metrics"]["eps_drift"] <= 1e-8 and rep["passed"]
    assert {"trajectory.csv", "plot.py"} <= set(rep["files"])
    lines = (tmp_path / "reeb" / "trajectory.csv").read_bytes().split(b"\n")
    assert lines[0] == b"t,y1,wp1,eps" and b"\r" not in lines[1]


def test_heat_scenario(tmp_path):
    assert main(["kinetic", "--config", str(HEAT), "--out", str(tmp_path), "--quiet"]) == 0
    assert report(tmp_path, "heat")["metrics"]["variance"] == pytest.approx(2.01, rel=0.01)


def test_report_fields_and_sorted_json(tmp_path):
    run(REEB, out=str(tmp_path))
    text = (tmp_path / "reeb" / "report.json").read_text()
    rep = json.loads(text)
    for key in ("scenario", "wall_time", "files", "assertions", "version", "config_hash"):
        assert key in rep
    assert list(rep) == sorted(rep)


# -- validation ----------------------------------------------------------------


def test_unknown_key_is_named(tmp_path, capsys):
    cfg = write(tmp_path, FLOW.format(name="bad", extra="colour = 1"))
    assert main(["flow", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "flow.colour" in capsys.readouterr().err
    assert report(tmp_path, "s")["status"] == "validation_error"


def test_unknown_top_level_key(tmp_path):
    cfg = write(tmp_path, "extra = 1\n" + FLOW.format(name="bad", extra=""))
    with pytest.raises(ValidationError, match="extra"):
        load_scenario(cfg)


def test_parse_error_has_position(tmp_path):
    cfg = write(tmp_path, 'name = "x"\nkind = = 3\n')
    with pytest.raises(ValidationError, match="line 2"):
        load_scenario(cfg)


def test_kind_mismatch_rejected(tmp_path):
    assert main(["kinetic", "--config", str(REEB), "--out", str(tmp_path), "--quiet"]) == 2


def test_missing_referenced_file(tmp_path):
    text = 'name = "a"\nkind = "action"\n[action]\nhamiltonian = "reeb_linear"\npath = "nowhere.csv"\n'
    with pytest.raises(ValidationError, match="does not exist"):
        load_scenario(write(tmp_path, text))


def test_unknown_metric_is_validation_error(tmp_path):
    cfg = write(tmp_path, FLOW.format(name="m", extra="[expect]\nbogus = { max = 1.0 }"))
    assert run(cfg, out=str(tmp_path)).exit_code == 2


# -- outcomes ------------------------------------------------------------------


def test_failed_assertion_exits_three(tmp_path):
    cfg = write(tmp_path, FLOW.format(name="f", extra="[expect]\neps_initial = { value = 5.0, tol = 1e-9 }"))
    assert main(["flow", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == 3
    rep = report(tmp_path, "f")
    assert rep["status"] == "assertion_failed" and not rep["assertions"][0]["passed"]


def test_divergence_exits_four(tmp_path):
    text = FLOW.format(name="d", extra="").replace('"reeb_linear"', '"polynomial"').replace(
        "params = { k = 0.5 }", "params = { terms = [{ exponents = [0, 3, 1], coeff = 1.0 }] }"
    ).replace("h = 1e-2", "h = 0.1").replace("steps = 100", "steps = 200")
    assert main(["flow", "--config", str(write(tmp_path, text)), "--out", str(tmp_path), "--quiet"]) == 4
    assert report(tmp_path, "d")["status"] == "diverged"


def test_seed_flag_overrides_config(tmp_path):
    cfg = write(tmp_path, FLOW.format(name="s", extra=""))
    assert run(cfg, out=str(tmp_path)).seed == 3
    assert run(cfg, seed=11, out=str(tmp_path)).seed == 11


# -- output location -------------------------------------------------------------


def test_environment_sets_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    run(REEB)
    assert (tmp_path / "env" / "reeb" / "report.json").is_file()
    run(REEB, out=str(tmp_path / "flag"))
    assert (tmp_path / "flag" / "reeb" / "report.json").is_file()


def test_outputs_are_deterministic(tmp_path):
    run(REEB, out=str(tmp_path / "a"))
    run(REEB, out=str(tmp_path / "b"), workers=4)
    for name in ("trajectory.csv", "plot.py"):
        assert (tmp_path / "a" / "reeb" / name).read_bytes() == (tmp_path / "b" / "reeb" / name).read_bytes()


# -- hashing ---------------------------------------------------------------------


def test_config_hash_ignores_layout(tmp_path):
    a = write(tmp_path, FLOW.format(name="h", extra=""), "a.toml")
    b = write(tmp_path, "# comment\n" + FLOW.format(name="h", extra="").replace("h = 1e-2", "h   =   0.01"), "b.toml")
    assert load_scenario(a).config_hash == load_scenario(b).config_hash
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    c = write(tmp_path, FLOW.format(name="h", extra="").replace("h = 1e-2", "h = 0.02"), "c.toml")
    assert load_scenario(a).config_hash != load_scenario(c).config_hash


# -- listing ---------------------------------------------------------------------


def test_list_empty_directory(tmp_path):
    assert list_scenarios(tmp_path) == []


def test_list_bundled_covers_every_kind():
    items = list_scenarios()
    assert len(items) >= 6
    assert {s.kind for s in items} == set(KINDS)
    assert [(s.name, str(s.path)) for s in items] == sorted((s.name, str(s.path)) for s in items)


def test_list_disambiguates_duplicates(tmp_path):
    write(tmp_path, FLOW.format(name="twin", extra=""), "one.toml")
    write(tmp_path, FLOW.format(name="twin", extra=""), "two.toml")
    labels = [s.label for s in list_scenarios(tmp_path)]
    assert len(set(labels)) == 2 and all("one.toml" in l or "two.toml" in l for l in labels)


def test_list_unreadable_directory(tmp_path):
    with pytest.raises(ValidationError):
        list_scenarios(tmp_path / "missing")
    assert main(["list", str(tmp_path / "missing")]) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "stochcontact", "list"], capture_output=True, text=True)
    assert res.returncode == 0 and "reeb" in res.stdout
