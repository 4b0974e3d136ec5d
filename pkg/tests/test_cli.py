import csv
import json
import logging
import xml.etree.ElementTree as ET

import jsonschema
import pytest

from anderson_edge import export
from anderson_edge.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_PIPELINE, main, run_experiment
from anderson_edge.config import DEFAULT_CONFIG, load_config, parse_config, tomllib
from anderson_edge.errors import ConfigError

SMALL = """\
schema_version = 1

[model]
dimension = 1
points_per_unit = 16
omega_minus = 0.5
omega_plus = 1.5

[model.background]
terms = [{amplitude = 1.0, k = [1], phase = 0.0}]

[[model.bumps]]
center = [-0.25]
radius = 0.15
amplitude = 2.0

[[model.bumps]]
center = [0.25]
radius = 0.15
amplitude = -1.2

[sweep]
n_theta = 65
n_bands = 3
supercell_n_theta = 17
ladder = [0.0, 4.0, 8.0, 12.0, 16.0]
max_period = [3]

[check]
run = ["auto", "projection", "box"]
lambda_fractions = [0.1, 0.25]
delta = 0.3
projection_samples = 6
projection_n_theta = 5
box_sizes = [1, 2, 4]
box_samples = 20
seed = 5
"""

FREE = """\
schema_version = 1
[model]
points_per_unit = 16
[[model.bumps]]
center = [0.1]
radius = 0.2
amplitude = 1.0
[sweep]
n_theta = 65
supercell_n_theta = 9
ladder = [0.0]
[check]
run = ["auto"]
"""

JSONS = ("minima.json", "coupling.json", "verification.json")


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = write(root, SMALL)
    status = run_experiment(cfg, root / "a")
    return status, root / "a", cfg


def test_full_run_outputs(full_run):
    status, out, _ = full_run
    assert status == EXIT_OK
    for name in ("bands.csv", "bands.svg", "report.md", "verification.csv", *JSONS):
        assert (out / name).exists(), name


def test_json_artifacts_validate(full_run):
    _, out, _ = full_run
    for name in JSONS:
        jsonschema.validate(json.loads((out / name).read_text()), export.SCHEMAS[name])
    ver = json.loads((out / "verification.json").read_text())
    jsonschema.validate(ver["projection"], export.PROJECTION_SCHEMA)


def test_bands_csv_contract(full_run):
    _, out, _ = full_run
    rows = list(csv.reader((out / "bands.csv").open()))
    assert rows[0] == ["theta_1", "E1", "E2", "E3"]
    assert len(rows) == 66
    energies = [[float(x) for x in r[1:]] for r in rows[1:]]
    assert all(a <= b <= c for a, b, c in energies)


def test_svg_is_well_formed(full_run):
    _, out, _ = full_run
    root = ET.fromstring((out / "bands.svg").read_text())
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f"{ns}polyline")) == 3
    assert len(root.findall(f"{ns}circle")) == 1


def test_report_numbers_trace_to_json(full_run):
    _, out, _ = full_run
    report = (out / "report.md").read_text()
    minima = json.loads((out / "minima.json").read_text())
    coup = json.loads((out / "coupling.json").read_text())
    ver = json.loads((out / "verification.json").read_text())
    assert f"`minima.e_min`: {minima['minima']['e_min']:.6g}" in report
    assert f"`scan.lambda0_estimate`: {coup['scan']['lambda0_estimate']:.6g}" in report
    assert f"`scan.c_zero`: {coup['scan']['c_zero']:.6g}" in report
    assert f"`verdict`: **{ver['verdict']}**" in report
    for r in ver["reports"]:
        assert f"| {r['mode']} | {r['lambda']:.6g} |" in report


def test_verification_content(full_run):
    _, out, _ = full_run
    ver = json.loads((out / "verification.json").read_text())
    coup = json.loads((out / "coupling.json").read_text())
    lam0 = coup["scan"]["lambda0_estimate"]
    assert ver["couplings"] == pytest.approx([0.1 * lam0, 0.25 * lam0])
    assert all(r["argmin_is_predicted"] for r in ver["reports"])
    assert ver["projection"]["n_configs"] == 6
    assert coup["rephasing"]["class_stable"]


def test_rerun_is_byte_identical(full_run, tmp_path):
    _, out, cfg = full_run
    assert run_experiment(cfg, tmp_path / "b", threads=3) == EXIT_OK
    for name in (*JSONS, "bands.csv", "report.md", "bands.svg", "verification.csv"):
        assert (out / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_bands_stage_alone(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["bands", "--config", str(cfg), "--out", str(tmp_path / "o"), "-q"]) == EXIT_OK
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["bands.csv"]


def test_minima_stage_reuses_bands(tmp_path, caplog):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "o"
    run_experiment(cfg, out, stage="bands")
    with caplog.at_level(logging.INFO, logger="anderson_edge"):
        assert run_experiment(cfg, out, stage="minima") == EXIT_OK
    assert "reusing" in caplog.text and "bands.csv" in caplog.text
    jsonschema.validate(json.loads((out / "minima.json").read_text()), export.MINIMA_SCHEMA)


def test_verify_reuses_coupling(tmp_path, caplog):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "o"
    assert run_experiment(cfg, out, stage="coupling") == EXIT_OK
    with caplog.at_level(logging.INFO, logger="anderson_edge"):
        assert run_experiment(cfg, out, stage="verify", recompute=False) == EXIT_OK
    assert f"reusing {out / 'coupling.json'}" in caplog.text


def test_missing_upstream(tmp_path, caplog):
    cfg = write(tmp_path, SMALL)
    assert run_experiment(cfg, tmp_path / "o", stage="verify", recompute=False) == EXIT_PIPELINE
    assert "MissingUpstream" in caplog.text or "recompute is disabled" in caplog.text
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "p"), "--no-recompute", "-q"]) == EXIT_PIPELINE


def test_stale_upstream_is_recomputed(tmp_path, caplog):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "o"
    run_experiment(cfg, out, stage="coupling")
    cfg2 = write(tmp_path, SMALL.replace("seed = 5", "seed = 6"), "cfg2.toml")
    with caplog.at_level(logging.INFO, logger="anderson_edge"):
        assert run_experiment(cfg2, out, stage="coupling") == EXIT_OK
        assert run_experiment(cfg2, out, stage="verify", recompute=False) == EXIT_OK
    assert json.loads((out / "coupling.json").read_text())["rephasing"]["seed"] == 6


def test_project_check_table(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert main(["project-check", "--config", str(cfg), "--out", str(tmp_path / "o"), "-q"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split("\t") == ["theta", "min_eigenvalue", "min_gap", "valid"]
    assert len(lines) == 6
    data = json.loads((tmp_path / "o" / "projection.json").read_text())
    jsonschema.validate(data, export.PROJECTION_SCHEMA)
    assert data["verdict"] == "pass"


def test_free_model_all_tie(tmp_path):
    cfg = write(tmp_path, FREE)
    assert run_experiment(cfg, tmp_path / "o") == EXIT_OK
    ver = json.loads((tmp_path / "o" / "verification.json").read_text())
    assert ver["couplings"] == [0.0]
    assert [r["all_tie"] for r in ver["reports"]] == [True]
    assert ver["reports"][0]["argmin"]["values"] == [0.5]


def test_strict_turns_warnings_into_failure(tmp_path):
    cfg = write(tmp_path, FREE.replace("n_theta = 65", "n_theta = 17"))
    assert run_experiment(cfg, tmp_path / "o", stage="minima") == EXIT_OK
    assert run_experiment(cfg, tmp_path / "o", stage="minima", strict=True) == EXIT_FAIL


def test_failed_verdict_exits_nonzero(tmp_path):
    text = SMALL.replace("lambda_fractions = [0.1, 0.25]", "lambda_fractions = []\nlambda_values = [20.0]")
    text = text.replace('run = ["auto", "projection", "box"]', 'run = ["min_location"]')
    cfg = write(tmp_path, text)
    assert run_experiment(cfg, tmp_path / "o", stage="verify") == EXIT_FAIL
    ver = json.loads((tmp_path / "o" / "verification.json").read_text())
    assert ver["verdict"] == "fail"


def test_bump_touching_cell_boundary(tmp_path, caplog):
    text = SMALL.replace("center = [0.25]\nradius = 0.15", "center = [0.25]\nradius = 0.25")
    cfg = write(tmp_path, text)
    with pytest.raises(ConfigError, match=r"model\.bumps\[1\]"):
        load_config(cfg)
    assert run_experiment(cfg, tmp_path / "o") == EXIT_CONFIG
    assert "model.bumps[1]" in caplog.text


@pytest.mark.parametrize(
    "edit,field",
    [
        (("dimension = 1", "dimension = 3"), "model.dimension"),
        (("ladder = [0.0, 4.0", "ladder = [1.0, 4.0"), "sweep.ladder"),
        (("ladder = [0.0, 4.0, 8.0", "ladder = [0.0, 8.0, 4.0"), "sweep.ladder"),
        (("delta = 0.3", "delta = -0.3"), "check.delta"),
        (("seed = 5", "seed = 5\nsede = 3"), "check"),
        (("omega_plus = 1.5", "omega_plus = 0.2"), "model.omega_minus"),
        (("n_theta = 65", "n_theta = 4"), "sweep.n_theta"),
        (('run = ["auto", "projection", "box"]', 'run = ["everything"]'), "check.run"),
    ],
)
def test_config_field_diagnostics(edit, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        parse_config(tomllib.loads(SMALL.replace(*edit)))


def test_toml_syntax_error_reports_line(tmp_path):
    cfg = write(tmp_path, "schema_version = 1\n[model\n")
    with pytest.raises(ConfigError, match="line 2"):
        load_config(cfg)


def test_schema_version_checked():
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(tomllib.loads(SMALL.replace("schema_version = 1", "schema_version = 2")))


def test_init_writes_default_config(tmp_path):
    path = tmp_path / "default.toml"
    assert main(["init", str(path)]) == EXIT_OK
    assert path.read_text() == DEFAULT_CONFIG
    cfg = load_config(path)
    assert cfg.model.n == 32 and cfg.sweep.ladder[-1] == 16.0
    assert cfg.output_dir == tmp_path / "out"


def test_json_writer_is_canonical():
    a = export.dumps({"b": 1.0, "a": [float("nan"), 2]})
    assert a == export.dumps({"a": [float("nan"), 2], "b": 1.0})
    assert json.loads(a) == {"a": [None, 2], "b": 1.0}
