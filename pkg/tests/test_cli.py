import json
import subprocess
import sys

import pytest

from lipgeo.cli import main
from lipgeo.exceptions import ConfigError
from lipgeo.report import comparable, load_schema, validate_report
from lipgeo.runner import load_config

SMALL = """\
seed: 3
sets:
  - corpus: circle
  - corpus: segment
  - corpus: cone
tasks:
  - {kind: lne, set: circle, expect: {min: 1.52, max: 1.62}}
  - {kind: lne, set: segment, expect: {min: 1.0, max: 1.000001}}
  - {kind: llne, set: cone, t_grid: [4, 16], expect: bounded}
  - {kind: sample, set: circle}
"""


def _write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_run_ok_writes_report_and_curves(tmp_path, capsys):
    out = tmp_path / "out"
    status = main(["run", _write(tmp_path, SMALL), "--out", str(out), "--quiet"])
    assert status == 0
    doc = json.loads((out / "report.json").read_text())
    validate_report(doc)
    assert doc["summary"]["ok"] == 4
    assert (out / "summary.txt").read_text() == capsys.readouterr().out
    curve = doc["tasks"][2]["curves"][0]
    lines = (out / curve).read_text().splitlines()
    assert lines[0] == "t,ratio" and len(lines) == 3
    assert (out / "task03_circle.cloud").exists()


def test_reports_are_byte_identical_for_equal_seeds(tmp_path):
    texts = []
    for name in ("a", "b"):
        main(["run", _write(tmp_path, SMALL), "--out", str(tmp_path / name), "--quiet"])
        doc = json.loads((tmp_path / name / "report.json").read_text())
        doc.pop("generated_at")
        texts.append(json.dumps(doc, sort_keys=True))
    assert texts[0] == texts[1]


def test_mismatch_exits_2(tmp_path):
    text = SMALL.replace("expect: bounded", "expect: diverging")
    assert main(["run", _write(tmp_path, text), "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_fail_fast_skips_the_rest(tmp_path):
    text = SMALL.replace("{min: 1.52, max: 1.62}", "{min: 5, max: 6}")
    main(["run", _write(tmp_path, text), "--out", str(tmp_path / "o"), "--quiet", "--fail-fast"])
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    assert [t["status"] for t in doc["tasks"]] == ["mismatch", "skipped", "skipped", "skipped"]


def test_task_error_exits_1(tmp_path):
    text = SMALL + "  - {kind: tangent-cone, set: circle, band: [50, 60]}\n"
    assert main(["run", _write(tmp_path, text), "--out", str(tmp_path / "o"), "--quiet"]) == 1
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    assert doc["tasks"][-1]["error"]["type"] == "EmptyBand"


def test_undeclared_set_is_a_config_error_with_location(tmp_path, capsys):
    text = SMALL + "  - {kind: lne, set: nowhere}\n"
    with pytest.raises(ConfigError, match=r"line 11.*tasks\[4\]\.set"):
        load_config(text)
    assert main(["run", _write(tmp_path, text), "--quiet"]) == 1
    assert "undeclared set" in capsys.readouterr().err


def test_schema_errors_name_the_field():
    bad = SMALL.replace("kind: sample", "kind: nonsense")
    with pytest.raises(ConfigError, match="tasks"):
        load_config(bad)
    with pytest.raises(ConfigError, match="line"):
        load_config("sets: [\n")
    with pytest.raises(ConfigError):
        load_config("- just a list\n")


def test_overrides_and_grid_syntax(tmp_path):
    out = tmp_path / "o"
    status = main(["run", _write(tmp_path, SMALL), "--out", str(out), "--quiet", "--seed", "9",
                   "--t-grid", "4:16:3"])
    assert status == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["seed"] == 9
    assert len(doc["tasks"][2]["result"]["t_grid"]) == 3
    with pytest.raises(SystemExit):
        main(["run", "x.yaml", "--t-grid", "a:b"])


def test_corpus_listing(capsys):
    assert main(["corpus", "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) >= 8
    assert {"cone", "tangent-pair", "L-shape", "circle", "segment"} <= {r["name"] for r in rows}
    main(["corpus"])
    assert "tangent-pair" in capsys.readouterr().out


def test_report_schema_round_trip(tmp_path):
    main(["run", _write(tmp_path, SMALL), "--out", str(tmp_path / "o"), "--quiet"])
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    again = json.loads(json.dumps(doc))
    validate_report(again)
    assert comparable(again) == comparable(doc)
    assert load_schema("report")["properties"]["schema"]["const"] == "lipgeo-report/1"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "lipgeo.cli", "corpus"], capture_output=True, text=True)
    assert proc.returncode == 0 and "cone" in proc.stdout


@pytest.mark.parametrize("name", ["tour.yaml", "cone-llne.yaml", "tangent-sheets.yaml"])
def test_bundled_configs_meet_their_expectations(tmp_path, name):
    from importlib import resources

    path = resources.files("lipgeo").joinpath(f"configs/{name}")
    assert main(["run", str(path), "--out", str(tmp_path), "--quiet"]) == 0
