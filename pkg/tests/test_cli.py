import json
import hashlib
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from sygjms.cli import main

GEOM = Path(__file__).resolve().parents[1] / "geometries"


def run(tmp_path, *args):
    out = tmp_path / "out"
    code = main(list(args) + ["--out", str(out)])
    return code, out


def test_constants(tmp_path):
    code, out = run(tmp_path, "constants", "--n", "3", "--qmax", "4", "--spots", "5/2,1/3")
    assert code == 0
    table = json.loads((out / "constants.json").read_text())
    assert table["rows"][1]["c_q"] == "-1/4"
    assert table["rows"][1]["c_qs"]["5/2"] == {"pole": "5/2", "residue": "-1/4"}


def test_manifest_hashes(tmp_path):
    code, out = run(tmp_path, "yamabe", "--geom", str(GEOM / "ball2.json"))
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    names = {a["file"] for a in man["artifacts"]}
    assert names == {"yamabe.json", "yamabe_grid.csv"}
    for a in man["artifacts"]:
        assert hashlib.sha256((out / a["file"]).read_bytes()).hexdigest() == a["sha256"]


def test_golden_run(tmp_path, capsys):
    args = ["run", "--geom", str(GEOM / "ball_euclid.json"), "--checks", "B,C,E", "--variant", "corrected"]
    code, out = run(tmp_path, *args)
    assert code == 0
    checks = json.loads((out / "checks.json").read_text())
    assert [c["verdict"] for c in checks] == ["pass"] * 3
    # deterministic: a second run gives byte-identical artifacts
    out2 = tmp_path / "again"
    assert main(args + ["--out", str(out2)]) == 0
    for f in ("checks.json", "yamabe.json", "qcurv.json"):
        assert (out / f).read_bytes() == (out2 / f).read_bytes()


def test_stated_variant_fails_with_pointer(tmp_path, capsys):
    code, out = run(tmp_path, "verify", "--geom", str(GEOM / "ball2.json"), "--checks", "B")
    assert code == 1
    assert "FAIL B" in capsys.readouterr().err


def test_skip_does_not_fail(tmp_path):
    code, out = run(tmp_path, "verify", "--geom", str(GEOM / "ball2.json"), "--checks", "B,E,F",
                    "--variant", "corrected")
    assert code == 0
    verdicts = {c["name"]: c["verdict"] for c in json.loads((out / "verify.json").read_text())}
    assert verdicts == {"B": "pass", "E": "skip", "F": "skip"}


@pytest.mark.parametrize("args", [
    ["yamabe", "--geom", "no/such.json"],
    ["verify", "--geom", str(GEOM / "ball2.json"), "--checks", "B,Z"],
    ["scatter", "--geom", str(GEOM / "ball2.json"), "--s-grid", "1.2:1.1:0.1"],
    ["residues", "--geom", str(GEOM / "slab2.json"), "--q", "5"],
    ["scatter", "--geom", str(GEOM / "slab2.json"), "--s-grid", "1.2:1.3:0.1", "--modes", "1"],
])
def test_usage_errors(tmp_path, args):
    code, out = run(tmp_path, *args)
    assert code == 2
    assert not (out / "manifest.json").exists()


def test_malformed_geometry(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "WarpedBall", "n": 2}')
    code, _ = run(tmp_path, "yamabe", "--geom", str(bad))
    assert code == 2


def test_config_file_and_tiers(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"geom": str(GEOM / "slab2.json"), "checks": ["B"], "variant": "corrected"}))
    code, _ = run(tmp_path, "verify", "--config", str(cfg))
    assert code == 0
    cfg.write_text(json.dumps({"geom": str(GEOM / "slab2.json"), "tol_bvp": 1e-3, "tol_scattering": 1e-8}))
    code, _ = run(tmp_path, "verify", "--config", str(cfg))
    assert code == 2


def test_scatter_jobs_same_as_serial(tmp_path):
    base = ["scatter", "--geom", str(GEOM / "ball2.json"), "--s-grid", "1.2:1.8:0.2", "--modes", "0;1"]
    assert main(base + ["--out", str(tmp_path / "a")]) == 0
    assert main(base + ["--jobs", "3", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "scatter.csv").read_bytes() == (tmp_path / "b" / "scatter.csv").read_bytes()


def test_out_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SYGJMS_OUT", str(tmp_path / "env"))
    assert main(["constants", "--n", "2", "--qmax", "2"]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()


def test_budget_scale_tightens(tmp_path):
    code, _ = run(tmp_path, "verify", "--geom", str(GEOM / "slab2.json"), "--checks", "B",
                  "--variant", "corrected", "--budget-scale", "1e-6")
    assert code == 1


def test_console_script(tmp_path):
    exe = shutil.which("sygjms")
    cmd = [exe] if exe else [sys.executable, "-m", "sygjms"]
    p = subprocess.run(cmd + ["--help"], capture_output=True, text=True)
    assert p.returncode == 0 and "verify" in p.stdout
