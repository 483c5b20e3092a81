import json
import re

import pytest

from hosc.cli import main
from hosc.verify import Check, run_verify

TINY = {
    "version": 1,
    "signal": {"builtin": "checkerboard", "size": 8, "squares": 2},
    "activation": {"kind": "hosc", "beta": 2, "omega0": 30},
    "net": {"hidden_layers": 1, "width": 8},
    "train": {"epochs": 5},
}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_fit_and_rerun(tmp_path, capsys):
    cfg = write(tmp_path, "run.json", TINY)
    assert main(["--out", str(tmp_path / "o"), "fit", cfg]) == 0
    manifest = capsys.readouterr().out.strip().splitlines()[-1]
    assert manifest.endswith("manifest.json")
    assert main(["--out", str(tmp_path / "o"), "fit", manifest]) == 0


def test_fit_diverged_exit(tmp_path):
    raw = dict(TINY, activation={"kind": "scaled_sine", "beta": 14}, train={"epochs": 5, "lr": 1e200})
    assert main(["--out", str(tmp_path), "fit", write(tmp_path, "d.json", raw)]) == 2


@pytest.mark.parametrize("body", ["{not json", json.dumps(dict(TINY, bogus=1)), json.dumps(dict(TINY, signal={"path": "missing.ppm"}))])
def test_fit_bad_input(tmp_path, capsys, body):
    assert main(["--out", str(tmp_path), "fit", write(tmp_path, "bad.json", body)]) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_fit_missing_file(tmp_path):
    assert main(["--out", str(tmp_path), "fit", str(tmp_path / "nope.json")]) == 1


def test_sweep(tmp_path, capsys):
    spec = write(tmp_path, "s.json", {"version": 1, "base": TINY, "axis": {"beta": [1, 3]}})
    assert main(["--out", str(tmp_path / "o"), "sweep", spec]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[-1].endswith("results.csv")
    assert len(out) == 3


def test_sweep_bad_spec(tmp_path):
    spec = write(tmp_path, "s.json", {"version": 1, "base": TINY, "axis": {}})
    assert main(["--out", str(tmp_path), "sweep", spec]) == 1


def test_ntk(tmp_path, capsys):
    cfg = write(tmp_path, "n.json", {"version": 1, "betas": [1, 2], "grid_points": 8, "width": 4, "seeds": 1})
    assert main(["--out", str(tmp_path / "o"), "ntk", cfg]) == 0
    out_dir = capsys.readouterr().out.strip().splitlines()[-1]
    assert (tmp_path / "o").joinpath(out_dir.split("/")[-1], "ntk.csv").exists()


def test_ntk_bad_config(tmp_path):
    assert main(["--out", str(tmp_path), "ntk", write(tmp_path, "n.json", {"version": 1, "betas": []})]) == 1


def test_verify_fault_injection(capsys):
    assert main(["verify", "--skip-ntk", "--bound-scale", "0.5"]) == 1
    out = capsys.readouterr().out
    assert re.search(r"^FAIL gating_measure ", out, re.M)
    assert out.strip().splitlines()[-1].startswith("FAILED")


def test_verify_passes():
    lines = []
    report = run_verify(lines.append)
    assert report.passed
    assert lines[-1].startswith("OK ")
    pat = re.compile(r"^(PASS|FAIL) \S+ .*measured=\S+ (<=|>=|<|>|==|~=) bound=\S+$")
    assert all(pat.match(ln) for ln in lines[:-1]), [ln for ln in lines[:-1] if not pat.match(ln)]


def test_check_line_format():
    c = Check("lipschitz_sup", "beta=2 omega0=30", 60.0, "<=", 60.0, True)
    assert c.line() == "PASS lipschitz_sup beta=2 omega0=30 measured=6.000000e+01 <= bound=6.000000e+01"
