import json
import math
import subprocess
import sys

import pytest

from chainrule import __version__
from chainrule.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _rows(out):
    return [line.split(",") for line in out.splitlines() if line and not line.startswith("#")][1:]


def test_scan_peak_and_footer(capsys):
    code, out, _ = _run(capsys, "scan", "--resolution", "101")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == f"# chainrule {__version__}"
    assert lines[1].startswith("# ") and "channel_e=gad:0.3:0" in lines[1] and "seed=42" in lines[1]
    assert lines[2] == "p,value"
    rows = _rows(out)
    assert len(rows) == 101
    best = max(rows, key=lambda r: float(r[1]))
    assert float(best[0]) == pytest.approx(0.84, abs=0.011)
    tag, p_star, v_star = lines[-1].lstrip("# ").split(",")
    assert tag == "optimizer"
    assert float(p_star) == pytest.approx(0.8355, abs=5e-4)
    assert float(v_star) == pytest.approx(0.9176, abs=2e-4)


def test_scan_same_channel_zero_column(capsys):
    code, out, _ = _run(capsys, "scan", "--channel-f", "gad:0.3:0", "--resolution", "11")
    assert code == 0
    assert all(abs(float(v)) < 1e-12 for _, v in _rows(out))


def test_scan_natural_log(capsys):
    _, out, _ = _run(capsys, "scan", "--resolution", "11", "--log-base", "e")
    assert "log_base=e" in out.splitlines()[1]
    assert float(out.splitlines()[-1].split(",")[2]) == pytest.approx(0.9176 * math.log(2), abs=2e-4)


@pytest.mark.parametrize("argv,flag", [
    (["scan", "--channel-e", "gad:0.3"], "--channel-e"),
    (["scan", "--channel-f", "nonsense"], "--channel-f"),
    (["stein", "--n-max", "9"], "--n-max"),
    (["check", "--suites", "nope"], "--suites"),
])
def test_usage_errors_exit_two(capsys, argv, flag):
    code, out, err = _run(capsys, *argv)
    assert code == 2 and out == ""
    assert err.startswith("error: ") and flag in err


def test_divergence_identity_zero(capsys):
    code, out, _ = _run(capsys, "divergence", "--channel-e", "identity:2", "--channel-f", "identity:2")
    rec = json.loads(out.splitlines()[-1])
    assert code == 0 and abs(float(rec["value"])) < 1e-12
    assert rec["certified"] is False and rec["ansatz"]["kind"] == "diag-1param"


def test_divergence_dmax_certified(capsys):
    _, out, _ = _run(capsys, "divergence", "--kind", "dmax", "--channel-e", "identity:2",
                     "--channel-f", "gad:0:0")
    rec = json.loads(out.splitlines()[-1])
    assert rec["certified"] is True and abs(float(rec["value"])) < 1e-12


def test_stein_output(capsys):
    code, out, _ = _run(capsys, "stein", "--n-max", "2", "--resolution", "101")
    assert code == 0
    rows = _rows(out)
    assert [r[0] for r in rows] == ["1", "2"]
    assert out.splitlines()[-1].startswith("# single_letter,")


def test_check_reports_json_lines(capsys, tmp_path):
    path = tmp_path / "report.jsonl"
    code, out, err = _run(capsys, "check", "--suites", "counterexample_corrected", "--out", str(path))
    assert code == 0 and out == ""
    recs = [json.loads(line) for line in path.read_text().splitlines()]
    assert recs[0]["config"]["suites"] == "counterexample_corrected"
    assert all(r["passed"] for r in recs[1:]) and len(recs) == 3
    assert "counterexample_corrected: 2/2 passed" in err


def test_check_failure_exit_code(capsys):
    code, _, err = _run(capsys, "check", "--suites", "counterexample")
    assert code == 1
    assert "FAILED counterexample/remark_counterexample" in err


def test_heatmap_byte_identical_across_workers(tmp_path):
    outputs = []
    for w in (1, 2, 8):
        path = tmp_path / f"h{w}.csv"
        assert main(["heatmap", "--grid-points", "3", "--resolution", "11", "--workers", str(w),
                     "--out", str(path)]) == 0
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    assert len(outputs[0].decode().splitlines()) == 3 + 9


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "chainrule.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == __version__
