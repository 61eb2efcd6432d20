"""End-to-end command-line runs against generated network files."""
from __future__ import annotations

import json

import pytest

from floodmit.cli import main
from floodmit import synth


@pytest.fixture()
def demo(tmp_path):
    p = tmp_path / "demo.json"
    assert synth.main(["demo", str(p)]) == 0
    return p


@pytest.fixture()
def paradox(tmp_path):
    p = tmp_path / "paradox.json"
    assert synth.main(["paradox", str(p)]) == 0
    return p


def test_synth_writer_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert synth.main(["demo", str(a)]) == 0
    assert synth.main(["demo", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert "wrote" in capsys.readouterr().out


def test_ingest_reports_and_writes(demo, tmp_path, capsys):
    out = tmp_path / "work"
    code = main(["ingest", str(demo), "--alpha", "0.15",
                 "--out-dir", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert "full repair bill" in text and "budget" in text
    first = (out / "instance.json").read_bytes()
    assert main(["ingest", str(demo), "--alpha", "0.15",
                 "--out-dir", str(out)]) == 0
    assert (out / "instance.json").read_bytes() == first
    payload = json.loads(first)
    assert payload["spec"]["alpha"] == 0.15


def test_solve_writes_stable_artifacts(demo, tmp_path, capsys):
    out = tmp_path / "run"
    argv = ["solve", str(demo), "--alpha", "0.15", "--out-dir", str(out)]
    assert main(argv) == 0
    text = capsys.readouterr().out
    assert "status       Optimal" in text
    first = (out / "solution.json").read_bytes()
    log_first = (out / "prunelog.json").read_bytes()
    assert main(argv) == 0
    assert (out / "solution.json").read_bytes() == first
    assert (out / "prunelog.json").read_bytes() == log_first
    payload = json.loads(first)
    assert payload["status"] == "Optimal"
    assert payload["objective"] == pytest.approx(751.8050323809525)
    assert not any(k.startswith("wall_time") for k in payload["stats"])


def test_solve_reports_model_infeasibility(demo, tmp_path, capsys):
    # zero slack makes shelter space exactly equal demand; an odd resident
    # count split over even capacity cannot be packed, a genuine model answer
    code = main(["solve", str(demo), "--alpha", "0", "--out-dir",
                 str(tmp_path / "zero")])
    assert code == 2
    assert "Infeasible" in capsys.readouterr().out


def test_operational_errors_exit_1(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", str(bad)]) == 1
    demo = tmp_path / "demo.json"
    synth.main(["demo", str(demo)])
    assert main(["ingest", str(demo), "--alpha", "-3"]) == 1
    err = capsys.readouterr().err
    assert "error:" in err


def test_oracle_command_on_paradox_family(paradox, tmp_path, capsys):
    low, high = synth.BUDGET_PARADOX_PAIR
    out = tmp_path / "oracle.json"
    code = main(["oracle", str(paradox), "--p", "1", "--alpha", "0",
                 "--unit-cost", "200",
                 "--budget-fraction", str(low / 160.0), "--out", str(out)])
    assert code == 0
    small = json.loads(out.read_text())
    code = main(["oracle", str(paradox), "--p", "1", "--alpha", "0",
                 "--unit-cost", "200",
                 "--budget-fraction", str(high / 160.0), "--out", str(out)])
    assert code == 0
    big = json.loads(out.read_text())
    # the smaller budget buys strictly more roads
    assert len(small["upgrades"]) > len(big["upgrades"])
    assert small["objective"] == pytest.approx(60.0)
    assert big["objective"] == pytest.approx(30.0)


def test_sweep_and_frequency_commands(demo, tmp_path, capsys):
    out = tmp_path / "an"
    argv = ["sweep", str(demo), "--alpha", "0.15", "--fractions", "0.5,1",
            "--out-dir", str(out)]
    assert main(argv) == 0
    assert "written:" in capsys.readouterr().out
    first = (out / "sweep.csv").read_bytes()
    assert main(argv) == 0
    assert (out / "sweep.csv").read_bytes() == first
    assert first.startswith(b"fraction,budget,status,objective,excess")

    assert main(["frequency", str(demo), "--alpha", "0.15",
                 "--fractions", "0.5,1", "--out-dir", str(out)]) == 0
    assert (out / "frequency.csv").read_text().startswith("arc,count,share")


def test_ewtt_command_with_segments(demo, tmp_path, capsys):
    out = tmp_path / "crit"
    assert main(["ewtt", str(demo), "--alpha", "0.15", "--segments",
                 "--out-dir", str(out)]) == 0
    text = capsys.readouterr().out
    assert "ewtt" in text
    assert (out / "ewtt.csv").exists() and (out / "segments.csv").exists()
    first = (out / "ewtt.csv").read_bytes()
    assert main(["ewtt", str(demo), "--alpha", "0.15", "--segments",
                 "--out-dir", str(out)]) == 0
    assert (out / "ewtt.csv").read_bytes() == first


def test_export_lp_stable(demo, tmp_path, capsys):
    out = tmp_path / "lp"
    argv = ["export-lp", str(demo), "--alpha", "0.15", "--out-dir", str(out)]
    assert main(argv) == 0
    assert "constraints" in capsys.readouterr().out
    first = (out / "model.lp").read_bytes()
    assert main(argv) == 0
    assert (out / "model.lp").read_bytes() == first
    assert first.startswith(b"\\ floodmit")


def test_prune_command_table(demo, tmp_path, capsys):
    out = tmp_path / "pr"
    assert main(["prune", str(demo), "--alpha", "0.15",
                 "--out-dir", str(out)]) == 0
    text = capsys.readouterr().out
    assert "technique" in text and "rounds:" in text
    assert (out / "prunelog.json").exists()
