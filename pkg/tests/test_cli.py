import hashlib
import json
import os
import re
from pathlib import Path

import numpy as np
import pytest

from servorig.cli import main

MINI = ["--preset", "paper-mini"]


def run_pipeline(root, preset=MINI):
    """Run every stage inside ``root`` using relative paths."""
    here = os.getcwd()
    os.chdir(root)
    try:
        _stages(Path("."), preset)
    finally:
        os.chdir(here)
    return root


def _stages(work, preset):
    steps = [
        ["synth-fdr", "--out", str(work / "fdr.csv")],
        ["ingest", "--input", str(work / "fdr.csv"), "--positions", str(work / "pos.txt"),
         "--stats", str(work / "stats.json")],
        ["gen-schedule", "--positions", str(work / "pos.txt"),
         "--schedule", str(work / "sched.txt")],
        ["simulate", "--schedule", str(work / "sched.txt"), "--log", str(work / "log.csv")],
        ["analyze", "--log", str(work / "log.csv"), "--report", str(work / "report.json"),
         "--set", f"stats_path={work / 'stats.json'}"],
    ]
    for fmt in ("markdown", "csv", "svg"):
        steps.append(["report", str(work / "report.json"), "--format", fmt,
                      "--out-dir", str(work / "out")])
    for argv in steps:
        assert main(argv[:1] + list(preset) + argv[1:]) == 0, argv


def digest(folder):
    h = hashlib.sha256()
    for p in sorted(Path(folder).rglob("*")):
        if p.is_file():
            h.update(p.name.encode() + p.read_bytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("run1"))


class TestPipeline:
    def test_outputs(self, pipeline):
        stats = json.loads((pipeline / "stats.json").read_text())
        assert stats["negative"]["n"] == 1095 and stats["positive"]["n"] == 6557
        rep = json.loads((pipeline / "report.json").read_text())
        assert rep["design"]["levels"] == 3
        assert "Tests of Within-Subjects Effects" in (pipeline / "out" / "report.md").read_text()
        svg = (pipeline / "out" / "scatter_fit.svg").read_text()
        assert len(re.findall('class="fit"', svg)) == 3

    def test_byte_identical_rerun(self, pipeline, tmp_path):
        again = run_pipeline(tmp_path)
        for name in ("log.csv", "report.json", "stats.json", "sched.txt"):
            assert (again / name).read_bytes() == (pipeline / name).read_bytes()
        assert digest(again / "out") == digest(pipeline / "out")

    def test_default_wear_is_detected(self, pipeline):
        rep = json.loads((pipeline / "report.json").read_text())
        gg = rep["tables"]["Tests of Within-Subjects Effects"]["effect"][1]
        assert gg["Correction"] == "Greenhouse-Geisser" and gg["Sig."] < 0.05
        means = rep["charts"]["period_means"]["means"]
        assert means[0] < means[1] < means[2]


def test_pristine_log_has_no_time_effect(pipeline, tmp_path):
    log = tmp_path / "log.csv"
    assert main(["simulate", "--preset", "paper-mini", "--set", "wear_alpha=0",
                 "--schedule", str(pipeline / "sched.txt"), "--log", str(log)]) == 0
    assert main(["analyze", "--preset", "paper-mini", "--log", str(log),
                 "--report", str(tmp_path / "r.json"), "--set", "stats_path=none"]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["tables"]["Tests of Within-Subjects Effects"]["effect"][0]["Sig."] > 0.05


def test_constant_counts_log_still_reports(tmp_path, capsys):
    n = 30
    cmd = np.tile([-2, 1, 3], n // 3)
    rows = "".join(f"{i},{i * 232},{c},7\n" for i, c in enumerate(cmd))
    (tmp_path / "log.csv").write_text("cycle,sim_time_ms,commanded_deg,encoder_counts\n" + rows)
    rc = main(["analyze", "--log", str(tmp_path / "log.csv"), "--report", str(tmp_path / "r.json"),
               "--set", "period_cycles=10", "--set", "sample_size=10",
               "--set", "stats_path=none"])
    assert rc == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["tables"]["Tests of Within-Subjects Effects"]["degenerate"] is True
    assert rep["notes"]
    assert main(["report", str(tmp_path / "r.json"), "--format", "svg",
                 "--out-dir", str(tmp_path / "o")]) == 0


def test_short_log_reports_counts(pipeline, tmp_path, capsys):
    rc = main(["analyze", "--log", str(pipeline / "log.csv"), "--report", str(tmp_path / "r.json")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "39300" in err and "390000" in err


def test_simulate_100_rows(pipeline, tmp_path, capsys):
    log = tmp_path / "log.csv"
    rc = main(["simulate", "--set", "total_cycles=100", "--schedule", str(pipeline / "sched.txt"),
               "--log", str(log)])
    assert rc == 0
    assert len(log.read_text().splitlines()) == 101
    assert "simulated duration" in capsys.readouterr().out


def test_missing_input_names_path(tmp_path, capsys):
    missing = tmp_path / "nowhere.csv"
    assert main(["ingest", "--input", str(missing)]) == 1
    assert str(missing) in capsys.readouterr().err


def test_strict_ingest(tmp_path):
    src = tmp_path / "f.csv"
    src.write_text("fine_units\n10\n99999\n")
    args = ["ingest", "--input", str(src), "--positions", str(tmp_path / "p.txt"),
            "--stats", str(tmp_path / "s.json")]
    assert main(args) == 0
    assert main(args + ["--strict"]) == 1


def test_unknown_format_is_usage_error(pipeline):
    with pytest.raises(SystemExit) as info:
        main(["report", str(pipeline / "report.json"), "--format", "pdf"])
    assert info.value.code == 2


def test_invalid_config_lists_all(tmp_path, capsys):
    rc = main(["simulate", "--set", "ppr=0", "--set", "step_period_ms=-1",
               "--schedule", str(tmp_path / "s.txt")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "ppr" in err and "step_period_ms" in err


def test_show_config(capsys):
    assert main(["show-config", "--preset", "paper-mini"]) == 0
    out = capsys.readouterr().out
    assert "[servorig]" in out and "total_cycles = 39300" in out


def test_reference_schedule(tmp_path, capsys):
    assert main(["gen-schedule", "--reference", "--schedule", str(tmp_path / "s.txt")]) == 0
    assert len((tmp_path / "s.txt").read_text().split()) == 119
