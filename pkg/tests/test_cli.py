import subprocess
import sys

import pytest

from dualcbf.cli import EXIT_CONTACT, EXIT_OK, EXIT_USAGE, TABLE_ROWS, main
from dualcbf.config import load_config
from dualcbf.sim import read_summary_metrics


def test_run_writes_trace_and_summary(tmp_path, capsys):
    assert main(["run", "--scenario", "rooms", "--ticks", "40", "--seed", "2", "--out-dir", str(tmp_path)]) == 0
    out = tmp_path / "rooms_2_filtered"
    assert (out / "trace.csv").read_text().count("\n") == 41
    cfg = load_config(out / "summary.txt")
    assert (cfg.scenario, cfg.ticks, cfg.seed, cfg.filter_enabled) == ("rooms", 40, 2, True)
    assert "explored_area" in read_summary_metrics(out / "summary.txt")
    assert "wrote" in capsys.readouterr().out


def test_run_reads_config_file_and_flags_override(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(f"scenario = corridor\nticks = 500\nseed = 5\nout_dir = {tmp_path}\nv_max = 0.15\n")
    assert main(["run", "--config", str(cfg_path), "--ticks", "15", "--no-filter"]) == 0
    cfg = load_config(tmp_path / "corridor_5_baseline" / "summary.txt")
    assert cfg.ticks == 15 and cfg.v_max == 0.15 and not cfg.filter_enabled


def test_compare_table(tmp_path, capsys):
    assert main(["compare", "--scenario", "rooms", "--ticks", "30", "--seeds", "2",
                 "--out-dir", str(tmp_path)]) == 0
    report = (tmp_path / "rooms_compare.txt").read_text()
    for label, _, _ in TABLE_ROWS:
        assert label in report
    assert "paired seeds" in report
    for seed in (0, 1):
        for mode in ("filtered", "baseline"):
            assert (tmp_path / f"rooms_{seed}_{mode}" / "trace.csv").is_file()


def test_compare_without_filter_pairs_identical_traces(tmp_path):
    assert main(["compare", "--scenario", "corridor", "--ticks", "40", "--seeds", "1", "--no-filter",
                 "--jobs", "2", "--out-dir", str(tmp_path)]) == 0
    a = (tmp_path / "corridor_0_filtered" / "trace.csv").read_text()
    b = (tmp_path / "corridor_0_baseline" / "trace.csv").read_text()
    assert a == b
    assert "filter disabled in both arms" in (tmp_path / "corridor_compare.txt").read_text()


def test_admissibility_report(capsys):
    assert main(["admissibility"]) == 0
    out = capsys.readouterr().out
    assert "tanh" in out and "identity" in out


@pytest.mark.parametrize("argv", [
    ["run", "--scenario", "atlantis"],
    ["run", "--bogus"],
    ["run", "--ticks", "0"],
    ["run", "--config", "/nonexistent/file.cfg"],
    ["compare", "--seeds", "0"],
    ["verify", "--verify-tolerance", "-1"],
    [],
])
def test_usage_errors_exit_one(argv):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == EXIT_USAGE


def test_contact_exit_code(tmp_path):
    cfg_path = tmp_path / "wide.cfg"
    cfg_path.write_text("robot_radius = 0.5\n")
    code = main(["run", "--scenario", "corridor", "--config", str(cfg_path), "--no-filter", "--ticks", "600",
                 "--out-dir", str(tmp_path), "--fail-on-contact"])
    assert code == EXIT_CONTACT
    code = main(["run", "--scenario", "corridor", "--config", str(cfg_path), "--no-filter", "--ticks", "600",
                 "--out-dir", str(tmp_path)])
    assert code == EXIT_OK


def test_module_entry_point_and_version():
    res = subprocess.run([sys.executable, "-m", "dualcbf", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("dualcbf ")


@pytest.mark.slow
def test_verify_passes(capsys):
    assert main(["--verify"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "verification passed" in out and "[FAIL]" not in out
