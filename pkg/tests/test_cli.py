import subprocess
import sys

import pytest

from cranbench.cli import main
from cranbench.metrics import read_csv


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_single_capacity(capsys):
    assert run(capsys, "capacity", "--bw", "20", "--split", "fs6") == (0, "100.8\n", "")


def test_capacity_overrides(capsys):
    code, out, _ = run(capsys, "capacity", "--bw", "20", "--split", "fs1", "--n-ant", "4")
    assert code == 0 and out.strip() == "4915.2"
    code, out, _ = run(capsys, "capacity", "--bw", "20", "--split", "fs1", "--f-coding", "66/64")
    assert code == 0 and float(out) == pytest.approx(2457.6 * 66 / 64 / 1.25, abs=0.05)


def test_capacity_table_and_csv(capsys, tmp_path):
    path = tmp_path / "t.csv"
    code, out, _ = run(capsys, "capacity", "--csv", str(path))
    assert code == 0 and "FS-VII" in out and "2457.6" in out
    assert len(path.read_text().splitlines()) == 8


def test_check_published_flag(capsys):
    code, out, _ = run(capsys, "capacity", "--check-paper")
    assert code == 0
    assert "41/42 cells match, 1 known discrepancy, 0 unexpected mismatch" in out
    (line,) = [x for x in out.splitlines() if "KNOWN DISCREPANCY" in x]
    assert "FS-III" in line and "1440.00" in line and "1140.0" in line


@pytest.mark.parametrize("argv", [
    ["capacity", "--bw", "7"],
    ["capacity", "--split", "fs9"],
    ["capacity", "--n-ant", "0"],
    ["capacity", "--f-coding", "x"],
    ["budget", "--km", "-1"],
    ["bench", "--workers", "0", "--subframes", "1"],
    ["bench", "--mode", "turbo"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_1(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1 and "error" in err


def test_budget(capsys):
    code, out, _ = run(capsys, "budget", "--km", "40", "--hops", "8")
    assert code == 0
    assert "transmission time : 680.0 us" in out
    assert "remaining budget  : 320.0 us" in out
    assert "feasible" in out
    code, out, _ = run(capsys, "budget", "--km", "200", "--link", "ul")
    assert "remaining budget  : 600.0 us" in out
    code, out, _ = run(capsys, "budget", "--km", "200")
    assert "INFEASIBLE" in out


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "c.conf"
    cfg.write_text("# budget\nkm = 40\nhops = 8\n")
    code, out, _ = run(capsys, "budget", "--config", str(cfg))
    assert code == 0 and "320.0 us" in out
    code, out, _ = run(capsys, "budget", "--config", str(cfg), "--hops", "0")
    assert "720.0 us" in out
    cfg.write_text("bw = 20\nsplit = fs6\ncheck_paper = false\n")
    assert run(capsys, "capacity", "--config", str(cfg))[1] == "100.8\n"


@pytest.mark.parametrize("text", ["colour = red\n", "just a line\n"])
def test_bad_config_file(capsys, tmp_path, text):
    cfg = tmp_path / "c.conf"
    cfg.write_text(text)
    assert run(capsys, "budget", "--config", str(cfg))[0] == 1
    assert run(capsys, "budget", "--config", str(tmp_path / "nope"))[0] == 1


def test_bench_writes_csv(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("CRANBENCH_OUTPUT_DIR", str(tmp_path))
    code, out, _ = run(capsys, "bench", "--workers", "2", "--mode", "none,tb,cb", "--ues", "2",
                       "--tbs", "7000", "--subframes", "3", "--seed", "4")
    assert code == 0
    assert "gain of mode cb vs none" in out
    for m in ("none", "tb", "cb"):
        records, meta = read_csv(tmp_path / f"records_{m}.csv")
        assert meta["mode"] == m and meta["seed"] == "4"
        assert all(not r.problems(8) for r in records)
        assert (tmp_path / f"summary_{m}.csv").exists()
    assert len(read_csv(tmp_path / "records_cb.csv")[0]) == 2 * 3 * 2 * 2


def test_bench_unwritable_output_is_runtime_error(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = run(capsys, "bench", "--subframes", "1", "--ues", "1", "--tbs", "100",
                       "--workers", "1", "--out-dir", str(blocker / "sub"))
    assert code == 2 and "runtime error" in err


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "cranbench.cli", "capacity", "--bw", "1.4", "--split", "fs7"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == "5.5"


def test_budget_variants(capsys):
    out = run(capsys, "budget", "--km", "0", "--hops", "0")[1]
    assert "remaining budget  : 1000.0 us" in out
    out = run(capsys, "budget", "--km", "40", "--hops", "8", "--us-per-km", "4.7619")[1]
    assert "transmission time : 590.5 us" in out


def _latency(capsys, tmp_path, mode, workers, tag):
    out_dir = tmp_path / tag
    code = main(["bench", "--workers", str(workers), "--mode", mode, "--ues", "3", "--tbs", "24000",
                 "--subframes", "15", "--direction", "decode", "--seed", "9", "--out-dir", str(out_dir)])
    capsys.readouterr()
    assert code == 0
    from cranbench.metrics import summarize

    records, _ = read_csv(out_dir / f"records_{mode}.csv")
    return summarize(records), records


def test_one_worker_modes_serialize_equally(capsys, tmp_path):
    none, _ = _latency(capsys, tmp_path, "none", 1, "a")
    cb, _ = _latency(capsys, tmp_path, "cb", 1, "b")
    from cranbench.metrics import Direction

    a = none.subframe_latency[Direction.DECODE].mean
    b = cb.subframe_latency[Direction.DECODE].mean
    assert abs(b - a) / a < 0.10, (a, b)


def test_same_seed_same_verdicts(capsys, tmp_path):
    _, r1 = _latency(capsys, tmp_path, "cb", 2, "x")
    _, r2 = _latency(capsys, tmp_path, "cb", 2, "y")
    key = lambda rs: sorted((r.subframe_id, r.ue_id, r.cb_index, r.outcome, r.iterations) for r in rs)  # noqa: E731
    assert key(r1) == key(r2)


def test_default_profile_cb_beats_none(capsys, tmp_path):
    from cranbench.bench import physical_cores

    if physical_cores() < 4:
        pytest.skip(f"parallel speed-up needs >= 4 physical cores, host has {physical_cores()}")
    none, _ = _latency(capsys, tmp_path, "none", 6, "n")
    cb, _ = _latency(capsys, tmp_path, "cb", 6, "c")
    from cranbench.metrics import Direction

    assert cb.subframe_latency[Direction.DECODE].mean < none.subframe_latency[Direction.DECODE].mean
