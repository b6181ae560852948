import json
import subprocess
import sys

import numpy as np
import pytest

from greedygn.cli import main
from greedygn.report import read_trace_csv


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def quad_file(tmp_path, capsys):
    path = tmp_path / "q.npz"
    code, _, _ = run(capsys, "gen", "--kind", "quadratic", "--N", "100", "--m", "20",
                     "--n", "6", "--s", "2", "--seed", "7", "-o", str(path))
    assert code == 0
    return path


@pytest.mark.parametrize("strategy", ["md", "om"])
def test_demo_small(capsys, strategy):
    code, out, _ = run(capsys, "demo-small", "--strategy", strategy, "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["greedy"]["iterations"] == 3
    np.testing.assert_allclose(doc["greedy"]["x"], [0, 0, 0, 0, -0.1, 0.05, 0, 0], atol=1e-14)
    np.testing.assert_allclose(doc["l1"]["x"], [0, 0, 0, 0, -0.1, 0.05, 0, 0], atol=1e-14)


def test_demo_small_table(capsys):
    code, out, _ = run(capsys, "demo-small")
    assert code == 0 and "X_l1" in out


def test_invalid_strategy_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["demo-small", "--strategy", "nope"])
    assert exc.value.code == 2


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--bogus"])
    assert exc.value.code == 2


def test_gen_prints_verification(quad_file, capsys):
    code, out, _ = run(capsys, "gen", "--kind", "quadratic", "--m", "20", "--n", "6",
                       "--s", "2", "--seed", "7", "-o", str(quad_file), "--format", "json")
    summary = json.loads(out)
    assert code == 0
    assert summary["family_residual_max"] <= 1e-10


def test_gen_is_byte_deterministic(quad_file, tmp_path, capsys):
    other = tmp_path / "q2.npz"
    run(capsys, "gen", "--kind", "quadratic", "--N", "100", "--m", "20", "--n", "6",
        "--s", "2", "--seed", "7", "-o", str(other))
    assert other.read_bytes() == quad_file.read_bytes()


def test_gen_precondition_violation(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--kind", "exponential", "--m", "10", "--n", "6",
                       "--s", "4", "-o", str(tmp_path / "e.npz"))
    assert code == 2 and "n+s < m" in err
    code, _, _ = run(capsys, "gen", "--kind", "quadratic", "--m", "10")
    assert code == 2


def test_gen_uses_output_dir_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("GREEDYGN_OUTPUT_DIR", str(tmp_path))
    code, _, _ = run(capsys, "gen", "--kind", "small", "-o", "s.npz")
    assert code == 0 and (tmp_path / "s.npz").exists()


def test_solve_quadratic(quad_file, tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    code, out, _ = run(capsys, "solve", str(quad_file), "--format", "json",
                       "--trace-out", str(trace))
    assert code == 0
    doc = json.loads(out)
    assert doc["converged"]
    rows = read_trace_csv(trace.read_text())
    assert len(rows) == doc["iterations"]
    for prev, cur in zip(rows, rows[1:]):
        if not prev.restart:
            assert cur.support_size >= prev.support_size


def test_solve_kmax_one(quad_file, capsys):
    code, out, _ = run(capsys, "solve", str(quad_file), "--kmax", "1", "--format", "csv")
    assert code == 1
    assert len(read_trace_csv(out)) == 1


def test_solve_l1_small(tmp_path, capsys):
    path = tmp_path / "s.npz"
    run(capsys, "gen", "--kind", "small", "-o", str(path))
    code, out, _ = run(capsys, "solve", str(path), "--strategy", "l1", "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert doc["sparsity"] == 2 and doc["support"] == [4, 5]


def test_solve_corrupt_file(tmp_path, capsys):
    bad = tmp_path / "bad.npz"
    bad.write_text("garbage")
    code, _, err = run(capsys, "solve", str(bad))
    assert code == 2 and err
    code, _, _ = run(capsys, "solve", str(tmp_path / "missing.npz"))
    assert code == 2


def test_solve_config_overrides(quad_file, capsys):
    code, out, _ = run(capsys, "solve", str(quad_file), "--format", "json", "--eps-f", "1e-2",
                       "--prob", "0.05", "--c1", "0.01", "--shrink", "0.3")
    assert code == 0
    assert json.loads(out)["iterations"] < 9
    code, _, _ = run(capsys, "solve", str(quad_file), "--prob", "2")
    assert code == 2


def test_bench_shape(capsys, tmp_path):
    out_path = tmp_path / "grid.csv"
    code, _, _ = run(capsys, "bench", "--kind", "quadratic", "--m", "16,20", "--n", "2,4,6",
                     "--trials", "3", "--format", "csv", "-o", str(out_path))
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert lines[0].startswith("# greedygn-grid")
    assert len(lines) == 2 + 6


def test_bench_invalid_grid(capsys):
    code, _, _ = run(capsys, "bench", "--m", "10", "--n", "8")
    assert code == 2
    code, _, _ = run(capsys, "bench", "--strategies", "md,xx")
    assert code == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "greedygn", "demo-small", "--format", "csv"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0
    assert proc.stdout.startswith("method,k,x0")
