#!/usr/bin/env python3
"""
Test suite for the command line and run output
Subcommands, exit codes, byte-identical outputs and partial-output cleanup
"""

import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from trotter_stability.cli import cli, main
from trotter_stability.utils import RunWriter, to_jsonable

NOISE_YAML = """\
name: pauli_noise
source:
  kind: pauli
order: 2
r: 2
lambda: 0.5
noise:
  epsilon_m: 0.001
  mode: gaussian
  master_seed: 5
trials: 300
"""


def _write(tmp: str, name: str, text: str) -> Path:
    path = Path(tmp) / name
    path.write_text(text)
    return path


def test_to_jsonable():
    """Infinite values become strings; numpy values become Python values"""
    data = to_jsonable({"a": np.float64(np.inf), "b": np.arange(3), 1: (np.int64(4), -np.inf), "c": np.bool_(True)})
    assert data == {"a": "inf", "b": [0, 1, 2], "1": [4, "-inf"], "c": True}
    assert json.dumps(data)
    print("✓ test_to_jsonable")


def test_run_writer_discards_on_failure():
    """Files written before an exception are removed, along with new directories"""
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "nested" / "run"
        with pytest.raises(RuntimeError):
            with RunWriter(out) as writer:
                writer.write_json("a.json", {"x": 1})
                writer.write_csv("b.csv", pd.DataFrame({"x": [1.0]}))
                raise RuntimeError("boom")
        assert not out.exists()
        assert not (Path(tmp) / "nested").exists()
    print("✓ test_run_writer_discards_on_failure")


def test_bounds_command():
    """bounds writes the report; overflowing values are written as "inf" """
    with tempfile.TemporaryDirectory() as tmp:
        code = main(["bounds", "--n", "100", "--dim", "4", "--epsilon-m", "1e-5", "--epsilon-t", "1e-2", "--out", tmp])
        assert code == 0
        report = json.loads((Path(tmp) / "bounds.json").read_text())
        assert report["cor4_epsilon_m"] == pytest.approx(9.79e-6, rel=2e-3)

        code = main(["bounds", "--n", "2000", "--dim", "4", "--epsilon-m", "1e-3", "--out", tmp])
        assert code == 0
        assert json.loads((Path(tmp) / "bounds.json").read_text())["thm2_lower"] == "inf"
    print("✓ test_bounds_command")


def test_schedule_command():
    """schedule writes the term list and the exponential counts"""
    with tempfile.TemporaryDirectory() as tmp:
        assert main(["schedule", "--order", "4", "--r", "2", "--out", tmp]) == 0
        document = json.loads((Path(tmp) / "schedule.json").read_text())
        assert len(document["schedule"]["terms"]) == 40
        assert document["cost"]["raw_exponentials"] == 40
        assert document["schedule"]["order_spec"] == {"kind": "suzuki", "k": 2, "r": 2}
    print("✓ test_schedule_command")


def test_schedule_reports_raw_and_merged_counts():
    """The schedule summary line carries both exponential counts"""
    with tempfile.TemporaryDirectory() as tmp:
        result = CliRunner().invoke(cli, ["schedule", "--merge", "--out", tmp])
        assert result.exit_code == 0, result.output
        assert "N=3 factors: 4 raw, 3 merged exponentials" in result.output
    print("✓ test_schedule_reports_raw_and_merged_counts")


def test_noise_sim_is_byte_identical():
    """Same seed gives identical files for any thread count"""
    with tempfile.TemporaryDirectory() as tmp:
        config = _write(tmp, "noise.yaml", NOISE_YAML)
        runs = []
        for name, threads in (("a", "1"), ("b", "1"), ("c", "3")):
            out = Path(tmp) / name
            assert main(["noise-sim", "--config", str(config), "--out", str(out), "--threads", threads]) == 0
            runs.append(out)

        for filename in ("trials.csv", "summary.json"):
            first = (runs[0] / filename).read_bytes()
            assert all((run / filename).read_bytes() == first for run in runs[1:])

        lines = (runs[0] / "trials.csv").read_text().splitlines()
        assert lines[0] == "trial,epsilon,epsilon_net"
        assert len(lines) == 301

        other = Path(tmp) / "d"
        assert main(["noise-sim", "--config", str(config), "--out", str(other), "--seed", "6"]) == 0
        assert (other / "trials.csv").read_bytes() != (runs[0] / "trials.csv").read_bytes()
    print("✓ test_noise_sim_is_byte_identical")


def test_noise_sim_sweep_outputs():
    """Sweeps write one trial file per point plus sweep.csv"""
    with tempfile.TemporaryDirectory() as tmp:
        config = _write(tmp, "sweep.yaml", NOISE_YAML.replace("r: 2\n", "sweep:\n  N: [8, 16]\n"))
        out = Path(tmp) / "out"
        assert main(["noise-sim", "--config", str(config), "--out", str(out), "--trials", "150"]) == 0
        assert (out / "sweep.csv").exists()
        assert len(list(out.glob("trials_*.csv"))) == 2
        summary = json.loads((out / "summary.json").read_text())
        assert [p["N"] for p in summary["points"]] == [8, 16]
        assert summary["points"][0]["trials"] == 150
    print("✓ test_noise_sim_sweep_outputs")


def test_invalid_input_exits_one():
    """Bad configs, flags and commands exit 1 without writing output"""
    with tempfile.TemporaryDirectory() as tmp:
        bad = _write(tmp, "bad.yaml", NOISE_YAML.replace("epsilon_m: 0.001", "epsilon_m: 0.7"))
        out = Path(tmp) / "out"
        assert main(["noise-sim", "--config", str(bad), "--out", str(out)]) == 1
        assert not out.exists()

        assert main(["noise-sim", "--config", str(Path(tmp) / "missing.yaml")]) == 1
        assert main(["schedule", "--order", "3", "--out", str(out)]) == 1
        assert main(["bounds", "--n", "0", "--dim", "4", "--epsilon-m", "1e-3"]) == 1
        assert main(["no-such-command"]) == 1
        assert not out.exists()
    print("✓ test_invalid_input_exits_one")


def test_unused_sweep_axis_exits_one():
    """A sweep axis the command does not expand is invalid input"""
    with tempfile.TemporaryDirectory() as tmp:
        config = _write(tmp, "lam.yaml", NOISE_YAML + "sweep:\n  lambda: [0.25, 0.5]\n")
        out = Path(tmp) / "out"
        assert main(["noise-sim", "--config", str(config), "--out", str(out)]) == 1
        assert not out.exists()

        config = _write(tmp, "dim.yaml", "source:\n  kind: pauli\nsweep:\n  dim: [2, 4, 8]\n")
        assert main(["ideal-error", "--config", str(config), "--out", str(out)]) == 1
        assert not out.exists()
    print("✓ test_unused_sweep_axis_exits_one")


def test_nonfinite_trials_exit_two():
    """A campaign whose products overflow exits 2 and leaves nothing behind"""
    overflowing = """\
source:
  kind: scalar
  rate: 700.0
order: 1
N: 400
lambda: 1.0
noise:
  epsilon_m: 0.49
  mode: lognormal
trials: 100
"""
    with tempfile.TemporaryDirectory() as tmp:
        config = _write(tmp, "overflow.yaml", overflowing)
        out = Path(tmp) / "out"
        assert main(["noise-sim", "--config", str(config), "--out", str(out)]) == 2
        assert not out.exists()
    print("✓ test_nonfinite_trials_exit_two")


def test_help_exits_zero():
    assert main(["--help"]) == 0
    print("✓ test_help_exits_zero")


def test_hubbard_command():
    """hubbard reports τ, cost and budget for the periodic 2 × 2 lattice"""
    with tempfile.TemporaryDirectory() as tmp:
        assert main(["hubbard", "--out", tmp]) == 0
        report = json.loads((Path(tmp) / "hubbard.json").read_text())
        assert report["edge_count"] == 8
        assert report["tau"] == 4.0
        assert report["N_exp"] == pytest.approx(4.53e5, rel=0.01)
        assert report["term_matrix"][2] == [-1.0, 1.0, 2.0, 0.0]

        assert main(["hubbard", "--eta", "3", "--boundary", "open", "--out", tmp]) == 0
        assert json.loads((Path(tmp) / "hubbard.json").read_text())["edge_count"] == 12
    print("✓ test_hubbard_command")


def test_ideal_error_command():
    """ideal-error writes one CSV row per sweep point"""
    with tempfile.TemporaryDirectory() as tmp:
        config = _write(tmp, "ideal.yaml", "source:\n  kind: pauli\norder: 1\nsweep:\n  r: [1, 2, 4]\n")
        assert main(["ideal-error", "--config", str(config), "--out", tmp]) == 0
        lines = (Path(tmp) / "ideal_error.csv").read_text().splitlines()
        assert lines[0] == "lambda,r,k,ideal_error"
        assert len(lines) == 4
    print("✓ test_ideal_error_command")


def test_repro_subset():
    """repro runs the named bundled campaigns and records passing checks"""
    with tempfile.TemporaryDirectory() as tmp:
        args = ["repro", "--out", tmp, "--only", "hubbard_2x2", "--only", "trotter_refinement"]
        assert main(args) == 0
        summary = json.loads((Path(tmp) / "repro_summary.json").read_text())
        names = [c["campaign"] for c in summary["campaigns"]]
        assert names == ["hubbard_2x2", "trotter_refinement"]
        assert all(check["passed"] for c in summary["campaigns"] for check in c["checks"])
        assert (Path(tmp) / "trotter_refinement" / "ideal_error.csv").exists()

        assert main(["repro", "--out", tmp, "--only", "nonexistent"]) == 1
    print("✓ test_repro_subset")


def test_runner_lists_every_test_file():
    """run_all_tests.py runs each test_*.py in this directory"""
    tests_dir = Path(__file__).parent
    runner = (tests_dir / "run_all_tests.py").read_text()
    for path in sorted(tests_dir.glob("test_*.py")):
        assert f'"{path.name}"' in runner, path.name
    print("✓ test_runner_lists_every_test_file")


def run_all_tests():
    """Run all CLI tests"""
    tests = [
        test_to_jsonable,
        test_run_writer_discards_on_failure,
        test_bounds_command,
        test_schedule_command,
        test_schedule_reports_raw_and_merged_counts,
        test_noise_sim_is_byte_identical,
        test_noise_sim_sweep_outputs,
        test_invalid_input_exits_one,
        test_unused_sweep_axis_exits_one,
        test_nonfinite_trials_exit_two,
        test_help_exits_zero,
        test_hubbard_command,
        test_ideal_error_command,
        test_repro_subset,
        test_runner_lists_every_test_file,
    ]

    print("\nRunning CLI Tests")
    print("=" * 40)

    failed = []
    for test in tests:
        try:
            test()
        except AssertionError as e:
            print(f"✗ {test.__name__}: {e}")
            failed.append(test.__name__)
        except Exception as e:
            print(f"✗ {test.__name__}: Unexpected error - {e}")
            failed.append(test.__name__)

    print("=" * 40)
    if not failed:
        print(f"✅ All {len(tests)} tests passed!")
        return True
    else:
        print(f"❌ {len(failed)} tests failed: {', '.join(failed)}")
        return False


if __name__ == "__main__":
    os.chdir(Path(__file__).parent.parent)
    success = run_all_tests()
    sys.exit(0 if success else 1)
