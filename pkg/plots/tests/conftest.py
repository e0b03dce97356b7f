"""Fixtures that produce real runner CSVs through the CLI interface."""

import shutil
import subprocess
import sys

import pytest


def runner_command() -> list[str]:
    exe = shutil.which("manifold-ctrl")
    if exe:
        return [exe]
    return [sys.executable, "-m", "manifold_ctrl.cli"]


def run_scenario(out_dir, scenario, *extra):
    cmd = runner_command() + ["run", scenario, "--out", str(out_dir), *extra]
    proc = subprocess.run(cmd, capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    return out_dir


@pytest.fixture(scope="session")
def csv_dir(tmp_path_factory):
    """CSVs for every figure kind, generated by the scenario runner."""
    out = tmp_path_factory.mktemp("runner-out")
    run_scenario(out, "rigid-track", "--t-end", "1")
    run_scenario(out, "rigid-compare-lee", "--t-end", "1")
    run_scenario(out, "quad-track", "--t-end", "1")
    run_scenario(out, "quad-track-disturbed", "--t-end", "5")
    run_scenario(out, "zs-decay", "--t-end", "1")
    return out
