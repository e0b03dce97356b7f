#!/usr/bin/env python3
"""Run every built-in scenario at full horizon and render all figures.

Requires both packages installed (``pip install -e . -e plots/``). Outputs
land in ``out/`` by default; pass a directory to change that.

    python scripts/reproduce_figures.py [OUT_DIR]
"""

import shutil
import subprocess
import sys
from pathlib import Path


def run(cmd: list[str]) -> None:
    print("+", " ".join(cmd), flush=True)
    subprocess.run(cmd, check=True)


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out")
    runner = shutil.which("manifold-ctrl") or sys.exit("manifold-ctrl not on PATH")
    plotter = shutil.which("plot")

    for scenario in ("rigid-track", "rigid-compare-lee", "quad-track",
                     "quad-track-disturbed", "zs-decay"):
        run([runner, "run", scenario, "--out", str(out)])

    if plotter is None:
        print("plot tool not installed; skipping figure rendering")
        return 0

    figures = [
        ("rigid", [out / "rigid-track.csv"]),
        ("rigid-compare", [out / "rigid-compare-lee_p4.csv",
                           out / "rigid-compare-lee_lee.csv"]),
        ("quad", [out / "quad-track.csv"]),
        ("quad-disturbed", [out / "quad-track-disturbed.csv"]),
    ]
    for kind, inputs in figures:
        cmd = [plotter, kind, "--in", str(inputs[0])]
        if len(inputs) > 1:
            cmd += ["--in2", str(inputs[1])]
        cmd += ["--out", str(out / f"{kind}.svg")]
        run(cmd)
    print(f"all outputs in {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
