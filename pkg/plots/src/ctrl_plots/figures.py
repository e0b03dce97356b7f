"""Figure builders for the tracking-run CSV files.

Four figure kinds are supported:

    rigid           two panels: attitude and angular-velocity error
    rigid-compare   two input CSVs overlaid (solid vs dashed) plus the
                    control-magnitude panel
    quad            four panels: attitude error, angular-velocity error,
                    position error (solid) with velocity error (dashed),
                    and the thrust trace
    quad-disturbed  the quad layout plus dotted vertical markers at t = 3
                    and t = 4 bracketing the disturbance window

Rendering is read-only over its inputs. SVG output is deterministic:
re-rendering identical inputs yields identical bytes (a fixed hash salt
and no embedded date). Axes are auto-scaled with a 5% data margin.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # offline renderer; never needs a display

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("rigid", "rigid-compare", "quad", "quad-disturbed")

#: Columns each figure kind needs in its (first) input CSV.
REQUIRED_COLUMNS = {
    "rigid": ("t", "err_R", "err_Omega"),
    "rigid-compare": ("t", "err_R", "err_Omega", "u1", "u2", "u3"),
    "quad": ("t", "err_R", "err_Omega", "err_x", "err_xdot", "f"),
    "quad-disturbed": ("t", "err_R", "err_Omega", "err_x", "err_xdot", "f"),
}

DISTURBANCE_WINDOW = (3.0, 4.0)

_MARGIN = 0.05
_SVG_HASH_SALT = "ctrl-plots"


class PlotsError(Exception):
    """Base class for figure-generation errors."""


class MissingColumn(PlotsError):
    """An input CSV lacks a column the figure kind requires."""


class Io(PlotsError):
    """Reading an input or writing the output failed."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure to render: input CSV(s), kind, output path, format."""

    kind: str
    csv: Path
    out: Path
    csv2: Path | None = None
    fmt: str | None = None  # svg | png; inferred from ``out`` when None

    def format(self) -> str:
        fmt = self.fmt or Path(self.out).suffix.lstrip(".").lower()
        if fmt not in ("svg", "png"):
            raise PlotsError(f"unsupported output format {fmt!r} (svg or png)")
        return fmt


def load_csv(path: Path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Read one runner CSV into named columns, skipping comment lines."""
    try:
        lines = [
            line for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line and not line.startswith("#")
        ]
    except OSError as exc:
        raise Io(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise Io(f"{path} has no content")
    header = lines[0].split(",")
    for name in required:
        if name not in header:
            raise MissingColumn(f"{path} lacks required column {name!r}")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    if data.ndim != 2 or data.shape[0] == 0:
        raise Io(f"{path} has no data rows")
    return {name: data[:, j] for j, name in enumerate(header)}


def _control_norm(cols: dict[str, np.ndarray]) -> np.ndarray:
    return np.sqrt(cols["u1"] ** 2 + cols["u2"] ** 2 + cols["u3"] ** 2)


def _style_axis(ax, xlabel: str, ylabel: str) -> None:
    ax.margins(_MARGIN)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)


def _disturbance_markers(axes) -> None:
    for ax in axes:
        for t_mark in DISTURBANCE_WINDOW:
            ax.axvline(t_mark, linestyle=":", color="k", linewidth=1.0)


def build_figure(spec: FigureSpec):
    """Build (but do not save) the matplotlib figure for a spec."""
    if spec.kind not in FIGURE_KINDS:
        raise PlotsError(f"unknown figure kind {spec.kind!r}")
    required = REQUIRED_COLUMNS[spec.kind]
    cols = load_csv(spec.csv, required)
    t = cols["t"]

    if spec.kind == "rigid":
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
        ax1.plot(t, cols["err_R"])
        _style_axis(ax1, "t", "attitude error")
        ax2.plot(t, cols["err_Omega"])
        _style_axis(ax2, "t", "angular velocity error")

    elif spec.kind == "rigid-compare":
        if spec.csv2 is None:
            raise PlotsError("rigid-compare needs a second input CSV")
        cols2 = load_csv(spec.csv2, required)
        fig, (ax1, ax2, ax3) = plt.subplots(1, 3, figsize=(13, 3.2))
        for ax, name, label in ((ax1, "err_R", "attitude error"),
                                (ax2, "err_Omega", "angular velocity error")):
            ax.plot(t, cols[name], "-")
            ax.plot(cols2["t"], cols2[name], "--")
            _style_axis(ax, "t", label)
        ax3.plot(t, _control_norm(cols), "-")
        ax3.plot(cols2["t"], _control_norm(cols2), "--")
        _style_axis(ax3, "t", "control magnitude")

    else:  # quad, quad-disturbed
        fig, axes = plt.subplots(2, 2, figsize=(9, 6.4))
        (ax1, ax2), (ax3, ax4) = axes
        ax1.plot(t, cols["err_R"])
        _style_axis(ax1, "t", "attitude error")
        ax2.plot(t, cols["err_Omega"])
        _style_axis(ax2, "t", "angular velocity error")
        ax3.plot(t, cols["err_x"], "-")
        ax3.plot(t, cols["err_xdot"], "--")
        _style_axis(ax3, "t", "position (solid) / velocity (dashed) error")
        ax4.plot(t, cols["f"])
        _style_axis(ax4, "t", "thrust")
        if spec.kind == "quad-disturbed":
            _disturbance_markers([ax1, ax2, ax3, ax4])

    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> Path:
    """Render a figure spec to its output file and return the path."""
    fmt = spec.format()
    fig = build_figure(spec)
    out = Path(spec.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        with plt.rc_context({"svg.hashsalt": _SVG_HASH_SALT}):
            fig.savefig(out, format=fmt, metadata=_deterministic_metadata(fmt))
    except OSError as exc:
        raise Io(f"cannot write {out}: {exc}") from exc
    finally:
        plt.close(fig)
    return out


def _deterministic_metadata(fmt: str) -> dict | None:
    if fmt == "svg":
        return {"Date": None}
    return None
