"""
Run artifacts: fixed-column CSV files, the JSON run manifest and SVG plots.

Floats are written with 17 significant digits so a CSV round-trips to the
same doubles; JSON is dumped with sorted keys. Only the manifest's
`timestamp` differs between two runs of the same scenario and seed.
"""

import csv
import json
import logging
import os
import platform
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy
from jinja2 import Environment, FileSystemLoader

from . import __version__
from .constraints import DERIVATIVE_RTOL, DERIVATIVE_STEP, LATTICE_DELTA_CONVENTION
from .ensemble import KS_COEFFICIENT_99, MAX_BIN_DEVIATION, MAX_HALTED_FRACTION
from .errors import ConfigurationError
from .guidance import SHRINK_FACTOR, SHRINK_WINDOW

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).with_name("plot_templates")

PLOT_WIDTH = 640
PLOT_HEIGHT = 400
PLOT_MARGIN = 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def format_value(value, precision=17):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{precision}g}"
    return str(value)


def jsonable(value):
    """Plain JSON types: numpy scalars and arrays unwrapped, complex as [re, im], non-finite as None."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [jsonable(value.real), jsonable(value.imag)]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


def numerical_constants():
    """Tolerances fixed in code, recorded next to the scenario's own."""
    return {
        "derivative_step": DERIVATIVE_STEP,
        "derivative_rtol": DERIVATIVE_RTOL,
        "shrink_window": SHRINK_WINDOW,
        "shrink_factor": SHRINK_FACTOR,
        "ks_coefficient_99": KS_COEFFICIENT_99,
        "max_bin_deviation": MAX_BIN_DEVIATION,
        "max_halted_fraction": MAX_HALTED_FRACTION,
    }


def versions():
    return {
        "pilotwave": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


class OutputWriter:
    """Writes every artifact of one run into out_dir and remembers what it saved."""

    def __init__(self, out_dir, precision=17, plots=False):
        self.out_dir = Path(out_dir)
        self.precision = precision
        self.plots = plots
        self.saved = []
        self.env = Environment(
            loader=FileSystemLoader(str(TEMPLATE_DIR)),
            trim_blocks=True,
            lstrip_blocks=True
        )

    def _prepare(self, name):
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigurationError(f"cannot create output directory {self.out_dir}: {e}") from None
        if not os.access(self.out_dir, os.W_OK):
            raise ConfigurationError(f"output directory {self.out_dir} is not writable")
        return self.out_dir / name

    def _saved(self, path):
        size = os.path.getsize(path)
        self.saved.append(path.name)
        print(f"  ✓ Saved: {path} ({size} bytes)")
        logger.debug("wrote %s (%d bytes)", path, size)
        return path

    def write_text(self, name, text):
        path = self._prepare(name)
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        except OSError as e:
            print(f"  ✗ File write error: {e}")
            raise ConfigurationError(f"cannot write {path}: {e}") from None
        return self._saved(path)

    def write_csv(self, name, columns, rows):
        path = self._prepare(name)
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(columns)
                for row in rows:
                    if len(row) != len(columns):
                        raise ConfigurationError(f"{name}: row has {len(row)} values for {len(columns)} columns")
                    writer.writerow([format_value(v, self.precision) for v in row])
        except OSError as e:
            print(f"  ✗ File write error: {e}")
            raise ConfigurationError(f"cannot write {path}: {e}") from None
        return self._saved(path)

    def write_json(self, name, payload):
        return self.write_text(name, json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n")

    def write_manifest(self, command, scenario, status, results, error=None, timestamp=None):
        manifest = {
            "command": command,
            "status": status,
            "timestamp": timestamp or datetime.now(timezone.utc).isoformat(),
            "versions": versions(),
            "seed": scenario.seed if scenario is not None else None,
            "scenario": scenario.to_dict() if scenario is not None else None,
            "conventions": {
                "lattice_delta": LATTICE_DELTA_CONVENTION,
                "csv_float_format": f"%.{self.precision}g",
            },
            "numerical_constants": numerical_constants(),
            "results": results,
            "artifacts": sorted(self.saved),
            "error": error,
        }
        return self.write_json("manifest.json", manifest)

    def render(self, template_name, name, **context):
        if not self.plots:
            return None
        template = self.env.get_template(template_name)
        return self.write_text(name, template.render(**context))

    def line_plot(self, name, title, series, xlabel="t", ylabel=""):
        """series: list of (label, x, y)."""
        if not self.plots:
            return None
        return self.render("line_plot.svg.j2", name, **line_plot_context(title, series, xlabel, ylabel))

    def heatmap(self, name, title, values, extent, xlabel="x", ylabel="t"):
        """values: 2D array (rows along ylabel); extent: (x0, x1, y0, y1)."""
        if not self.plots:
            return None
        return self.render("heatmap.svg.j2", name, **heatmap_context(title, values, extent, xlabel, ylabel))


def _scale(values, low, high, start, stop):
    span = high - low if high > low else 1.0
    return start + (np.asarray(values, dtype=float) - low) / span * (stop - start)


def _ticks(low, high, count=5):
    return [float(v) for v in np.linspace(low, high, count)]


def line_plot_context(title, series, xlabel, ylabel):
    xs = np.concatenate([np.asarray(x, dtype=float) for _, x, _ in series])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, _, y in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right = PLOT_MARGIN, PLOT_WIDTH - PLOT_MARGIN // 2
    top, bottom = PLOT_MARGIN // 2, PLOT_HEIGHT - PLOT_MARGIN
    lines = []
    for index, (label, x, y) in enumerate(series):
        px = _scale(x, x0, x1, left, right)
        py = _scale(y, y0, y1, bottom, top)
        points = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        lines.append({"label": label, "points": points, "color": PALETTE[index % len(PALETTE)]})
    return {
        "title": title, "xlabel": xlabel, "ylabel": ylabel,
        "width": PLOT_WIDTH, "height": PLOT_HEIGHT,
        "left": left, "right": right, "top": top, "bottom": bottom,
        "lines": lines,
        "xticks": [{"pos": float(_scale(v, x0, x1, left, right)), "label": f"{v:.3g}"} for v in _ticks(x0, x1)],
        "yticks": [{"pos": float(_scale(v, y0, y1, bottom, top)), "label": f"{v:.3g}"} for v in _ticks(y0, y1)],
    }


def _color(fraction):
    """White to dark blue."""
    fraction = min(max(fraction, 0.0), 1.0)
    r = int(round(255 - 224 * fraction))
    g = int(round(255 - 136 * fraction))
    b = int(round(255 - 75 * fraction))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_context(title, values, extent, xlabel, ylabel):
    values = np.asarray(values, dtype=float)
    rows, cols = values.shape
    peak = float(values.max()) if values.size and values.max() > 0 else 1.0
    left, right = PLOT_MARGIN, PLOT_WIDTH - PLOT_MARGIN // 2
    top, bottom = PLOT_MARGIN // 2, PLOT_HEIGHT - PLOT_MARGIN
    cell_w = (right - left) / cols
    cell_h = (bottom - top) / rows
    cells = []
    for i in range(rows):
        for j in range(cols):
            cells.append({
                "x": left + j * cell_w,
                "y": bottom - (i + 1) * cell_h,
                "w": cell_w,
                "h": cell_h,
                "color": _color(values[i, j] / peak),
            })
    x0, x1, y0, y1 = (float(v) for v in extent)
    return {
        "title": title, "xlabel": xlabel, "ylabel": ylabel,
        "width": PLOT_WIDTH, "height": PLOT_HEIGHT,
        "left": left, "right": right, "top": top, "bottom": bottom,
        "cells": cells, "peak": f"{peak:.3g}",
        "xticks": [{"pos": float(_scale(v, x0, x1, left, right)), "label": f"{v:.3g}"} for v in _ticks(x0, x1)],
        "yticks": [{"pos": float(_scale(v, y0, y1, bottom, top)), "label": f"{v:.3g}"} for v in _ticks(y0, y1)],
    }
