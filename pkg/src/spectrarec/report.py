"""Report export: metric, range and per-channel CSVs plus an SVG chart."""
from __future__ import annotations

import math
import os
import xml.etree.ElementTree as ET

import numpy as np

from ._io import atomic_write, fmt, read_csv, write_csv
from .errors import ValidationError
from .metrics import METRIC_NAMES

METRICS_CSV = "metrics.csv"
RANGES_CSV = "ranges.csv"
CHANNELS_CSV = "channels.csv"
CHART_SVG = "channels.svg"

METRICS_HEADER = ["metric", "mean", "std"]
RANGES_HEADER = ["metric", "range", "channels", "mean", "std"]
CHANNELS_HEADER = ["channel", "wavelength_nm", "mae_mean", "mae_std", "psnr_mean", "psnr_std"]


def write_report(report, out_dir):
    """Write the three CSVs and the chart; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, name) for name in (METRICS_CSV, RANGES_CSV, CHANNELS_CSV, CHART_SVG)}
    write_csv(paths[METRICS_CSV], METRICS_HEADER,
              [(name, *report.metrics[name]) for name in METRIC_NAMES])
    write_csv(paths[RANGES_CSV], RANGES_HEADER,
              [("mae", kind, int(report.range_channels[kind]), *report.per_range[kind])
               for kind in report.per_range])
    wl = report.wavelengths
    if wl is None:
        wl = np.arange(len(report.mae_mean), dtype=np.float64)
    rows = [(c, float(wl[c]), report.mae_mean[c], report.mae_std[c], report.psnr_mean[c], report.psnr_std[c])
            for c in range(len(report.mae_mean))]
    write_csv(paths[CHANNELS_CSV], CHANNELS_HEADER, rows)
    with atomic_write(paths[CHART_SVG], "w") as fh:
        fh.write(render_chart(wl, report.mae_mean, report.psnr_mean))
    return paths


def _check(header, expected, path):
    if header != expected:
        raise ValidationError(f"{path}: expected header {','.join(expected)}, got {','.join(header)}")


def read_metrics_csv(path):
    header, rows = read_csv(path)
    _check(header, METRICS_HEADER, path)
    return {name: (float(m), float(s)) for name, m, s in rows}


def read_ranges_csv(path):
    """Map range kind to ``(channels, mean, std)`` for the MAE rows."""
    header, rows = read_csv(path)
    _check(header, RANGES_HEADER, path)
    return {kind: (int(n), float(m), float(s)) for metric, kind, n, m, s in rows if metric == "mae"}


def read_channels_csv(path):
    """Return a dict of column name to array."""
    header, rows = read_csv(path)
    _check(header, CHANNELS_HEADER, path)
    cols = list(zip(*rows)) if rows else [[] for _ in header]
    out = {name: np.array([float(v) for v in col]) for name, col in zip(header, cols)}
    out["channel"] = out["channel"].astype(np.int64)
    return out


# -- chart --------------------------------------------------------------------

PANEL_W, PANEL_H, MARGIN = 480, 200, 50


def _bounds(values):
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def _project(x, y, xb, yb, top):
    px = MARGIN + (x - xb[0]) / (xb[1] - xb[0]) * PANEL_W
    py = top + PANEL_H - (y - yb[0]) / (yb[1] - yb[0]) * PANEL_H
    return px, py


def render_chart(wavelengths, mae, psnr):
    """Two stacked panels of per-channel MAE and PSNR against wavelength.

    Each polyline carries its axis bounds as ``data-*`` attributes so the
    points can be mapped back to data values.
    """
    wl = [float(v) for v in wavelengths]
    xb = _bounds(wl)
    height = 2 * (PANEL_H + MARGIN) + MARGIN
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(PANEL_W + 2 * MARGIN), height=str(height))
    for i, (name, values, unit) in enumerate((("mae", mae, ""), ("psnr", psnr, " (dB)"))):
        top = MARGIN + i * (PANEL_H + MARGIN)
        vals = [float(v) for v in values]
        yb = _bounds(vals)
        ET.SubElement(svg, "rect", x=str(MARGIN), y=str(top), width=str(PANEL_W), height=str(PANEL_H),
                      fill="none", stroke="#888")
        title = ET.SubElement(svg, "text", x=str(MARGIN), y=str(top - 8), **{"font-size": "12"})
        title.text = f"{name.upper()}{unit} per channel"
        for value, y in ((yb[1], top + 4), (yb[0], top + PANEL_H)):
            label = ET.SubElement(svg, "text", x="2", y=str(y), **{"font-size": "10"})
            label.text = f"{value:.4g}"
        pts = [_project(x, y, xb, yb, top) for x, y in zip(wl, vals) if math.isfinite(y)]
        ET.SubElement(svg, "polyline", id=name, fill="none", stroke="#1f77b4" if i == 0 else "#d62728",
                      points=" ".join(f"{fmt(px)},{fmt(py)}" for px, py in pts),
                      **{"data-x-min": fmt(xb[0]), "data-x-max": fmt(xb[1]), "data-y-min": fmt(yb[0]),
                         "data-y-max": fmt(yb[1]), "data-top": str(top)})
    axis = ET.SubElement(svg, "text", x=str(MARGIN + PANEL_W // 2), y=str(height - 10), **{"font-size": "12"})
    axis.text = "wavelength (nm)"
    return ET.tostring(svg, encoding="unicode") + "\n"


def parse_chart(text):
    """Recover ``{polyline id: (x values, y values)}`` in data units."""
    root = ET.fromstring(text)
    out = {}
    for line in root.iter("{http://www.w3.org/2000/svg}polyline"):
        a = line.attrib
        xb = float(a["data-x-min"]), float(a["data-x-max"])
        yb = float(a["data-y-min"]), float(a["data-y-max"])
        top = float(a["data-top"])
        pts = [tuple(map(float, p.split(","))) for p in a["points"].split()]
        xs = np.array([xb[0] + (px - MARGIN) / PANEL_W * (xb[1] - xb[0]) for px, _ in pts])
        ys = np.array([yb[0] + (top + PANEL_H - py) / PANEL_H * (yb[1] - yb[0]) for _, py in pts])
        out[a["id"]] = (xs, ys)
    return out


def format_summary(metrics, ranges):
    """Plain-text table of metric means/stds and the range MAE split."""
    lines = [f"{'metric':<8}{'mean':>14}{'std':>14}"]
    lines += [f"{name:<8}{m:>14.6g}{s:>14.6g}" for name, (m, s) in metrics.items()]
    lines.append("")
    lines.append(f"{'range':<10}{'channels':>9}{'mae_mean':>14}{'mae_std':>14}")
    lines += [f"{kind:<10}{n:>9}{m:>14.6g}{s:>14.6g}" for kind, (n, m, s) in ranges.items()]
    return "\n".join(lines)
