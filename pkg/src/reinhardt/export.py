"""CSV, JSON and static SVG output.

CSV and JSON are written deterministically (floats via repr) so that a
fixed configuration reproduces identical bytes.  SVG is for viewing only.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n")
    return path


@dataclass
class SvgPlot:
    """A minimal 2-D line plot with equal or free aspect ratio."""
    title: str = ""
    width: int = 640
    height: int = 640
    equal_aspect: bool = True
    series: list = field(default_factory=list)

    def line(self, points, color: str | None = None, width: float = 1.5,
             closed: bool = False, label: str = "") -> "SvgPlot":
        if np.iscomplexobj(points):
            pts = np.column_stack([np.real(points), np.imag(points)])
        else:
            pts = np.asarray(points, dtype=float)
        color = color or PALETTE[len(self.series) % len(PALETTE)]
        self.series.append(("line", pts, color, width, closed, label))
        return self

    def dots(self, points, color: str | None = None, radius: float = 2.0,
             label: str = "") -> "SvgPlot":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        color = color or PALETTE[len(self.series) % len(PALETTE)]
        self.series.append(("dots", pts, color, radius, False, label))
        return self

    def _bounds(self):
        allpts = np.vstack([s[1] for s in self.series if len(s[1])])
        allpts = allpts[np.all(np.isfinite(allpts), axis=1)]
        lo, hi = allpts.min(axis=0), allpts.max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        if self.equal_aspect:
            span[:] = span.max()
            centre = (lo + hi) / 2
            lo, hi = centre - span / 2, centre + span / 2
        pad = 0.05 * span
        return lo - pad, hi + pad

    def render(self) -> str:
        lo, hi = self._bounds()
        margin = 30
        w, h = self.width - 2 * margin, self.height - 2 * margin

        def tx(p):
            x = margin + (p[:, 0] - lo[0]) / (hi[0] - lo[0]) * w
            y = margin + (hi[1] - p[:, 1]) / (hi[1] - lo[1]) * h
            return x, y

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
               f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">',
               '<rect width="100%" height="100%" fill="white"/>']
        if self.title:
            out.append(f'<text x="{margin}" y="20" font-family="sans-serif" '
                       f'font-size="14">{self.title}</text>')
        legend_y = margin + 14
        for kind, pts, color, size, closed, label in self.series:
            pts = pts[np.all(np.isfinite(pts), axis=1)]
            if not len(pts):
                continue
            x, y = tx(pts)
            if kind == "line":
                coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
                tag = "polygon" if closed else "polyline"
                out.append(f'<{tag} points="{coords}" fill="none" stroke="{color}" '
                           f'stroke-width="{size}"/>')
            else:
                out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="{size}" fill="{color}"/>'
                           for a, b in zip(x, y))
            if label:
                out.append(f'<text x="{self.width - margin - 150}" y="{legend_y}" '
                           f'font-family="sans-serif" font-size="12" fill="{color}">{label}</text>')
                legend_y += 16
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render())
        return path
