"""CSV, JSON and SVG emission.  CSV is canonical; SVG is cosmetic."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Sequence
from xml.sax.saxutils import escape

from .montecarlo import CoincidenceHistogram

FRINGE_HEADER = ("phi_rad", "pA", "pB", "pA_err", "pB_err")
HISTOGRAM_HEADER = ("tau_ns_bin_center", "count")


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def fringe_csv(rows: Sequence[tuple[float, float, float, float, float]]) -> str:
    return _csv(FRINGE_HEADER, [tuple(float(x) for x in row) for row in rows])


def histogram_csv(histogram: CoincidenceHistogram) -> str:
    rows = [(float(c), int(n)) for c, n in zip(histogram.bin_centers_ns, histogram.counts)]
    return _csv(HISTOGRAM_HEADER, rows)


@dataclass
class RunSummary:
    """Self-contained record of one CLI run."""

    command: str
    mode: str
    config: dict[str, Any]
    fringe: list[dict[str, float]] = field(default_factory=list)
    fit: dict[str, Any] = field(default_factory=dict)
    predicted_contrast: float | None = None
    fidelity: float | None = None
    success_probabilities: dict[str, float] = field(default_factory=dict)
    window_totals: dict[str, Any] = field(default_factory=dict)
    duration_s: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=False) + "\n"


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def svg_plot(
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    xlabel: str,
    ylabel: str,
    title: str = "",
    width: int = 640,
    height: int = 400,
) -> str:
    """Polyline plot of one or more (x, y) series with marked points."""
    xs = [x for sx, _ in series.values() for x in sx]
    ys = [y for _, sy in series.values() for y in sy]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(0.0, min(ys)), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def px(x: float) -> float:
        return left + (x - x0) / (x1 - x0) * pw

    def py(y: float) -> float:
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for i in range(5):
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{left - 6}" y="{py(yv) + 4:.1f}" font-size="11" text-anchor="end">{yv:.3g}</text>')
        xv = x0 + (x1 - x0) * i / 4
        out.append(f'<text x="{px(xv):.1f}" y="{top + ph + 16}" font-size="11" text-anchor="middle">{xv:.3g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 12}" font-size="13" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>'
    )
    if title:
        out.append(f'<text x="{left + pw / 2}" y="24" font-size="14" text-anchor="middle">{escape(title)}</text>')
    for k, (name, (sx, sy)) in enumerate(series.items()):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(sx, sy))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.extend(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.5" fill="{color}"/>' for x, y in zip(sx, sy))
        out.append(f'<text x="{left + pw - 8}" y="{top + 16 + 15 * k}" font-size="12" fill="{color}" text-anchor="end">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
