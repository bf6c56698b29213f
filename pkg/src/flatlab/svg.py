"""Standalone SVG histograms written by hand (no plotting dependency)."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def histogram_svg(series: dict, title: str = "", bins: int = 40, width: int = 640,
                  height: int = 360, xlabel: str = "") -> str:
    """Overlayed step histograms (as density polylines) of named samples."""
    vals = [np.asarray(v, dtype=float) for v in series.values() if len(v)]
    if not vals:
        lo, hi = 0.0, 1.0
    else:
        allv = np.concatenate(vals)
        lo, hi = float(allv.min()), float(allv.max())
        if hi <= lo:
            hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    dens = {k: np.histogram(v, bins=edges, density=True)[0] if len(v) else np.zeros(bins)
            for k, v in series.items()}
    top = max((float(d.max()) for d in dens.values()), default=1.0) or 1.0
    m = 40
    pw, ph = width - 2 * m, height - 2 * m

    def X(v):
        return m + (v - lo) / (hi - lo) * pw

    def Y(d):
        return height - m - d / top * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>',
           f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>',
           f'<text x="{width / 2}" y="{m / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
           f'<text x="{m}" y="{height - m + 14}" text-anchor="middle" font-size="10">{lo:.3g}</text>',
           f'<text x="{width - m}" y="{height - m + 14}" text-anchor="middle" font-size="10">{hi:.3g}</text>']
    for j, (name, d) in enumerate(dens.items()):
        pts = []
        for i in range(bins):
            pts.append(f"{X(edges[i]):.2f},{Y(d[i]):.2f}")
            pts.append(f"{X(edges[i + 1]):.2f},{Y(d[i]):.2f}")
        col = PALETTE[j % len(PALETTE)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        out.append(f'<text x="{width - m - 4}" y="{m + 14 * (j + 1)}" text-anchor="end" '
                   f'font-size="11" fill="{col}">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_histogram(path, series, **kw):
    with open(path, "w") as fh:
        fh.write(histogram_svg(series, **kw))
