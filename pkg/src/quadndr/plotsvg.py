"""Minimal deterministic SVG plotting for x-z trajectory comparisons."""
from __future__ import annotations

import numpy as np

_COLORS = ("#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e")
_W, _H, _M = 640, 420, 54


def write_xz_svg(path, series: dict, title: str = "") -> None:
    """Plot each named (M, 3) point array as an x-vs-z polyline.

    The output is plain static SVG text with no timestamps or random ids,
    so identical inputs produce identical bytes.
    """
    arrays = {name: np.asarray(pts, dtype=float).reshape(-1, 3) for name, pts in series.items()}
    allpts = np.concatenate(list(arrays.values()))
    x_lo, x_hi = float(allpts[:, 0].min()), float(allpts[:, 0].max())
    z_lo, z_hi = float(allpts[:, 2].min()), float(allpts[:, 2].max())
    x_span = (x_hi - x_lo) or 1.0
    z_span = (z_hi - z_lo) or 1.0

    def sx(x):
        return _M + (x - x_lo) / x_span * (_W - 2 * _M)

    def sz(z):
        return _H - _M - (z - z_lo) / z_span * (_H - 2 * _M)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{_M}" y1="{_H - _M}" x2="{_W - _M}" y2="{_H - _M}" stroke="black"/>',
        f'<line x1="{_M}" y1="{_M}" x2="{_M}" y2="{_H - _M}" stroke="black"/>',
        f'<text x="{_W // 2}" y="{_H - 14}" text-anchor="middle" font-size="12">x [m]</text>',
        f'<text x="16" y="{_H // 2}" font-size="12" '
        f'transform="rotate(-90 16 {_H // 2})">z [m]</text>',
    ]
    for i, (name, pts) in enumerate(arrays.items()):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{sx(p[0]):.2f},{sz(p[2]):.2f}" for p in pts)
        lines.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        lines.append(f'<text x="{_W - _M + 4}" y="{_M + 16 * i + 10}" font-size="11" '
                     f'fill="{color}">{name}</text>')
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
