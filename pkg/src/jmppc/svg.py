"""Minimal SVG overlay plots: grey replicate curves, black observed curve, dashed band."""

from __future__ import annotations

import numpy as np

from .gof import CheckReport, uniform_grid

WIDTH, HEIGHT = 640, 420
MARGIN = (60, 20, 30, 50)  # left, right, top, bottom


def _nice_ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


def _num(x: float) -> str:
    return f"{x:.2f}"


def render_svg(report: CheckReport, title: str = "") -> str:
    """SVG document showing every curve of ``report`` on its comparison range."""
    grid = uniform_grid(*report.range)
    obs = report.observed_curve(grid)
    reps = [c(grid) for c in report.replicate_curves]
    band = report.observed_curve.band(grid) if report.observed_curve.lower is not None else None
    ys = [obs] + reps + (list(band) if band else [])
    ymin = float(min(np.nanmin(v) for v in ys))
    ymax = float(max(np.nanmax(v) for v in ys))
    if ymax <= ymin:
        ymax = ymin + 1.0
    pad = 0.04 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad
    x0, x1 = report.range
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom

    def px(x):
        return left + (np.asarray(x) - x0) / (x1 - x0) * pw

    def py(y):
        return top + (ymax - np.asarray(y)) / (ymax - ymin) * ph

    def poly(y, style):
        pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in zip(px(grid), py(y)) if np.isfinite(b))
        return f'<polyline fill="none" {style} points="{pts}"/>'

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _nice_ticks(x0, x1):
        if x0 <= t <= x1:
            out.append(f'<line x1="{_num(px(t))}" y1="{top + ph}" x2="{_num(px(t))}" y2="{top + ph + 5}" '
                       'stroke="black"/>')
            out.append(f'<text x="{_num(px(t))}" y="{top + ph + 18}" font-size="11" '
                       f'text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(ymin, ymax):
        if ymin <= t <= ymax:
            out.append(f'<line x1="{left - 5}" y1="{_num(py(t))}" x2="{left}" y2="{_num(py(t))}" stroke="black"/>')
            out.append(f'<text x="{left - 8}" y="{_num(py(t) + 4)}" font-size="11" '
                       f'text-anchor="end">{t:g}</text>')
    out.append('<g class="replicates">')
    for y in reps:
        out.append(poly(y, 'stroke="#9e9e9e" stroke-width="1"'))
    out.append("</g>")
    if band:
        out.append('<g class="band">')
        for y in band:
            out.append(poly(y, 'stroke="black" stroke-width="1" stroke-dasharray="5,4"'))
        out.append("</g>")
    out.append('<g class="observed">')
    out.append(poly(obs, 'stroke="black" stroke-width="2"'))
    out.append("</g>")
    label = title or report.statistic
    out.append(f'<text x="{left}" y="{top - 10}" font-size="13">{label} (MISE {report.mise:.4g})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(report: CheckReport, path, title: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_svg(report, title))
