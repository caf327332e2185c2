"""Plot data and dependency-free SVG line charts for a run directory."""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .diagnostics import fmt, read_timeseries

WIDTH, HEIGHT = 800, 600
MARGIN = 70


def _write_pairs(path: Path, header, xs, ys):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for x, y in zip(xs, ys):
            wr.writerow([fmt(x), fmt(y)])


def _ticks(lo, hi):
    return [lo + (hi - lo) * k / 4.0 for k in range(5)]


def line_chart_svg(xs, ys, title, xlabel, ylabel, log_y=False) -> str:
    """800x600 polyline chart; output depends only on the inputs."""
    pts = [(x, y) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y) and (not log_y or y > 0)]
    if log_y:
        pts = [(x, math.log10(y)) for x, y in pts]
    if not pts:
        pts = [(0.0, 0.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        pad = 0.5 * max(abs(y0), 1.0)
        y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    poly = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="30" text-anchor="middle" font-size="18">{_esc(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
    ]
    for tx in _ticks(x0, x1):
        out.append(f'<text x="{sx(tx):.2f}" y="{HEIGHT - MARGIN + 20}" text-anchor="middle" '
                   f'font-size="12">{tx:.3g}</text>')
    for ty in _ticks(y0, y1):
        label = f"1e{ty:.2f}" if log_y else f"{ty:.4g}"
        out.append(f'<text x="{MARGIN - 8}" y="{sy(ty) + 4:.2f}" text-anchor="end" font-size="12">{label}</text>')
    out += [
        f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 20}" text-anchor="middle" font-size="14">{_esc(xlabel)}</text>',
        f'<text x="20" y="{HEIGHT / 2:.0f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 20 {HEIGHT / 2:.0f})">{_esc(ylabel)}</text>',
        f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.5" points="{poly}"/>',
        "</svg>",
    ]
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_plots(run_dir, emit_svg=True, log_supu=True) -> list[Path]:
    run_dir = Path(run_dir)
    ts = run_dir / "timeseries.csv"
    if not ts.exists():
        raise FileNotFoundError(f"no timeseries in {run_dir}; was the run executed?")
    series = read_timeseries(ts)
    t = [r.t for r in series]
    F = [r.F for r in series]
    su = [r.sup_u for r in series]
    written = [run_dir / "F_vs_t.csv", run_dir / "supu_vs_t.csv"]
    _write_pairs(written[0], ("t", "F"), t, F)
    _write_pairs(written[1], ("t", "sup_u"), t, su)
    if emit_svg:
        charts = (
            ("F_vs_t.svg", line_chart_svg(t, F, "energy F", "t", "F")),
            ("supu_vs_t.svg", line_chart_svg(t, su, "sup u", "t", "sup u (log10)" if log_supu else "sup u",
                                             log_y=log_supu)),
        )
        for name, body in charts:
            (run_dir / name).write_text(body, encoding="utf-8")
            written.append(run_dir / name)
    return written
