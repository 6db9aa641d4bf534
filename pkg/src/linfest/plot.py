"""Self-contained SVG chart of mean ℓ∞ error against N from a trial CSV."""

from __future__ import annotations

import csv
import math
from html import escape
from pathlib import Path

import numpy as np

from .errors import CsvParseError
from .experiments import CSV_HEADER

WIDTH, HEIGHT = 720, 480
MARGIN = dict(left=80, right=150, top=40, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def read_records(path) -> list[dict]:
    """Parse a trial CSV; raises CsvParseError with the offending line number."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CsvParseError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise CsvParseError("empty file, expected a header", line=1)
    if lines[0].strip() != CSV_HEADER:
        raise CsvParseError(f"header must be {CSV_HEADER!r}", line=1)
    cols = CSV_HEADER.split(",")
    out = []
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row:
            continue
        if len(row) != len(cols):
            raise CsvParseError(f"expected {len(cols)} fields, got {len(row)}", line=lineno)
        rec = dict(zip(cols, row))
        try:
            rec["N"] = int(rec["N"])
            rec["trial"] = int(rec["trial"])
            rec["linf"] = float(rec["linf"])
        except ValueError as exc:
            raise CsvParseError(f"bad numeric field: {exc}", line=lineno) from exc
        if not (math.isfinite(rec["linf"]) and rec["linf"] >= 0):
            raise CsvParseError(f"linf must be finite and >= 0, got {rec['linf']!r}", line=lineno)
        if rec["N"] < 1:
            raise CsvParseError("N must be positive", line=lineno)
        out.append(rec)
    if not out:
        raise CsvParseError("no trial records to plot", line=len(lines) + 1)
    return out


def summarize(records) -> dict:
    """{estimator: [(N, mean, se), ...]} in order of first appearance."""
    groups: dict = {}
    for r in records:
        groups.setdefault(r["estimator"], {}).setdefault(r["N"], []).append(r["linf"])
    series = {}
    for name, by_n in groups.items():
        pts = []
        for n in sorted(by_n):
            v = np.array(by_n[n])
            se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
            pts.append((n, float(v.mean()), se))
        series[name] = pts
    return series


def _nice_ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + (abs(lo) or 1.0)
    raw = (hi - lo) / count
    step = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 5, 10):
        if raw <= mult * step:
            step *= mult
            break
    first = math.floor(lo / step + 1e-9)
    last = math.ceil(hi / step - 1e-9)
    return [round(k * step, 12) for k in range(first, last + 1)]


def render_svg(series: dict, title: str = "") -> str:
    n_all = [n for pts in series.values() for n, _, _ in pts]
    lo_y = min(m - s for pts in series.values() for _, m, s in pts)
    hi_y = max(m + s for pts in series.values() for _, m, s in pts)
    yticks = _nice_ticks(max(0.0, lo_y), hi_y)
    y0, y1 = yticks[0], yticks[-1] if yticks[-1] > yticks[0] else yticks[0] + 1.0
    lx0 = math.floor(math.log10(min(n_all)))
    lx1 = math.ceil(math.log10(max(n_all)))
    if lx1 == lx0:
        lx1 += 1
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(n):
        return MARGIN["left"] + pw * (math.log10(n) - lx0) / (lx1 - lx0)

    def sy(v):
        return MARGIN["top"] + ph * (1.0 - (v - y0) / (y1 - y0))

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
             f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
             f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        parts.append(f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">'
                     f'{escape(title)}</text>')
    left, bottom = MARGIN["left"], MARGIN["top"] + ph
    parts.append(f'<line x1="{left}" y1="{bottom}" x2="{left + pw}" y2="{bottom}" stroke="black"/>')
    parts.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" stroke="black"/>')
    for e in range(lx0, lx1 + 1):
        x = sx(10.0 ** e)
        parts.append(f'<line x1="{x:.1f}" y1="{bottom}" x2="{x:.1f}" y2="{bottom + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{bottom + 20}" text-anchor="middle">10^{e}</text>')
    for t in yticks:
        y = sy(t)
        parts.append(f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end">{t:g}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">N</text>')
    parts.append(f'<text transform="translate(20,{MARGIN["top"] + ph / 2:.1f}) rotate(-90)" '
                 f'text-anchor="middle">mean l-infinity error</text>')

    for k, (name, pts) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        label = escape(name)
        parts.append(f'<g class="series" data-label="{label}" stroke="{color}" fill="{color}">')
        if len(pts) > 1:
            path = " ".join(f"{sx(n):.2f},{sy(m):.2f}" for n, m, _ in pts)
            parts.append(f'<polyline points="{path}" fill="none" stroke-width="1.5"/>')
        for n, m, se in pts:
            x = sx(n)
            if se > 0:
                parts.append(f'<line x1="{x:.2f}" y1="{sy(m - se):.2f}" x2="{x:.2f}" '
                             f'y2="{sy(m + se):.2f}" stroke-width="1"/>')
            if len(pts) == 1:
                parts.append(f'<circle cx="{x:.2f}" cy="{sy(m):.2f}" r="3.5"/>')
        parts.append("</g>")
        ly = MARGIN["top"] + 18 * k + 10
        lx = left + pw + 15
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 26}" y="{ly + 4}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plot(csv_path, out_path, title: str = "") -> Path:
    """Read ``csv_path`` and write the chart to ``out_path``; nothing is written on a parse error."""
    series = summarize(read_records(csv_path))
    svg = render_svg(series, title=title)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    return out
