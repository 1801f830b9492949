"""Deterministic CSV, JSON and SVG writers with a provenance first line."""

from __future__ import annotations

import json
import math
import os
from typing import Iterable, Sequence

from . import __version__


def provenance(config_hash: str) -> str:
    return f"snbumps {__version__} config={config_hash}"


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    if isinstance(x, float) or hasattr(x, "dtype"):
        return f"{float(x):.17g}"
    return str(x)


def csv_text(config_hash: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [f"# {provenance(config_hash)}", ",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def json_text(config_hash: str, payload: dict) -> str:
    """JSON has no comment syntax, so the provenance line is the first key."""
    body = {"_comment": provenance(config_hash)}
    body.update(payload)
    return json.dumps(body, indent=2, sort_keys=False, default=float) + "\n"


def write_text(path: str | os.PathLike, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# SVG


_W, _H, _PAD = 560, 400, 60


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _frame(config_hash: str, title: str, xlabel: str, ylabel: str) -> list[str]:
    return [
        f"<!-- {_esc(provenance(config_hash))} -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle">{_esc(xlabel)}</text>',
        f'<text x="16" y="{_H / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_H / 2})">{_esc(ylabel)}</text>',
        f'<rect x="{_PAD}" y="{_PAD / 2}" width="{_W - 1.5 * _PAD}" height="{_H - 1.5 * _PAD - _PAD / 2}" '
        'fill="none" stroke="black"/>',
    ]


def _span(vals: Sequence[float]) -> tuple[float, float]:
    lo, hi = min(vals), max(vals)
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def line_plot(config_hash: str, title: str, xlabel: str, ylabel: str,
              series: dict[str, tuple[Sequence[float], Sequence[float]]],
              logx: bool = False, refs: Sequence[float] = ()) -> str:
    """Polyline plot; ``refs`` draws dashed horizontal reference lines."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    xs = [tx(x) for xv, _ in series.values() for x in xv]
    ys = [y for _, yv in series.values() for y in yv if math.isfinite(y)] + list(refs)
    x0, x1 = _span(xs)
    y0, y1 = _span(ys)
    left, right = _PAD, _W - _PAD / 2
    top, bottom = _PAD / 2, _H - _PAD

    def px(x):
        return left + (tx(x) - x0) / (x1 - x0) * (right - left)

    def py(y):
        return bottom - (y - y0) / (y1 - y0) * (bottom - top)

    out = _frame(config_hash, title, xlabel, ylabel)
    for k in range(5):
        yv = y0 + k * (y1 - y0) / 4
        out.append(f'<text x="{left - 4}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
        xv = x0 + k * (x1 - x0) / 4
        lab = f"1e{xv:.2g}" if logx else f"{xv:.3g}"
        out.append(f'<text x="{left + k * (right - left) / 4:.1f}" y="{bottom + 16}" '
                   f'text-anchor="middle">{lab}</text>')
    for ref in refs:
        out.append(f'<line x1="{left}" x2="{right}" y1="{py(ref):.2f}" y2="{py(ref):.2f}" '
                   'stroke="gray" stroke-dasharray="4 3"/>')
    for n, (name, (xv, yv)) in enumerate(series.items()):
        c = colors[n % len(colors)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xv, yv) if math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{right - 4}" y="{top + 16 + 14 * n}" text-anchor="end" '
                   f'fill="{c}">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(config_hash: str, title: str, xlabel: str, ylabel: str,
            xs: Sequence[float], ys: Sequence[float], values) -> str:
    """values[i][j] at (xs[i], ys[j]); grayscale-to-blue ramp."""
    left, right = _PAD, _W - _PAD / 2
    top, bottom = _PAD / 2, _H - _PAD
    flat = [float(v) for row in values for v in row]
    v0, v1 = _span(flat)
    nx, ny = len(xs), len(ys)
    cw = (right - left) / nx
    ch = (bottom - top) / ny
    out = _frame(config_hash, title, xlabel, ylabel)
    for i in range(nx):
        for j in range(ny):
            a = (float(values[i][j]) - v0) / (v1 - v0)
            r = int(255 * (1 - a))
            g = int(255 * (1 - 0.6 * a))
            out.append(f'<rect x="{left + i * cw:.2f}" y="{bottom - (j + 1) * ch:.2f}" '
                       f'width="{cw + 0.3:.2f}" height="{ch + 0.3:.2f}" fill="rgb({r},{g},255)"/>')
    out.append(f'<text x="{left}" y="{bottom + 16}">{xs[0]:.4g}</text>')
    out.append(f'<text x="{right}" y="{bottom + 16}" text-anchor="end">{xs[-1]:.4g}</text>')
    out.append(f'<text x="{left - 4}" y="{bottom}" text-anchor="end">{ys[0]:.3g}</text>')
    out.append(f'<text x="{left - 4}" y="{top + 10}" text-anchor="end">{ys[-1]:.3g}</text>')
    out.append(f'<text x="{right}" y="{top - 4}" text-anchor="end">range [{v0:.6g}, {v1:.6g}]</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
