"""CSV tables with commented headers, and minimal SVG line plots."""

from __future__ import annotations

import csv
import math
import os
from xml.sax.saxutils import escape


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows, header=None) -> str:
    """Write ``rows`` under a ``# key = value`` preamble; floats use repr so values round-trip."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for k, v in (header or {}).items():
            fh.write(f"# {k} = {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    """(header dict, column names, rows of strings) from a file written by ``write_csv``."""
    header, lines = {}, []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# "):
                k, _, v = line[2:].rstrip("\n").partition(" = ")
                header[k] = v
            else:
                lines.append(line)
    rows = list(csv.reader(lines))
    return header, rows[0], rows[1:]


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_svg(path, series: dict, title="", xlabel="", ylabel="", logx=False, logy=False, size=(640, 420)) -> str:
    """Line plot of ``{label: (x, y)}`` as a standalone SVG file."""
    W, H = size
    m = {"l": 70, "r": 20, "t": 40, "b": 50}
    tx = math.log10 if logx else float
    ty = math.log10 if logy else float
    pts = {
        k: [(tx(a), ty(b)) for a, b in zip(x, y) if (a > 0 or not logx) and (b > 0 or not logy) and math.isfinite(b)]
        for k, (x, y) in series.items()
    }
    allx = [p[0] for v in pts.values() for p in v] or [0.0, 1.0]
    ally = [p[1] for v in pts.values() for p in v] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def sx(v):
        return m["l"] + (v - x0) / (x1 - x0) * (W - m["l"] - m["r"])

    def sy(v):
        return H - m["b"] - (v - y0) / (y1 - y0) * (H - m["t"] - m["b"])

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<path d="M{m["l"]},{m["t"]} V{H - m["b"]} H{W - m["r"]}" stroke="black" fill="none"/>',
        f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{H / 2}" text-anchor="middle" transform="rotate(-90 16 {H / 2})">{escape(ylabel)}</text>',
    ]
    for v, anchor, x, y in ((x0, "start", sx(x0), H - m["b"] + 16), (x1, "end", sx(x1), H - m["b"] + 16)):
        label = f"1e{v:.3g}" if logx else f"{v:.4g}"
        out.append(f'<text x="{x:.1f}" y="{y}" text-anchor="{anchor}">{label}</text>')
    for v in (y0, y1):
        label = f"1e{v:.3g}" if logy else f"{v:.4g}"
        out.append(f'<text x="{m["l"] - 6}" y="{sy(v) + 4:.1f}" text-anchor="end">{label}</text>')
    for i, (k, v) in enumerate(pts.items()):
        color = _COLORS[i % len(_COLORS)]
        if v:
            d = " ".join(f"{'M' if j == 0 else 'L'}{sx(a):.2f},{sy(b):.2f}" for j, (a, b) in enumerate(v))
            out.append(f'<path d="{d}" stroke="{color}" stroke-width="1.5" fill="none"/>')
        out.append(f'<text x="{W - m["r"] - 4}" y="{m["t"] + 14 * (i + 1)}" text-anchor="end" fill="{color}">{escape(k)}</text>')
    out.append("</svg>")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    return path
