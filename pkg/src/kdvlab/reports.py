"""Artifact writers: CSV, JSON and a minimal SVG line plot."""

from __future__ import annotations

import csv
import io
import json
import math
import os


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return to_jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


class ArtifactWriter:
    """Writes files into one output directory and remembers their names."""

    def __init__(self, out_dir, formats):
        self.out_dir = out_dir
        self.formats = set(formats)
        self.written = []
        os.makedirs(out_dir, exist_ok=True)

    def _write(self, name, text):
        with open(os.path.join(self.out_dir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.written.append(name)

    def json(self, name, obj):
        if "json" in self.formats:
            self._write(name, dumps(obj))

    def csv(self, name, header, rows):
        if "csv" in self.formats:
            self._write(name, csv_text(header, rows))

    def csv_raw(self, name, text):
        if "csv" in self.formats:
            self._write(name, text)

    def svg(self, name, series, **kw):
        if "svg" in self.formats:
            self._write(name, svg_line_plot(series, **kw))

    def always(self, name, obj):
        self._write(name, dumps(obj))


def _nice(v):
    return f"{v:.4g}"


def svg_line_plot(series, title="", xlabel="", ylabel="", logx=False, logy=False,
                  width=640, height=400):
    """Polyline plot of ``{name: (xs, ys)}`` with simple axes and a legend."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = {}
    for name, (xs, ys) in series.items():
        p = [(tx(x), ty(y)) for x, y in zip(xs, ys)
             if (x > 0 or not logx) and (y > 0 or not logy) and math.isfinite(y)]
        pts[name] = p
    allp = [q for p in pts.values() for q in p] or [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(q[0] for q in allp), max(q[0] for q in allp)
    y0, y1 = min(q[1] for q in allp), max(q[1] for q in allp)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    ml, mr, mt, mb = 70, 20, 30, 50
    pw, ph = width - ml - mr, height - mt - mb

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>',
           f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>']
    fx = (lambda v: _nice(10 ** v)) if logx else _nice
    fy = (lambda v: _nice(10 ** v)) if logy else _nice
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(xv):.1f}" y="{mt + ph + 16}" text-anchor="middle" '
                   f'font-size="10">{fx(xv)}</text>')
        out.append(f'<text x="{ml - 6}" y="{sy(yv) + 3:.1f}" text-anchor="end" '
                   f'font-size="10">{fy(yv)}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" '
               f'font-size="12">{xlabel}</text>')
    out.append(f'<text x="14" y="{mt + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 14 {mt + ph / 2:.1f})">{ylabel}</text>')
    for i, (name, p) in enumerate(pts.items()):
        c = colors[i % len(colors)]
        if p:
            d = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in p)
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{d}"/>')
        out.append(f'<text x="{ml + 10}" y="{mt + 14 + 14 * i}" font-size="11" fill="{c}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
