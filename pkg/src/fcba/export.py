"""CSV and SVG output for single runs.

Everything written here is a pure function of its inputs: floats are printed
with ``repr`` precision and the SVG is assembled by hand, so identical runs give
identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Optional

import numpy as np

from .engine import Trace
from .model import BLOCKADE

# one table for every styling decision of the space-time diagram
STYLE = {
    "blockade": {"stroke": "#1f4fd8", "width": 1.2, "dash": None},
    "generated_blockade": {"stroke": "#1f4fd8", "width": 1.2, "dash": "3,2"},
    "arrow": {"stroke": "#d62728", "width": 0.8, "dash": None},
    "event": {"fill": "#000000", "radius": 0.9},
    "axis": {"stroke": "#444444", "width": 0.6},
    "background": "#ffffff",
    "size": (900, 600),
    "margin": 30,
}


def _fmt(x: float) -> str:
    return repr(float(x))


def header_lines(meta: Optional[dict]) -> list[str]:
    if not meta:
        return []
    return ["# " + json.dumps(meta, sort_keys=True, separators=(",", ":"))]


def events_csv(trace: Trace, meta: Optional[dict] = None) -> str:
    """Event log as CSV text; the first line carries ``meta`` as a JSON comment."""
    buf = io.StringIO()
    for line in header_lines(meta):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "position", "kind", "left_id", "right_id", "created_id"])
    for ev in trace.events:
        w.writerow([_fmt(ev.time), _fmt(ev.position), ev.kind.name, ev.participant_ids[0],
                    ev.participant_ids[1], "" if ev.created_id is None else ev.created_id])
    return buf.getvalue()


def write_events_csv(trace: Trace, path, meta: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(events_csv(trace, meta))


def trajectories(trace: Trace, t_max: Optional[float] = None) -> list[tuple[float, float, float, float, str]]:
    """Segments (x0, t0, x1, t1, style key) for every particle, cut at ``t_max``."""
    r = trace.raw
    if t_max is None:
        t_max = trace.end_time * 1.1 if trace.end_time > 0 else 1.0
    segs = []
    for s in range(trace.n_slots):
        v = int(r["vel"][s])
        t0 = float(r["birth_time"][s])
        if t0 > t_max:
            continue
        x0 = float(r["birth_pos"][s])
        t1 = min(float(r["death_time"][s]), t_max)
        x1 = x0 + v * (t1 - t0)
        if v == BLOCKADE:
            key = "generated_blockade" if r["generated"][s] else "blockade"
        else:
            key = "arrow"
        segs.append((x0, t0, x1, t1, key))
    return segs


def space_time_svg(trace: Trace, t_max: Optional[float] = None, meta: Optional[dict] = None,
                   x_range: Optional[tuple[float, float]] = None) -> str:
    """Space-time diagram: position to the right, time upwards."""
    width, height = STYLE["size"]
    m = STYLE["margin"]
    segs = trajectories(trace, t_max)
    if t_max is None:
        t_max = max([s[3] for s in segs], default=1.0) or 1.0
    if x_range is None:
        pos = trace.config.positions
        x_range = (float(pos.min()), float(pos.max())) if len(pos) else (0.0, 1.0)
    x_lo, x_hi = x_range
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    sx = (width - 2 * m) / (x_hi - x_lo)
    st = (height - 2 * m) / t_max

    def px(x):
        return m + (x - x_lo) * sx

    def py(t):
        return height - m - t * st

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">']
    if meta:
        out.append("<metadata>" + _escape(json.dumps(meta, sort_keys=True, separators=(",", ":"))) + "</metadata>")
    out.append(f'<rect width="{width}" height="{height}" fill="{STYLE["background"]}"/>')
    out.append(f'<clipPath id="plot"><rect x="{m}" y="{m}" width="{width - 2 * m}" '
               f'height="{height - 2 * m}"/></clipPath>')
    ax = STYLE["axis"]
    out.append(f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" '
               f'stroke="{ax["stroke"]}" stroke-width="{ax["width"]}"/>')
    out.append(f'<line x1="{m}" y1="{height - m}" x2="{m}" y2="{m}" '
               f'stroke="{ax["stroke"]}" stroke-width="{ax["width"]}"/>')
    out.append(f'<text x="{width - m}" y="{height - m / 3:.0f}" font-size="11" text-anchor="end">x</text>')
    out.append(f'<text x="{m / 3:.0f}" y="{m}" font-size="11">t</text>')
    for key in ("blockade", "generated_blockade", "arrow"):
        style = STYLE[key]
        dash = f' stroke-dasharray="{style["dash"]}"' if style["dash"] else ""
        out.append(f'<g clip-path="url(#plot)" stroke="{style["stroke"]}" stroke-width="{style["width"]}"{dash} '
                   'fill="none">')
        for x0, t0, x1, t1, k in segs:
            if k != key:
                continue
            if math.isinf(t1):
                continue
            out.append(f'<line x1="{px(x0):.3f}" y1="{py(t0):.3f}" x2="{px(x1):.3f}" y2="{py(t1):.3f}"/>')
        out.append("</g>")
    ev = STYLE["event"]
    out.append(f'<g clip-path="url(#plot)" fill="{ev["fill"]}">')
    for e in trace.events:
        if e.time <= t_max:
            out.append(f'<circle cx="{px(e.position):.3f}" cy="{py(e.time):.3f}" r="{ev["radius"]}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(trace: Trace, path, t_max: Optional[float] = None, meta: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(space_time_svg(trace, t_max, meta))


def table_csv(rows: list[dict], columns: list[str], meta: Optional[dict] = None) -> str:
    """Generic CSV with a JSON metadata comment line."""
    buf = io.StringIO()
    for line in header_lines(meta):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) if isinstance(row[c], (float, np.floating)) else row[c] for c in columns])
    return buf.getvalue()
