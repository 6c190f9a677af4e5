"""CSV (RFC 4180) and SVG 1.1 writers."""

from __future__ import annotations

import csv
import io
import math
from typing import Sequence

import numpy as np

from .errors import SerializationError

SIG_DIGITS = 9


def format_value(v) -> str:
    """Cell text: 9 significant digits for reals, lower-case booleans."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if not math.isfinite(x):
            raise SerializationError(f"non-finite value {x!r}")
        out = f"{x:.{SIG_DIGITS}g}"
        return "0" if out == "-0" else out
    return str(v)


def emit_csv(header: Sequence[str], rows, extra=()) -> str:
    """CSV document with a header row, CRLF line ends and minimal quoting.

    ``extra`` rows (for example a trailing fit line) are appended verbatim
    after the table and need not match the header width.
    """
    if not header:
        raise SerializationError("CSV needs a header row")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow([str(h) for h in header])
    for r in rows:
        r = list(r)
        if len(r) != len(header):
            raise SerializationError(f"row has {len(r)} fields, header has {len(header)}")
        w.writerow([format_value(v) for v in r])
    for r in extra:
        w.writerow([format_value(v) for v in r])
    return buf.getvalue()


def read_csv(text: str) -> tuple[list, list]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise SerializationError("empty CSV")
    return rows[0], rows[1:]


def _finite(arr, what: str) -> np.ndarray:
    a = np.asarray(arr, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise SerializationError(f"{what} must be an (n, 2) array")
    if not np.all(np.isfinite(a)):
        raise SerializationError(f"non-finite coordinate in {what}")
    return a


def emit_svg(outline=None, overlays=(), size: float = 512.0, margin: float = 0.05,
             colors=("#c0392b", "#2471a3", "#229954", "#7d3c98")) -> str:
    """Standalone SVG 1.1 with the table outline as a polygon element and
    every overlay segment as its own path element.

    ``outline`` is an (n, 2) array of boundary points (closed implicitly) or
    None; ``overlays`` is a list of (m, 2) polylines.  The y axis points up.
    """
    out = None if outline is None else _finite(outline, "outline")
    lines = [_finite(p, "overlay") for p in overlays]
    pts = [a for a in [out, *lines] if a is not None and len(a)]
    if pts:
        allp = np.vstack(pts)
        lo, hi = allp.min(axis=0), allp.max(axis=0)
    else:
        lo, hi = np.zeros(2), np.ones(2)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-12))
    pad = margin * span
    lo, span = lo - pad, span + 2 * pad
    scale = size / span
    height = size

    def xy(p):
        return f"{format_value((p[0] - lo[0]) * scale)},{format_value(height - (p[1] - lo[1]) * scale)}"

    doc = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" "http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{format_value(size)}" '
        f'height="{format_value(height)}" viewBox="0 0 {format_value(size)} {format_value(height)}">',
    ]
    if out is not None:
        doc.append(f'<polygon fill="none" stroke="black" stroke-width="1" points="{" ".join(xy(p) for p in out)}"/>')
    for k, line in enumerate(lines):
        c = colors[k % len(colors)]
        for a, b in zip(line[:-1], line[1:]):
            doc.append(f'<path fill="none" stroke="{c}" stroke-width="0.5" d="M {xy(a)} L {xy(b)}"/>')
    doc.append("</svg>")
    return "\n".join(doc) + "\n"


def curve_outline(curve, n: int = 512) -> np.ndarray:
    """Boundary sample for drawing; polygon vertices are used as they are."""
    verts = getattr(curve, "vertices", None)
    if verts is not None:
        return np.asarray(verts, dtype=float)
    s = np.linspace(0.0, curve.perimeter, n, endpoint=False)
    return np.array([curve.point(v) for v in s])
