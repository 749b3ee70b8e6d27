"""Minimal SVG 1.1 document builder with fixed-precision number output."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape, quoteattr

HEADER = (
    '<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
    '<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" '
    '"http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">\n'
)
FONT = "Helvetica, Arial, sans-serif"


def num(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


class Canvas:
    def __init__(self, width: int, height: int, title: str = ""):
        self.width = int(width)
        self.height = int(height)
        self.items: list[str] = []
        if title:
            self.items.append(f"<title>{escape(title)}</title>")
        self.rect(0, 0, self.width, self.height, fill="#ffffff")

    def rect(self, x, y, w, h, fill="#000000", stroke=None, **attrs):
        extra = f' stroke="{stroke}"' if stroke else ""
        self.items.append(
            f'<rect x="{num(x)}" y="{num(y)}" width="{num(w)}" height="{num(h)}" '
            f'fill="{fill}"{extra}{_attrs(attrs)}/>'
        )

    def circle(self, cx, cy, r, fill="#000000", **attrs):
        self.items.append(
            f'<circle cx="{num(cx)}" cy="{num(cy)}" r="{num(r)}" fill="{fill}"{_attrs(attrs)}/>'
        )

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0, dash=None):
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(
            f'<line x1="{num(x1)}" y1="{num(y1)}" x2="{num(x2)}" y2="{num(y2)}" '
            f'stroke="{stroke}" stroke-width="{num(width)}"{extra}/>'
        )

    def polyline(self, points, stroke="#000000", width=1.5, **attrs):
        pts = " ".join(f"{num(x)},{num(y)}" for x, y in points)
        self.items.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
            f'stroke-width="{num(width)}"{_attrs(attrs)}/>'
        )

    def text(self, x, y, s, size=11, anchor="start", fill="#333333", rotate=None):
        transform = f' transform="rotate({num(rotate)} {num(x)} {num(y)})"' if rotate else ""
        self.items.append(
            f'<text x="{num(x)}" y="{num(y)}" font-family="{FONT}" font-size="{size}" '
            f'text-anchor="{anchor}" fill="{fill}"{transform}>{escape(str(s))}</text>'
        )

    def open_group(self, **attrs):
        self.items.append(f"<g{_attrs(attrs)}>")

    def close_group(self):
        self.items.append("</g>")

    def to_string(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">\n'
        )
        return HEADER + head + "\n".join(self.items) + "\n</svg>\n"


def _attrs(attrs: dict) -> str:
    return "".join(f" {k.replace('_', '-')}={quoteattr(str(v))}" for k, v in attrs.items())


def nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    """Round tick positions covering ``[lo, hi]``."""
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / max(count, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 12))
        t += step
    return ticks


def tick_label(v: float) -> str:
    return f"{v + 0.0:.3g}" if v != 0 else "0"
