"""Tiny deterministic SVG writer.

Hand-rolled instead of a plotting library so outputs are byte-stable,
diffable and assertable attribute-by-attribute in tests. Attributes render
in insertion order; all numbers go through :func:`fmt` (6 significant
digits).
"""

from __future__ import annotations

from typing import Iterable, Mapping, Optional, Union

Attr = Union[str, int, float]


def fmt(value: Attr) -> str:
    """Numbers with 6 significant digits, strings as-is."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, float)):
        return format(value, ".6g")
    return str(value)


def escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def el(name: str, attrs: Optional[Mapping[str, Attr]] = None,
       children: Iterable[str] = (), text: Optional[str] = None) -> str:
    parts = [f"<{name}"]
    for key, value in (attrs or {}).items():
        parts.append(f' {key.replace("_", "-")}="{escape(fmt(value))}"')
    body = "".join(children)
    if text is not None:
        body += escape(text)
    if body:
        parts.append(f">{body}</{name}>")
    else:
        parts.append("/>")
    return "".join(parts)


def document(width: float, height: float, children: Iterable[str]) -> str:
    root = el("svg", {
        "xmlns": "http://www.w3.org/2000/svg",
        "width": width,
        "height": height,
        "viewBox": f"0 0 {fmt(width)} {fmt(height)}",
    }, children)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + root + "\n"


def polyline(points: Iterable[tuple[float, float]], **attrs: Attr) -> str:
    path = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)
    return el("polyline", {"points": path, **attrs})


def polygon(points: Iterable[tuple[float, float]], **attrs: Attr) -> str:
    path = " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)
    return el("polygon", {"points": path, **attrs})


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick positions covering [lo, hi] at a 1/2/5 step."""
    import math

    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(target, 1)
    power = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * power
        if raw <= step:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    value = first
    while value <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(value) < 1e-12 * step else value)
        value += step
    return ticks
