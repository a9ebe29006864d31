"""Frame stream and SVG snapshots of the graphical store.

A frame is emitted whenever the graphical store changes: an object is
drawn, an action updates one, or a rule application removes objects.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from html import escape
from typing import Iterable

from .graphics import OBJECT_SCHEMAS, GraphicalObject, GraphicalStore
from .terms import Int

MARGIN = 10

COLORS = {
    "black": "#000000", "white": "#ffffff", "red": "#ff0000", "green": "#00a000",
    "blue": "#0000ff", "yellow": "#ffff00", "pink": "#ffc0cb", "orange": "#ffa500",
    "purple": "#800080", "gray": "#808080", "cyan": "#00ffff", "magenta": "#ff00ff",
    "brown": "#a52a2a", "lightgray": "#d3d3d3", "darkgray": "#404040", "navy": "#000080",
}


@dataclass(frozen=True)
class Frame:
    seq: int
    time: int  # index of the transition that caused it (1-based)
    event: str  # draw | update | remove
    payload: object  # object json, action json, or list of removed ids
    store_snapshot: tuple

    def to_json_line(self) -> str:
        return json.dumps({"seq": self.seq, "time": self.time, "event": self.event,
                           "payload": self.payload,
                           "store_snapshot": [o.to_json() for o in self.store_snapshot]})


def frames_from_trace(trace, initial: GraphicalStore = GraphicalStore()) -> list[Frame]:
    """Frames for a visual-engine trace of (label, state) pairs."""
    frames: list[Frame] = []
    before = initial
    for t, (label, s) in enumerate(trace, 1):
        gr = s.graphics
        event = payload = None
        if label.kind == "draw":
            obj = next(o for o in gr if o.id == label.ids[0])
            event, payload = "draw", obj.to_json()
        elif label.kind == "update":
            event, payload = "update", _pending_action(trace, t)
        elif gr.ids() != before.ids():
            event, payload = "remove", sorted(before.ids() - gr.ids())
        if event:
            frames.append(Frame(len(frames) + 1, t, event, payload, gr.objects))
        before = gr
    return frames


def _pending_action(trace, t: int) -> dict:
    """The action applied at transition t: it was on top of the stack before."""
    prev = trace[t - 2][1] if t >= 2 else None
    if prev is None or not prev.stack:
        raise ValueError(f"no pending action before transition {t}")
    return prev.stack[0].item.to_json()


def fold_frames(frames: Iterable[dict]) -> list[dict]:
    """Rebuild the store snapshot by replaying frame payloads (objects as json)."""
    objs: list[dict] = []
    for f in frames:
        p = f["payload"]
        if f["event"] == "draw":
            objs = [o for o in objs if o["name"] != p["name"]] + [copy.deepcopy(p)]
        elif f["event"] == "remove":
            objs = [o for o in objs if o["id"] not in p]
        else:
            for o in objs:
                if o["name"] != p["target"]:
                    continue
                schema = OBJECT_SCHEMAS[o["kind"]]
                acts = o["actuals"]
                if p["kind"] == "changeParam":
                    pname = p["actuals"][1]
                    if pname in schema and pname != "name":
                        acts[schema.index(pname)] = p["actuals"][2]
                else:
                    dx, dy = p["actuals"][1], p["actuals"][2]
                    acts[1] += dx
                    acts[2] += dy
                    if o["kind"] == "line":
                        acts[3] += dx
                        acts[4] += dy
    return objs


# --- SVG --------------------------------------------------------------------------------

def color(name) -> str:
    return COLORS.get(str(name), str(name))


def _num(t) -> int:
    return t.value if isinstance(t, Int) else 0


def _box(o: GraphicalObject) -> tuple[int, int, int, int]:
    x, y = _num(o.param("x")), _num(o.param("y"))
    if o.kind in ("node", "image"):
        return x, y, x + _num(o.param("width")), y + _num(o.param("height"))
    if o.kind == "circle":
        w = _num(o.param("width"))
        return x, y, x + w, y + w
    if o.kind == "line":
        x2, y2 = _num(o.param("x2")), _num(o.param("y2"))
        return min(x, x2), min(y, y2), max(x, x2), max(y, y2)
    text = str(o.param("text"))
    return x, y - 12, x + 7 * len(text), y


def _shape(o: GraphicalObject) -> str:
    p = o.param
    x, y = _num(p("x")), _num(p("y"))
    attrs = f'class="obj" data-id="{o.id}" data-name="{escape(o.name)}"'
    if o.kind == "node":
        w, h = _num(p("width")), _num(p("height"))
        fill, stroke = color(p("bkgrd")), color(p("outline"))
        if str(p("shape")) == "CIRC":
            shape = (f'<ellipse cx="{x + w / 2:g}" cy="{y + h / 2:g}" rx="{w / 2:g}" ry="{h / 2:g}" '
                     f'fill="{fill}" stroke="{stroke}"/>')
        else:
            shape = f'<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="{fill}" stroke="{stroke}"/>'
        label = (f'<text x="{x + w / 2:g}" y="{y + h / 2:g}" text-anchor="middle" '
                 f'fill="{color(p("color"))}">{escape(str(p("text")))}</text>')
        return f"<g {attrs}>{shape}{label}</g>"
    if o.kind == "circle":
        r = _num(p("width")) / 2
        inner = (f'<circle cx="{x + r:g}" cy="{y + r:g}" r="{r:g}" fill="{color(p("bkgrd"))}" '
                 f'stroke="{color(p("color"))}"/>')
    elif o.kind == "text":
        inner = f'<text x="{x}" y="{y}" fill="{color(p("color"))}">{escape(str(p("text")))}</text>'
    elif o.kind == "line":
        inner = (f'<line x1="{x}" y1="{y}" x2="{_num(p("x2"))}" y2="{_num(p("y2"))}" '
                 f'stroke="{color(p("color"))}"/>')
    else:
        inner = (f'<image x="{x}" y="{y}" width="{_num(p("width"))}" height="{_num(p("height"))}" '
                 f'href="{escape(str(p("src")))}"/>')
    return f"<g {attrs}>{inner}</g>"


def render_svg(objects: Iterable[GraphicalObject]) -> str:
    """One <g class="obj"> per object; the canvas hugs the objects plus a margin."""
    objects = list(objects)
    if objects:
        boxes = [_box(o) for o in objects]
        x0, y0 = min(b[0] for b in boxes) - MARGIN, min(b[1] for b in boxes) - MARGIN
        x1, y1 = max(b[2] for b in boxes) + MARGIN, max(b[3] for b in boxes) + MARGIN
    else:
        x0, y0, x1, y1 = 0, 0, 2 * MARGIN, 2 * MARGIN
    w, h = x1 - x0, y1 - y0
    body = "\n".join("  " + _shape(o) for o in objects)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
            f'viewBox="{x0} {y0} {w} {h}">\n{body}\n</svg>\n')
