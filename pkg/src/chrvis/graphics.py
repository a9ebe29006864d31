"""Visual vocabulary: templates, parameter evaluation and the graphical store.

Object and action kinds follow a small animation command vocabulary.  Every kind has a
fixed positional schema; ``changeParam`` addresses parameters by the names
listed here.

========  =========================================================================
kind      parameters
========  =========================================================================
node      name x y width height lines text color bkgrd outline shape(RECT|CIRC)
circle    name x y width color bkgrd
text      name x y text color
line      name x y x2 y2 color
image     name x y width height src
========  =========================================================================

Actions: ``changeParam(target, param, value)`` and
``moveRelative(target, dx, dy)``.  ``moveRelative`` on a line shifts both
endpoints.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence, Union

from .terms import Atom, Compound, Int, Term, TermError, Var, eval_arith, is_ground

log = logging.getLogger(__name__)

OBJECT_SCHEMAS: dict[str, tuple[str, ...]] = {
    "node": ("name", "x", "y", "width", "height", "lines", "text",
             "color", "bkgrd", "outline", "shape"),
    "circle": ("name", "x", "y", "width", "color", "bkgrd"),
    "text": ("name", "x", "y", "text", "color"),
    "line": ("name", "x", "y", "x2", "y2", "color"),
    "image": ("name", "x", "y", "width", "height", "src"),
}
ACTION_SCHEMAS: dict[str, tuple[str, ...]] = {
    "changeParam": ("target", "param", "value"),
    "moveRelative": ("target", "dx", "dy"),
}
RANDOM_RANGE = 1000


class GraphicsError(Exception):
    pass


# --- templates --------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: Term


@dataclass(frozen=True)
class ValueOf:
    var: Var
    prefix: str = ""  # `nodevalueOf(V)` concatenates "node" with the value


@dataclass(frozen=True)
class PrologValue:
    expr: Term  # valueOf(V) occurrences are stored as the bare variable V
    wrapped: bool = False  # written as prologValue(...) in the source


@dataclass(frozen=True)
class Random:
    pass


ParamExpr = Union[Const, ValueOf, PrologValue, Random]


@dataclass(frozen=True)
class VisualTemplate:
    kind: str
    params: tuple

    def __post_init__(self):
        schema = schema_of(self.kind)
        if len(self.params) != len(schema):
            raise GraphicsError(
                f"{self.kind} expects {len(schema)} parameters, got {len(self.params)}")

    @property
    def is_action(self) -> bool:
        return self.kind in ACTION_SCHEMAS


def schema_of(kind: str) -> tuple[str, ...]:
    if kind in OBJECT_SCHEMAS:
        return OBJECT_SCHEMAS[kind]
    if kind in ACTION_SCHEMAS:
        return ACTION_SCHEMAS[kind]
    raise GraphicsError(f"unknown visual kind: {kind}")


def is_visual_kind(kind: str) -> bool:
    return kind in OBJECT_SCHEMAS or kind in ACTION_SCHEMAS


# --- evaluated objects and actions -------------------------------------------

def render_name(t: Term) -> str:
    if isinstance(t, Int):
        return str(t.value)
    if isinstance(t, Atom):
        return t.name
    return repr(t)


@dataclass(frozen=True)
class GraphicalObject:
    kind: str
    actuals: tuple
    id: int = 0

    @property
    def name(self) -> str:
        return render_name(self.actuals[0])

    def param(self, pname: str) -> Term:
        return self.actuals[OBJECT_SCHEMAS[self.kind].index(pname)]

    def to_json(self) -> dict:
        return {"id": self.id, "kind": self.kind, "name": self.name,
                "actuals": [actual_json(a) for a in self.actuals]}


@dataclass(frozen=True)
class GraphicalAction:
    kind: str
    actuals: tuple

    @property
    def target(self) -> str:
        return render_name(self.actuals[0])

    def to_json(self) -> dict:
        return {"kind": self.kind, "target": self.target,
                "actuals": [actual_json(a) for a in self.actuals]}


def actual_json(t: Term):
    if isinstance(t, Int):
        return t.value
    return render_name(t)


def output_graphical_object(heads: Sequence[Term], subst: Mapping[int, Term],
                            template: VisualTemplate, rng: random.Random | None = None
                            ) -> GraphicalObject | GraphicalAction:
    """Evaluate a template's parameters under a head matching.

    `subst` maps the annotation's head variables to (ground) values.  The
    resulting object has id 0 until it is drawn.
    """
    actuals = []
    for p in template.params:
        actuals.append(_actual(p, subst, rng, heads))
    if template.is_action:
        return GraphicalAction(template.kind, tuple(actuals))
    return GraphicalObject(template.kind, tuple(actuals))


def _actual(p: ParamExpr, subst, rng, heads) -> Term:
    if isinstance(p, Const):
        return p.value
    if isinstance(p, ValueOf):
        v = subst.get(p.var.uid, p.var)
        if not is_ground(v):
            raise GraphicsError(f"annotation argument unbound: {p.var.name} in {heads!r}")
        return Atom(p.prefix + render_name(v)) if p.prefix else v
    if isinstance(p, PrologValue):
        try:
            return Int(eval_arith(p.expr, subst))
        except TermError as e:
            raise GraphicsError(f"annotation argument unbound: {e}") from e
    if isinstance(p, Random):
        if rng is None:
            raise GraphicsError("random parameter needs a seeded generator")
        return Int(rng.randrange(RANDOM_RANGE))
    raise GraphicsError(f"bad parameter expression {p!r}")


# --- graphical store ----------------------------------------------------------

@dataclass(frozen=True)
class GraphicalStore:
    objects: tuple = ()

    def __len__(self) -> int:
        return len(self.objects)

    def __iter__(self):
        return iter(self.objects)

    def ids(self) -> set[int]:
        return {o.id for o in self.objects}

    def by_name(self, name: str) -> GraphicalObject | None:
        return next((o for o in self.objects if o.name == name), None)

    def names(self) -> list[str]:
        return [o.name for o in self.objects]

    def draw(self, obj: GraphicalObject) -> tuple["GraphicalStore", list[int]]:
        """Add obj, retiring any object with the same name.  Returns retired ids."""
        retired = [o.id for o in self.objects if o.name == obj.name]
        kept = tuple(o for o in self.objects if o.name != obj.name)
        return GraphicalStore(kept + (obj,)), retired

    def without(self, ids) -> "GraphicalStore":
        ids = set(ids)
        return GraphicalStore(tuple(o for o in self.objects if o.id not in ids))


def _shift(t: Term, d: Term) -> Term:
    if not (isinstance(t, Int) and isinstance(d, Int)):
        raise GraphicsError(f"cannot move non-integer coordinate {t!r} by {d!r}")
    return Int(t.value + d.value)


def apply_action(obj: GraphicalObject, action: GraphicalAction) -> GraphicalObject:
    schema = OBJECT_SCHEMAS[obj.kind]
    acts = list(obj.actuals)
    if action.kind == "changeParam":
        pname = render_name(action.actuals[1])
        if pname not in schema or pname == "name":
            log.warning("changeParam: %s has no parameter %s", obj.kind, pname)
            return obj
        acts[schema.index(pname)] = action.actuals[2]
    elif action.kind == "moveRelative":
        dx, dy = action.actuals[1], action.actuals[2]
        acts[1] = _shift(acts[1], dx)
        acts[2] = _shift(acts[2], dy)
        if obj.kind == "line":
            acts[3] = _shift(acts[3], dx)
            acts[4] = _shift(acts[4], dy)
    else:
        raise GraphicsError(f"unknown action {action.kind}")
    return replace(obj, actuals=tuple(acts))


def update_graphical_store(gr: GraphicalStore, action: GraphicalAction) -> GraphicalStore:
    """Apply an action to the object it names; other objects are untouched."""
    target = action.target
    if gr.by_name(target) is None:
        log.warning("%s: no graphical object named %r", action.kind, target)
        return gr
    return GraphicalStore(tuple(apply_action(o, action) if o.name == target else o
                                for o in gr.objects))


# --- annotation history ---------------------------------------------------------

@dataclass(frozen=True)
class AnnHistoryEntry:
    rule_name: str
    head_ids: tuple
    object_ids: frozenset = field(default_factory=frozenset)


AnnHistory = Mapping  # (rule_name, head_ids) -> frozenset of object ids


def record_annotation(h_ann: AnnHistory, rule: str, head_ids: Sequence[int]) -> dict:
    """Create the empty entry made when an annotation rule fires."""
    key = (rule, tuple(head_ids))
    if key in h_ann:
        raise GraphicsError(f"annotation {rule} already fired for {list(head_ids)}")
    out = dict(h_ann)
    out[key] = frozenset()
    return out


def generate_new_ann_history(obj_id: int, rule: str, head_ids: Sequence[int],
                             h_ann: AnnHistory) -> dict:
    key = (rule, tuple(head_ids))
    if key not in h_ann:
        raise GraphicsError(f"internal: no annotation history entry for {key}")
    out = dict(h_ann)
    out[key] = h_ann[key] | {obj_id}
    return out


def contains(h_ann: AnnHistory, rule: str, head_ids: Sequence[int]) -> bool:
    return (rule, tuple(head_ids)) in h_ann


def history_entries(h_ann: AnnHistory) -> list[AnnHistoryEntry]:
    return [AnnHistoryEntry(r, ids, objs) for (r, ids), objs in h_ann.items()]


def remove_gr_obj(gr: GraphicalStore, removed_head_ids, h_ann: AnnHistory) -> GraphicalStore:
    """Drop every object drawn by an annotation whose heads touch a removed id."""
    removed = set(removed_head_ids)
    doomed: set[int] = set()
    for (_, ids), objs in h_ann.items():
        if removed.intersection(ids):
            doomed |= objs
    return gr.without(doomed) if doomed else gr
