"""Execution with visual annotations.

Extends the refined semantics with a graphical store, an annotation
history and constraint provenance.  Annotation rules fire before CHR
rules for the active constraint; each fired annotation pushes its
evaluated object or action, which the next transition draws or applies.
A program without rule annotations runs exactly as the constraint-only
variant, since no provenance ever suppresses an annotation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Sequence

from . import graphics as gx
from .refined import (DEFAULT_FUEL, Active, EngineError, FuelExhausted, GoalBuiltin,
                      GoalConstraint, Identified, Label, Stored, VarSupply, _next_var, _sym,
                      find_rule_match, search_partners, solve_wake)
from .syntax import Program, is_builtin
from .terms import BuiltinStore, Term, entails_guard, rename

AUX = "aux"


@dataclass(frozen=True)
class PendingVisual:
    item: gx.GraphicalObject | gx.GraphicalAction
    rule: str
    head_ids: tuple


@dataclass(frozen=True)
class StateVis:
    stack: tuple = ()
    store: tuple = ()
    graphics: gx.GraphicalStore = gx.GraphicalStore()
    builtins: BuiltinStore = BuiltinStore()
    history: frozenset = frozenset()
    h_ann: dict = field(default_factory=dict)  # (rule, head_ids) -> frozenset of object ids
    cons_r: dict = field(default_factory=dict)  # constraint id -> (term, rule name)
    next_id: int = 1
    next_var: int = 1
    flags: tuple = ()
    events: tuple = ()

    @property
    def terminal(self) -> bool:
        return not self.stack or self.builtins.failed

    def constraints(self) -> list[Term]:
        return [self.builtins.apply(s.term) for s in self.store]


def initial_state_vis(query: Sequence[Term]) -> StateVis:
    stack = tuple(GoalBuiltin(t) if is_builtin(t) else GoalConstraint(t, AUX) for t in query)
    return StateVis(stack=stack, next_var=_next_var(query))


def provenance(s: StateVis, cid: int) -> str:
    try:
        return s.cons_r[cid][1]
    except KeyError:
        raise EngineError(f"no constraint with id {cid}") from None


@dataclass(frozen=True)
class AnnotationMatch:
    rule: str
    head_ids: tuple
    item: gx.GraphicalObject | gx.GraphicalAction
    next_var: int


def find_annotation(p: Program, active: Active, s: StateVis, rng: random.Random | None
                    ) -> AnnotationMatch | None:
    """First applicable constraint-annotation rule involving the active constraint.

    Rules are tried in program order; the active constraint may take any
    head position.  Partners are searched like CHR rule heads.
    """
    me = next((x for x in s.store if x.id == active.id), None)
    if me is None or not p.constraint_annotations:
        return None
    sym = _sym(active.term)
    flags = dict(s.flags)
    suppressing = p.annotated_rules
    for ann in p.constraint_annotations:
        if all(_sym(h) != sym for h in ann.heads):
            continue
        supply = VarSupply(s.next_var)
        mapping: dict = {}
        heads = [rename(h, mapping, supply) for h in ann.heads]
        cond = [rename(c, mapping, supply) for c in ann.condition]
        for k, h in enumerate(heads):
            if _sym(h) != sym:
                continue
            for sub, chosen in search_partners(heads, {k: me}, s.store, s.builtins):
                ids = tuple(c.id for c in chosen)
                if gx.contains(s.h_ann, ann.name, ids):
                    continue
                if suppressing and any(s.cons_r.get(i, (None, AUX))[1] in suppressing for i in ids):
                    continue
                if not entails_guard(s.builtins, cond, sub, flags):
                    continue
                values = {uid: s.builtins.apply(sub.apply(v)) for uid, v in mapping.items()}
                item = gx.output_graphical_object([c.term for c in chosen], values, ann.output, rng)
                return AnnotationMatch(ann.name, ids, item, supply.next)
    return None


def step_vis(p: Program, s: StateVis, rng: random.Random | None = None):
    if s.terminal:
        return None
    top, rest = s.stack[0], s.stack[1:]

    if isinstance(top, PendingVisual):
        return _visual(s, top, rest)

    if isinstance(top, GoalBuiltin):
        return solve_wake(s, top.term, rest)

    if isinstance(top, GoalConstraint):
        n = s.next_id
        cons_r = dict(s.cons_r)
        cons_r[n] = (top.term, top.rule or AUX)
        return (Label("activate", ids=(n,)),
                replace(s, stack=(Active(top.term, n, 1),) + rest,
                        store=s.store + (Stored(n, top.term),), cons_r=cons_r, next_id=n + 1))

    if isinstance(top, Identified):
        return (Label("reactivate", ids=(top.id,)),
                replace(s, stack=(Active(top.term, top.id, 1),) + rest))

    if isinstance(top, Active):
        ann = find_annotation(p, top, s, rng)
        if ann is not None:
            return (Label("apply_annotation", rule=ann.rule, ids=ann.head_ids),
                    replace(s, stack=(PendingVisual(ann.item, ann.rule, ann.head_ids),) + s.stack,
                            h_ann=gx.record_annotation(s.h_ann, ann.rule, ann.head_ids),
                            next_var=ann.next_var))
        flags = dict(s.flags)
        m = find_rule_match(p, top, s.store, s.builtins, s.history, flags, s.next_var)
        if m is not None:
            return _apply(p, s, top, m, rest, flags)
        if top.occ > p.max_occurrence(_sym(top.term)):
            return Label("drop", ids=(top.id,), occ=top.occ), replace(s, stack=rest)
        return (Label("default", ids=(top.id,), occ=top.occ),
                replace(s, stack=(Active(top.term, top.id, top.occ + 1),) + rest))

    raise EngineError(f"unexpected stack entry {top!r}")


def _visual(s: StateVis, top: PendingVisual, rest: tuple):
    item = top.item
    if isinstance(item, gx.GraphicalObject):
        n = s.next_id
        obj = replace(item, id=n)
        gr, _retired = s.graphics.draw(obj)
        h_ann = gx.generate_new_ann_history(n, top.rule, top.head_ids, s.h_ann)
        return (Label("draw", ids=(n,), detail=f"{obj.kind} {obj.name}"),
                replace(s, stack=rest, graphics=gr, h_ann=h_ann, next_id=n + 1))
    gr = gx.update_graphical_store(s.graphics, item)
    return (Label("update", detail=f"{item.kind} {item.target}"),
            replace(s, stack=rest, graphics=gr))


def _apply(p: Program, s: StateVis, active: Active, m, rest: tuple, flags):
    removed_ids = {x.id for x in m.removed}
    supply = VarSupply(m.next_var)
    aux_goals = []
    for ra in p.rule_annotations_for(m.rule.name):
        cond = [rename(c, m.mapping, supply) for c in ra.condition]
        aux = rename(ra.aux_constraint, m.mapping, supply)
        if entails_guard(s.builtins, cond, m.subst, flags):
            aux_goals.append(GoalConstraint(m.subst.apply(aux), AUX))
    body = tuple(GoalBuiltin(t) if is_builtin(t) else GoalConstraint(t, m.rule.name)
                 for t in m.body)
    keep = () if active.id in removed_ids else (active,)
    gr = s.graphics
    if p.comm_head and removed_ids:
        gr = gx.remove_gr_obj(gr, removed_ids, s.h_ann)
    return (Label("apply", rule=m.rule.name, ids=m.ids),
            replace(s, stack=tuple(aux_goals) + body + keep + rest,
                    store=tuple(x for x in s.store if x.id not in removed_ids),
                    graphics=gr, history=s.history | {(m.rule.name, m.ids)},
                    next_var=supply.next))


def run_vis_from(p: Program, s: StateVis, fuel: int = DEFAULT_FUEL, seed: int = 0):
    rng = random.Random(seed)
    trace: list = []
    while True:
        nxt = step_vis(p, s, rng)
        if nxt is None:
            return s, trace
        if len(trace) >= fuel:
            raise FuelExhausted(s, trace)
        trace.append(nxt)
        s = nxt[1]


def run_vis(p: Program, query: Sequence[Term], fuel: int = DEFAULT_FUEL, seed: int = 0):
    """Run query to a fixpoint; deterministic for a given (program, query, seed)."""
    return run_vis_from(p, initial_state_vis(query), fuel, seed)
