"""Execution under the refined operational semantics.

A state is the tuple <A, S, B, T>_n: goal stack, identified constraint
store, built-in store, propagation history and next constraint id.  Each
call to `step` applies exactly one transition and returns a fresh state.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence

from .syntax import ChrRule, Program, is_builtin
from .terms import (EMPTY, Atom, BuiltinStore, Compound, Int, Subst, Term, TermError, Var,
                    entails_guard, eval_arith, is_ground, match, rename, symbol, term_vars,
                    unify)

DEFAULT_FUEL = 1_000_000


class EngineError(Exception):
    pass


class FuelExhausted(EngineError):
    def __init__(self, state, trace):
        super().__init__(f"fuel exhausted after {len(trace)} transitions")
        self.state = state
        self.trace = trace


# --- stack entries ------------------------------------------------------------

@dataclass(frozen=True)
class GoalConstraint:
    term: Term
    rule: str | None = None  # provenance tag, only used by the vis engine


@dataclass(frozen=True)
class GoalBuiltin:
    term: Term


@dataclass(frozen=True)
class Identified:
    term: Term
    id: int


@dataclass(frozen=True)
class Active:
    term: Term
    id: int
    occ: int


@dataclass(frozen=True)
class Stored:
    id: int
    term: Term


@dataclass(frozen=True)
class Label:
    kind: str  # solve activate reactivate apply drop default | apply_annotation draw update
    rule: str | None = None
    ids: tuple = ()
    occ: int | None = None
    detail: str | None = None

    def __str__(self) -> str:
        if self.kind in ("apply", "apply_annotation"):
            return f"{self.kind} {self.rule} [{', '.join(map(str, self.ids))}]"
        if self.kind in ("drop", "default"):
            return f"{self.kind} {self.ids[0]}:{self.occ}"
        if self.kind in ("activate", "reactivate", "draw"):
            return f"{self.kind} {self.ids[0]}" + (f" {self.detail}" if self.detail else "")
        return f"{self.kind} {self.detail}" if self.detail else self.kind


def goal_for(t: Term, rule: str | None = None):
    return GoalBuiltin(t) if is_builtin(t) else GoalConstraint(t, rule)


# --- state ---------------------------------------------------------------------

@dataclass(frozen=True)
class StateR:
    stack: tuple = ()
    store: tuple = ()  # Stored, ascending id
    builtins: BuiltinStore = BuiltinStore()
    history: frozenset = frozenset()  # (rule, ids)
    next_id: int = 1
    next_var: int = 1
    flags: tuple = ()  # (name, Term) pairs set by set/2
    events: tuple = ()  # terms passed to communicate_constraint/1

    @property
    def terminal(self) -> bool:
        return not self.stack or self.builtins.failed

    def constraints(self) -> list[Term]:
        return [self.builtins.apply(s.term) for s in self.store]

    def stored(self, cid: int) -> Stored | None:
        for s in self.store:
            if s.id == cid:
                return s
        return None


def initial_state(query: Sequence[Term]) -> StateR:
    return StateR(stack=tuple(goal_for(t) for t in query), next_var=_next_var(query))


def _next_var(terms) -> int:
    uids = [v.uid for t in terms for v in term_vars(t)]
    return max(uids, default=0) + 1


# --- built-in solving ------------------------------------------------------------

def solve(c: Term, b: BuiltinStore, flags: Mapping[str, Term]) -> tuple[BuiltinStore, dict, Term | None]:
    """Add built-in c to b.  Returns (store, flags, communicated term or None)."""
    if b.failed:
        return b, dict(flags), None
    c = b.apply(c)
    name, arity = symbol(c)
    flags = dict(flags)
    if name == "true":
        return b, flags, None
    if name == "fail":
        return BuiltinStore(b.bindings, True), flags, None
    x, y = (c.args + (None,))[:2] if isinstance(c, Compound) else (None, None)
    if name == "=":
        return unify(x, y, b), flags, None
    if name == "is":
        return unify(x, Int(eval_arith(y)), b), flags, None
    if name in ("<", ">", "=<", ">=", "==", "\\=="):
        if name in ("<", ">", "=<", ">=") and not (is_ground(x) and is_ground(y)):
            raise TermError(f"non-ground arithmetic comparison {c!r}")
        ok = entails_guard(b, [c])
        return (b if ok else BuiltinStore(b.bindings, True)), flags, None
    if name == "set":
        if not isinstance(x, Atom):
            raise EngineError(f"set/2 needs an atom key, got {x!r}")
        flags[x.name] = y
        return b, flags, None
    if name == "check":
        ok = entails_guard(b, [c], flags=flags)
        return (b if ok else BuiltinStore(b.bindings, True)), flags, None
    if name == "communicate_constraint":
        return b, flags, x
    raise EngineError(f"unsupported built-in {name}/{arity}")


def affected_vars(before: BuiltinStore, after: BuiltinStore) -> set[int]:
    """Variables whose binding changed: newly bound ones and their new aliases."""
    out = set()
    for uid, rhs in after.bindings.items():
        if uid not in before.bindings:
            out.add(uid)
            out.update(v.uid for v in term_vars(rhs))
    return out


def wakeup(store: Sequence[Stored], c: Term, b: BuiltinStore,
           flags: Mapping[str, Term] | None = None) -> list[Stored]:
    """Stored constraints that solving c would wake, in ascending id order."""
    b2, _, _ = solve(c, b, flags or {})
    return woken(store, b, b2)


def woken(store: Sequence[Stored], before: BuiltinStore, after: BuiltinStore) -> list[Stored]:
    if after.failed:
        return []
    touched = affected_vars(before, after)
    if not touched:
        return []
    return [s for s in store if any(v.uid in touched for v in term_vars(before.apply(s.term)))]


# --- rule matching ---------------------------------------------------------------

class VarSupply:
    def __init__(self, start: int):
        self.next = start

    def __call__(self, name: str) -> Var:
        v = Var(f"_{name}{self.next}", self.next)
        self.next += 1
        return v


def search_partners(patterns: Sequence[Term], fixed: Mapping[int, Stored], store: Sequence[Stored],
                    b: BuiltinStore, subst: Subst = EMPTY) -> Iterator[tuple[Subst, list[Stored]]]:
    """Enumerate matchings of head patterns against the store.

    `fixed` pins some head positions to given constraints (the active one).
    Free positions are filled left to right with constraints in ascending id
    order; each stored constraint is used at most once.
    """
    chosen: list = [None] * len(patterns)
    used = {s.id for s in fixed.values()}
    for k, s in fixed.items():
        subst = match(patterns[k], s.term, subst, b.bindings)
        if subst is None:
            return
        chosen[k] = s
    free = [k for k in range(len(patterns)) if k not in fixed]
    by_sym: dict = {}
    for s in store:
        by_sym.setdefault(_sym(s.term), []).append(s)

    def rec(i: int, sub: Subst):
        if i == len(free):
            yield sub, list(chosen)
            return
        k = free[i]
        for s in by_sym.get(_sym(patterns[k]), ()):
            if s.id in used:
                continue
            m = match(patterns[k], s.term, sub, b.bindings)
            if m is None:
                continue
            used.add(s.id)
            chosen[k] = s
            yield from rec(i + 1, m)
            used.discard(s.id)
            chosen[k] = None

    yield from rec(0, subst)


def _sym(t: Term):
    return symbol(t) if isinstance(t, (Atom, Compound)) else None


@dataclass(frozen=True)
class RuleMatch:
    rule: ChrRule  # renamed apart
    subst: Subst
    kept: tuple  # Stored, head order
    removed: tuple
    next_var: int
    mapping: dict = field(default_factory=dict, compare=False)  # original var uid -> renamed Var

    @property
    def ids(self) -> tuple:
        return tuple(s.id for s in self.kept) + tuple(s.id for s in self.removed)

    @property
    def body(self) -> list[Term]:
        # a bare `true` goal is a no-op and is not pushed
        return [self.subst.apply(t) for t in self.rule.body if t != Atom("true")]


def rename_rule(rule: ChrRule, supply: VarSupply, mapping: dict | None = None) -> ChrRule:
    mapping = {} if mapping is None else mapping
    f = lambda ts: tuple(rename(t, mapping, supply) for t in ts)  # noqa: E731
    return ChrRule(rule.name, f(rule.kept), f(rule.removed), f(rule.guard), f(rule.body))


def find_rule_match(p: Program, active: Active, store: Sequence[Stored], b: BuiltinStore,
                    history, flags: Mapping[str, Term], next_var: int) -> RuleMatch | None:
    """First applicable instance of the rule owning occurrence `active.occ`."""
    occ = p.occurrence(_sym(active.term), active.occ)
    if occ is None:
        return None
    me = next((s for s in store if s.id == active.id), None)
    if me is None:
        return None
    supply = VarSupply(next_var)
    mapping: dict = {}
    rule = rename_rule(p.rules[occ.rule_index], supply, mapping)
    heads = rule.kept + rule.removed
    pin = occ.position if occ.kept else len(rule.kept) + occ.position
    for sub, chosen in search_partners(heads, {pin: me}, store, b):
        kept, removed = tuple(chosen[:len(rule.kept)]), tuple(chosen[len(rule.kept):])
        key = (rule.name, tuple(s.id for s in kept + removed))
        if key in history:
            continue
        if entails_guard(b, rule.guard, sub, flags):
            return RuleMatch(rule, sub, kept, removed, supply.next, mapping)
    return None


# --- transitions -------------------------------------------------------------------

def step(p: Program, s: StateR) -> tuple[Label, StateR] | None:
    if s.terminal:
        return None
    top, rest = s.stack[0], s.stack[1:]

    if isinstance(top, GoalBuiltin):
        return solve_wake(s, top.term, rest)

    if isinstance(top, GoalConstraint):
        n = s.next_id
        st = Stored(n, top.term)
        return (Label("activate", ids=(n,)),
                replace(s, stack=(Active(top.term, n, 1),) + rest,
                        store=s.store + (st,), next_id=n + 1))

    if isinstance(top, Identified):
        return (Label("reactivate", ids=(top.id,)),
                replace(s, stack=(Active(top.term, top.id, 1),) + rest))

    if isinstance(top, Active):
        m = find_rule_match(p, top, s.store, s.builtins, s.history, dict(s.flags), s.next_var)
        if m is not None:
            return apply_match(s, top, m, rest)
        if top.occ > p.max_occurrence(_sym(top.term)):
            return Label("drop", ids=(top.id,), occ=top.occ), replace(s, stack=rest)
        return (Label("default", ids=(top.id,), occ=top.occ),
                replace(s, stack=(Active(top.term, top.id, top.occ + 1),) + rest))

    raise EngineError(f"unexpected stack entry {top!r}")


def solve_wake(s, c: Term, rest: tuple, **extra):
    b2, flags, sent = solve(c, s.builtins, dict(s.flags))
    wake = tuple(Identified(w.term, w.id) for w in woken(s.store, s.builtins, b2))
    events = s.events + ((b2.apply(sent),) if sent is not None else ())
    label = Label("solve", detail=_fmt(s.builtins.apply(c)))
    return label, replace(s, stack=wake + rest, builtins=b2, flags=tuple(sorted(flags.items())),
                          events=events, **extra)


def apply_match(s: StateR, active: Active, m: RuleMatch, rest: tuple):
    removed_ids = {x.id for x in m.removed}
    keep_active = active.id not in removed_ids
    body = tuple(goal_for(t) for t in m.body)
    stack = body + ((active,) if keep_active else ()) + rest
    return (Label("apply", rule=m.rule.name, ids=m.ids),
            replace(s, stack=stack, store=tuple(x for x in s.store if x.id not in removed_ids),
                    history=s.history | {(m.rule.name, m.ids)}, next_var=m.next_var))


def _fmt(t: Term) -> str:
    from .syntax import fmt
    return fmt(t)


def run(p: Program, s: StateR, fuel: int = DEFAULT_FUEL) -> tuple[StateR, list]:
    """Step until the stack is empty (or the built-in store fails)."""
    trace: list = []
    while True:
        nxt = step(p, s)
        if nxt is None:
            return s, trace
        if len(trace) >= fuel:
            raise FuelExhausted(s, trace)
        trace.append(nxt)
        s = nxt[1]


def run_query(p: Program, query: Sequence[Term], fuel: int = DEFAULT_FUEL) -> tuple[StateR, list]:
    return run(p, initial_state(query), fuel)
