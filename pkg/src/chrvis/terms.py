"""Terms, one-way matching, unification and the built-in constraint theory.

The theory is deliberately small: syntactic equality plus integer
arithmetic and comparisons.  Guard entailment is decided by grounding a
guard under the current bindings and evaluating it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union


class TermError(Exception):
    """Raised for evaluation problems (non-ground arithmetic, bad built-ins)."""


@dataclass(frozen=True)
class Var:
    name: str = field(compare=False)
    uid: int

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Int:
    value: int

    def __repr__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Atom:
    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple

    def __post_init__(self):
        if not self.args:
            raise ValueError(f"compound {self.functor} needs at least one argument")

    @property
    def arity(self) -> int:
        return len(self.args)

    def __repr__(self) -> str:
        return f"{self.functor}({', '.join(map(repr, self.args))})"


Term = Union[Var, Int, Atom, Compound]


def mk(functor: str, *args) -> Term:
    """Build a term from python values; ints become Int, strs become Atom."""
    conv = tuple(a if isinstance(a, (Var, Int, Atom, Compound))
                 else Int(a) if isinstance(a, int) else Atom(a) for a in args)
    return Compound(functor, conv) if conv else Atom(functor)


def symbol(t: Term) -> tuple[str, int]:
    """The (name, arity) pair identifying a constraint symbol."""
    if isinstance(t, Compound):
        return t.functor, len(t.args)
    if isinstance(t, Atom):
        return t.name, 0
    raise TermError(f"not a callable term: {t!r}")


def term_vars(t: Term) -> Iterator[Var]:
    """Variables of t in left-to-right order (with repetitions)."""
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Compound):
        for a in t.args:
            yield from term_vars(a)


def is_ground(t: Term) -> bool:
    return next(term_vars(t), None) is None


class Subst(Mapping[int, Term]):
    """Immutable substitution keyed by variable uid.

    Bindings are kept normalized by the operations in this module: every
    right-hand side is fully dereferenced, so applying once is enough.
    """

    __slots__ = ("_b",)

    def __init__(self, bindings: Mapping[int, Term] | None = None):
        self._b = dict(bindings or {})

    def __getitem__(self, uid: int) -> Term:
        return self._b[uid]

    def __iter__(self):
        return iter(self._b)

    def __len__(self) -> int:
        return len(self._b)

    def __eq__(self, other) -> bool:
        return isinstance(other, Subst) and self._b == other._b

    def __hash__(self):
        return hash(frozenset(self._b.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"_{k}↦{v!r}" for k, v in sorted(self._b.items()))
        return "{" + inner + "}"

    def bind(self, v: Var, t: Term) -> "Subst":
        """Add v↦t and re-normalize existing right-hand sides.

        t must already be dereferenced under this substitution.
        """
        single = {v.uid: t}
        out = {k: _apply(rhs, single) for k, rhs in self._b.items()}
        out[v.uid] = t
        return Subst(out)

    def apply(self, t: Term) -> Term:
        return _apply(t, self._b)


EMPTY = Subst()


def _apply(t: Term, b: Mapping[int, Term]) -> Term:
    if isinstance(t, Var):
        r = b.get(t.uid)
        return t if r is None else r
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_apply(a, b) for a in t.args))
    return t


def deref(t: Term, s: Mapping[int, Term]) -> Term:
    return _apply(t, s)


def occurs(v: Var, t: Term) -> bool:
    return any(x == v for x in term_vars(t))


# --- matching -------------------------------------------------------------

def match(pattern: Term, target: Term, into: Subst = EMPTY,
          store: Mapping[int, Term] | None = None) -> Subst | None:
    """One-way match of pattern against target.

    Returns an extension of `into` binding only pattern variables, or None.
    `store` holds the built-in bindings the target is read under; target
    variables are never bound.
    """
    if store:
        target = _apply(target, store)
    out = dict(into._b)
    if _match(pattern, target, out):
        return Subst(out)
    return None


def _match(p: Term, t: Term, out: dict) -> bool:
    if isinstance(p, Var):
        bound = out.get(p.uid)
        if bound is None:
            out[p.uid] = t
            return True
        return bound == t
    if isinstance(p, Compound):
        if not isinstance(t, Compound) or t.functor != p.functor or len(t.args) != len(p.args):
            return False
        return all(_match(a, b, out) for a, b in zip(p.args, t.args))
    return p == t


# --- unification ----------------------------------------------------------

@dataclass(frozen=True)
class BuiltinStore:
    bindings: Subst = EMPTY
    failed: bool = False

    def apply(self, t: Term) -> Term:
        return self.bindings.apply(t)


def unify(a: Term, b: Term, store: BuiltinStore = BuiltinStore()) -> BuiltinStore:
    """Solve a = b against store.  A failed store signals no unifier."""
    if store.failed:
        return store
    s = store.bindings
    stack = [(s.apply(a), s.apply(b))]
    while stack:
        x, y = stack.pop()
        x, y = s.apply(x), s.apply(y)
        if x == y:
            continue
        if isinstance(x, Var) or isinstance(y, Var):
            if not isinstance(x, Var):
                x, y = y, x
            if occurs(x, y):
                return BuiltinStore(s, failed=True)
            s = s.bind(x, y)
            continue
        if (isinstance(x, Compound) and isinstance(y, Compound)
                and x.functor == y.functor and len(x.args) == len(y.args)):
            stack.extend(zip(x.args, y.args))
            continue
        return BuiltinStore(s, failed=True)
    return BuiltinStore(s)


# --- arithmetic and guards ------------------------------------------------

ARITH_OPS = {"+", "-", "*", "/"}
COMPARISONS = {"<", ">", "=<", ">="}
GUARD_BUILTINS = {"true", "fail", "=", "==", "\\==", "check"} | COMPARISONS


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def eval_arith(expr: Term, under: Mapping[int, Term] = EMPTY) -> int:
    """Evaluate an integer expression over + - * / (division truncates)."""
    t = _apply(expr, under) if under else expr
    return _eval(t)


def _eval(t: Term) -> int:
    if isinstance(t, Int):
        return t.value
    if isinstance(t, Var):
        raise TermError(f"non-ground arithmetic: {t!r} is unbound")
    if isinstance(t, Compound) and t.functor in ARITH_OPS:
        if len(t.args) == 1 and t.functor == "-":
            return -_eval(t.args[0])
        if len(t.args) == 2:
            a, b = _eval(t.args[0]), _eval(t.args[1])
            if t.functor == "+":
                return a + b
            if t.functor == "-":
                return a - b
            if t.functor == "*":
                return a * b
            if b == 0:
                raise TermError("division by zero")
            return _trunc_div(a, b)
    raise TermError(f"not an arithmetic expression: {t!r}")


def compare(op: str, a: int, b: int) -> bool:
    return {"<": a < b, ">": a > b, "=<": a <= b, ">=": a >= b}[op]


def _holds(g: Term, flags: Mapping[str, Term]) -> bool:
    if isinstance(g, Atom):
        if g.name == "true":
            return True
        if g.name == "fail":
            return False
        raise TermError(f"unsupported built-in in guard: {g.name}/0")
    if not isinstance(g, Compound):
        raise TermError(f"not a guard: {g!r}")
    op = g.functor
    if op in COMPARISONS and len(g.args) == 2:
        if not all(is_ground(a) for a in g.args):
            return False
        try:
            return compare(op, _eval(g.args[0]), _eval(g.args[1]))
        except TermError:
            return False
    if op in ("=", "==") and len(g.args) == 2:
        return g.args[0] == g.args[1]
    if op == "\\==" and len(g.args) == 2:
        return g.args[0] != g.args[1]
    if op == "check" and len(g.args) == 2 and isinstance(g.args[0], Atom):
        return flags.get(g.args[0].name, Atom("false")) == g.args[1]
    raise TermError(f"unsupported built-in in guard: {op}/{len(g.args)}")


def entails_guard(store: BuiltinStore, guard: Iterable[Term], under: Mapping[int, Term] = EMPTY,
                  flags: Mapping[str, Term] | None = None) -> bool:
    """True iff every guard atom, read under `under` and the store, holds.

    Comparisons over non-ground terms are not entailed.  `==`/`=` are
    entailed only when both sides are already identical.
    """
    if store.failed:
        return False
    flags = flags or {}
    for g in guard:
        g = store.apply(_apply(g, under)) if under else store.apply(g)
        if not _holds(g, flags):
            return False
    return True


def rename(t: Term, mapping: dict[int, Var], fresh) -> Term:
    """Rename variables of t apart; `fresh(name)` supplies new variables."""
    if isinstance(t, Var):
        v = mapping.get(t.uid)
        if v is None:
            v = mapping[t.uid] = fresh(t.name)
        return v
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(rename(a, mapping, fresh) for a in t.args))
    return t


def canonical(t: Term, keep: frozenset[int] = frozenset(), names: dict | None = None) -> Term:
    """Replace variables not in `keep` by positional placeholders.

    Used to compare terms whose local variables come from different
    renamings.  Pass a shared `names` dict to canonicalize several terms
    jointly.
    """
    names = {} if names is None else names
    if isinstance(t, Var):
        if t.uid in keep:
            return t
        if t.uid not in names:
            names[t.uid] = Var(f"_L{len(names)}", -1 - len(names))
        return names[t.uid]
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(canonical(a, keep, names) for a in t.args))
    return t
