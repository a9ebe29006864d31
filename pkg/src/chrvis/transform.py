"""Compile an annotated program into plain CHR.

The output communicates every interesting constraint through the
``communicate_constraint/1`` built-in instead of relying on engine
support for annotations:

1. one propagation rule per declared constraint, guarded by
   ``check(status,false)``, communicating the constraint;
2. one rule per multi-headed constraint annotation that emits an
   ``aux_ann_<annotation>`` constraint carrying the head variables;
3. every rule carrying a rule annotation has its body wrapped as
   ``set(status,true), Body, Aux, set(status,false)`` so the body's own
   constraints stay silent, and the auxiliary constraint is communicated
   (and consumed) by a dedicated simplification rule.

Generated rules precede the user's rules.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .syntax import AUX_PREFIX, ChrRule, Program, is_aux
from .terms import Atom, Compound, Term, Var, symbol, term_vars

COMM_PREFIX = "comm_cons_"
COMPOUND_PREFIX = "compound_"
STATUS = "status"
SINK = "communicate_constraint"
RESERVED_PREFIXES = (COMM_PREFIX, COMPOUND_PREFIX)


class TransformError(Exception):
    pass


@dataclass
class TransformedProgram:
    program: Program
    provenance: dict = field(default_factory=dict)  # generated rule name -> step 1/2/3
    status_symbol: tuple = (STATUS, 1)
    sink_symbol: tuple = (SINK, 1)


def _status(value: str) -> tuple:
    return Atom(STATUS), Atom(value)


def check_status(value: str) -> Term:
    return Compound("check", _status(value))


def set_status(value: str) -> Term:
    return Compound("set", _status(value))


def _generic(name: str, arity: int) -> Term:
    if arity == 0:
        return Atom(name)
    return Compound(name, tuple(Var(f"X{i}", i) for i in range(1, arity + 1)))


def _distinct_vars(terms) -> list[Var]:
    out: list[Var] = []
    for t in terms:
        for v in term_vars(t):
            if v not in out:
                out.append(v)
    return out


def transform(p: Program, simplify_compound: bool = False) -> TransformedProgram:
    """Translate p; annotations become ordinary rules.

    With ``simplify_compound`` the compound-annotation rules remove their
    heads instead of propagating (only sensible when the heads exist for
    visualization alone).
    """
    clashes = sorted(r.name for r in p.rules if r.name.startswith(RESERVED_PREFIXES))
    if clashes:
        raise TransformError("program looks already transformed; reserved rule names: "
                             + ", ".join(clashes))
    user_names = {r.name for r in p.rules}
    decls = list(p.declarations)
    aux_syms = set(p.aux_symbols)
    generated: list[ChrRule] = []
    provenance: dict[str, int] = {}

    def add(rule: ChrRule, step: int):
        if rule.name in user_names or rule.name in provenance:
            raise TransformError(f"generated rule name {rule.name} collides with an existing rule")
        generated.append(rule)
        provenance[rule.name] = step

    # step 2 first, so its auxiliary symbols get declared and communicated by step 1
    step2: list[ChrRule] = []
    used: dict[str, int] = {}
    for ann in p.constraint_annotations:
        if len(ann.heads) < 2:
            continue
        base = COMPOUND_PREFIX + "_".join(symbol(h)[0] for h in ann.heads)
        used[base] = used.get(base, 0) + 1
        name = base if used[base] == 1 else f"{base}_{used[base]}"
        args = tuple(_distinct_vars(ann.heads))
        aux_name = AUX_PREFIX + ann.name
        aux = Compound(aux_name, args) if args else Atom(aux_name)
        if symbol(aux) in decls or symbol(aux) in aux_syms:
            raise TransformError(f"auxiliary constraint {aux_name}/{len(args)} already in use")
        decls.append(symbol(aux))
        guard = (check_status("false"),) + tuple(ann.condition)
        kept, removed = ((), tuple(ann.heads)) if simplify_compound else (tuple(ann.heads), ())
        step2.append(ChrRule(name, kept, removed, guard, (aux,)))

    for name, arity in decls:
        if (name, arity) in aux_syms:
            continue
        head = _generic(name, arity)
        add(ChrRule(f"{COMM_PREFIX}{name}_{arity}", (head,), (),
                    (check_status("false"),), (Compound(SINK, (head,)),)), 1)
    for r in step2:
        add(r, 2)

    rewritten: list[ChrRule] = []
    for r in p.rules:
        anns = p.rule_annotations_for(r.name)
        if not anns:
            rewritten.append(r)
            continue
        body = tuple(b for b in r.body if b != Atom("true"))
        body = (set_status("true"),) + body + tuple(a.aux_constraint for a in anns) \
            + (set_status("false"),)
        rewritten.append(ChrRule(r.name, r.kept, r.removed, r.guard, body))

    seen_aux: set = set()
    for a in p.rule_annotations:
        sym = symbol(a.aux_constraint)
        aux_vars = set(term_vars(a.aux_constraint))
        loose = [v.name for c in a.condition for v in term_vars(c) if v not in aux_vars]
        if loose:
            raise TransformError(f"condition of {a.name} uses variables not carried by "
                                 f"{sym[0]}: {', '.join(sorted(set(loose)))}")
        if sym not in decls:
            decls.append(sym)
        name = f"{COMM_PREFIX}{sym[0]}_{sym[1]}"
        if a.condition:
            name = f"{name}_{a.name}"
        elif sym in seen_aux:
            continue
        seen_aux.add(sym)
        add(ChrRule(name, (), (a.aux_constraint,), tuple(a.condition),
                    (Compound(SINK, (a.aux_constraint,)),)), 3)

    out = Program(decls, generated + rewritten, [], [], p.comm_head)
    return TransformedProgram(out, provenance)


def is_generated_residue(t: Term) -> bool:
    """Constraints that only exist because of the transformation."""
    if not isinstance(t, (Atom, Compound)):
        return False
    name = symbol(t)[0]
    return is_aux(t) or name == STATUS or name.startswith(RESERVED_PREFIXES)


def strip_aux(store) -> list[Term]:
    return [t for t in store if not is_generated_residue(t)]
