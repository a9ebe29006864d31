"""State equivalence between the plain and the visual engine, and the
differential harness that checks it over a corpus.

A visual state carries extra baggage (graphical store, annotation history,
provenance, auxiliary constraints, larger id counter).  Two states are
equivalent when, ignoring all of that, they hold the same goals, the same
user constraints, equivalent built-in stores, corresponding propagation
histories, and the visual id counter is not behind.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .refined import (DEFAULT_FUEL, Active, FuelExhausted, GoalBuiltin, GoalConstraint,
                      Identified, StateR, run_query)
from .syntax import Program, fmt, is_aux, parse_program, parse_query
from .terms import BuiltinStore, Term, Var, canonical, term_vars
from .transform import strip_aux, transform
from .vis import StateVis, run_vis

log = logging.getLogger(__name__)

CLAUSES = ("goal", "store", "builtins", "history", "counter", "fuel")


@dataclass
class EquivalenceReport:
    verdict: bool
    clause: str | None = None
    witness: str = ""
    program: str = ""
    query: str = ""
    check: str = "vis"  # "vis": visual vs plain engine; "transform": compiled vs original

    def __post_init__(self):
        if self.verdict != (self.clause is None):
            raise ValueError("a failing report needs a clause, a passing one must not have one")

    def to_json(self) -> dict:
        return asdict(self)


def _key(t: Term, keep: frozenset) -> str:
    return fmt(canonical(t, keep))


def _bag(terms: Iterable[Term], keep: frozenset = frozenset()) -> Counter:
    return Counter(_key(t, keep) for t in terms if not is_aux(t))


def seq_equiv(a: Iterable[Term], b: Iterable[Term], keep: frozenset = frozenset()) -> bool:
    """Multiset equality, ignoring auxiliary constraints.

    Variables outside `keep` are local: each term is compared up to a
    renaming of them.
    """
    return _bag(a, keep) == _bag(b, keep)


def _projection(b: BuiltinStore, global_vars: frozenset) -> tuple:
    names: dict = {}
    return tuple((uid, fmt(canonical(b.apply(Var("_", uid)), global_vars, names)))
                 for uid in sorted(global_vars))


def builtin_equiv(b1: BuiltinStore, b2: BuiltinStore,
                  global_vars: Iterable[int] | None = None) -> bool:
    """Equal once projected onto the global variables.

    Without `global_vars` every variable bound in either store counts as
    global, which makes the comparison strict.
    """
    if b1.failed or b2.failed:
        return b1.failed and b2.failed
    g = frozenset(global_vars) if global_vars is not None else frozenset(b1.bindings) | frozenset(b2.bindings)
    return _projection(b1, g) == _projection(b2, g)


def _goal_terms(stack) -> list[Term]:
    out = []
    for e in stack:
        if isinstance(e, (GoalConstraint, GoalBuiltin, Identified, Active)):
            out.append(e.term)
    return out  # pending visuals are not goals


def _id_bijection(v: StateVis) -> dict[int, int]:
    """Visual constraint ids -> plain ids, by creation order of user constraints."""
    ids = sorted(i for i, (t, _) in v.cons_r.items() if not is_aux(t))
    return {vid: k for k, vid in enumerate(ids, 1)}


def states_equivalent(v: StateVis, r: StateR, global_vars: Iterable[int] | None = None
                      ) -> EquivalenceReport:
    g = frozenset(global_vars) if global_vars is not None else frozenset(
        x.uid for t in _goal_terms(r.stack) + [s.term for s in r.store] for x in term_vars(t))

    vg = [v.builtins.apply(t) for t in _goal_terms(v.stack)]
    rg = [r.builtins.apply(t) for t in _goal_terms(r.stack)]
    if not seq_equiv(vg, rg, g):
        return EquivalenceReport(False, "goal", f"goals differ: {vg!r} vs {rg!r}")

    vs, rs = v.constraints(), r.constraints()
    if not seq_equiv(vs, rs, g):
        extra = _bag(vs, g) - _bag(rs, g)
        missing = _bag(rs, g) - _bag(vs, g)
        return EquivalenceReport(False, "store", f"visual store has extra {sorted(extra.elements())}"
                                                 f" and lacks {sorted(missing.elements())}")

    if not builtin_equiv(v.builtins, r.builtins, g):
        return EquivalenceReport(False, "builtins",
                                 f"built-in stores differ: {v.builtins!r} vs {r.builtins!r}")

    bij = _id_bijection(v)
    aux_ids = {i for i, (t, _) in v.cons_r.items() if is_aux(t)}
    mapped = set()
    for rule, ids in v.history:
        if aux_ids.intersection(ids):
            continue
        mapped.add((rule, tuple(bij.get(i, -i) for i in ids)))  # unknown ids never match
    if mapped != set(r.history):
        diff = sorted(mapped ^ set(r.history))
        return EquivalenceReport(False, "history", f"histories differ on {diff}")

    if v.next_id < r.next_id:
        return EquivalenceReport(False, "counter", f"visual counter {v.next_id} < {r.next_id}")
    return EquivalenceReport(True)


# --- differential harness -------------------------------------------------------------

def _query_vars(query: Sequence[Term]) -> frozenset:
    return frozenset(v.uid for t in query for v in term_vars(t))


def _fuel_report(query_text: str, check: str, which: str, e: FuelExhausted) -> EquivalenceReport:
    return EquivalenceReport(False, "fuel", f"{which} run exhausted fuel after "
                                            f"{len(e.trace)} steps", query=query_text, check=check)


def differential_check(p: Program, queries: Sequence[str], reference: Program | None = None,
                       fuel: int = DEFAULT_FUEL, seed: int = 0, name: str = "") -> list[EquivalenceReport]:
    """Two reports per query: visual vs plain engine, and compiled vs original.

    `reference` replaces p as the plain-engine side (used to plant mutants).
    """
    plain = (reference or p).without_annotations()
    compiled = transform(p).program
    reports = []
    for qtext in queries:
        query = parse_query(qtext)
        g = _query_vars(query)
        try:
            r, _ = run_query(plain, query, fuel)
        except FuelExhausted as e:
            reports.append(_fuel_report(qtext, "vis", "plain", e))
            reports.append(_fuel_report(qtext, "transform", "plain", e))
            continue
        try:
            v, _ = run_vis(p, query, fuel, seed)
            rep = states_equivalent(v, r, g)
        except FuelExhausted as e:
            rep = _fuel_report(qtext, "vis", "visual", e)
        rep.program, rep.query = name, qtext
        reports.append(rep)

        try:
            t, _ = run_query(compiled, query, fuel)
            got, want = strip_aux(t.constraints()), r.constraints()
            if seq_equiv(got, want, g):
                rep = EquivalenceReport(True)
            else:
                rep = EquivalenceReport(False, "store", f"compiled program ends with {got!r}, "
                                                        f"original with {want!r}")
        except FuelExhausted as e:
            rep = _fuel_report(qtext, "transform", "compiled", e)
        rep.program, rep.query, rep.check = name, qtext, "transform"
        reports.append(rep)
    return reports


@dataclass
class CorpusEntry:
    name: str
    program: Program
    queries: list = field(default_factory=list)
    reference: Program | None = None


def read_queries(path: Path) -> list[str]:
    out = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("%"):
            out.append(line)
    return out


def load_corpus(directory: str | Path) -> list[CorpusEntry]:
    """Programs `<name>.chr` with queries in `<name>.queries`.

    An optional `<name>.ref.chr` is used as the plain-engine reference.
    """
    d = Path(directory)
    entries = []
    for f in sorted(d.glob("*.chr")):
        if f.name.endswith(".ref.chr"):
            continue
        name = f.stem
        qfile = d / f"{name}.queries"
        if not qfile.exists():
            log.warning("%s has no query file; skipped", f.name)
            continue
        ref = d / f"{name}.ref.chr"
        entries.append(CorpusEntry(name, parse_program(f.read_text()), read_queries(qfile),
                                   parse_program(ref.read_text()) if ref.exists() else None))
    return entries


def check_corpus(directory: str | Path, fuel: int = DEFAULT_FUEL, seed: int = 0
                 ) -> list[EquivalenceReport]:
    reports = []
    for e in load_corpus(directory):
        reports.extend(differential_check(e.program, e.queries, e.reference, fuel, seed, e.name))
    return reports


def write_report(reports: Sequence[EquivalenceReport], path: str | Path) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_json()) + "\n")
