import random

import pytest

from chrvis.refined import Active, EngineError, FuelExhausted, run_query
from chrvis.syntax import is_aux, parse_program
from chrvis.vis import AUX, find_annotation, initial_state_vis, provenance, run_vis, step_vis

from conftest import CORPUS, MIN_QUERY, SORT_QUERY, load, q


def kinds(trace, *wanted):
    return [l for l, _ in trace if l.kind in wanted]


def test_constraint_annotation_sort():
    s, trace = run_vis(load("sort_cells"), q(SORT_QUERY))
    assert len(kinds(trace, "draw")) == 9
    objs = {o.name: o.param("x").value for o in s.graphics}
    assert objs == {"7": 26, "6": 14, "4": 2}
    assert sorted(map(repr, s.constraints())) == ["cell(0, 4)", "cell(1, 6)", "cell(2, 7)"]


def test_draw_count_matches_constraint_additions():
    # every cell added to the store (query or rule body) is drawn exactly once
    s_r, trace_r = run_query(load("sort_cells").without_annotations(), q(SORT_QUERY))
    _, trace = run_vis(load("sort_cells"), q(SORT_QUERY))
    assert len(kinds(trace, "draw")) == len(kinds(trace_r, "activate")) == 3 + 2 * 3


def test_annotation_fires_before_rule():
    _, trace = run_vis(load("sort_cells"), q(SORT_QUERY))
    ks = [l.kind for l, _ in trace]
    assert ks[:3] == ["activate", "apply_annotation", "draw"]
    first_apply = ks.index("apply")
    # cell(1,6) is drawn before it probes occurrence 1 (no match) and 2 (sort_rule)
    assert ks[first_apply - 4:first_apply] == ["activate", "apply_annotation", "draw", "default"]


def test_comm_head_removes_objects_of_removed_heads():
    _, trace = run_vis(load("sort_cells"), q(SORT_QUERY))
    label, after = next((l, s) for l, s in trace if l.kind == "apply")
    assert label.ids == (1, 3)
    assert len(after.graphics) == 0  # both drawn cells were removed with their objects


def test_without_comm_head_objects_survive_removal():
    _, trace = run_vis(load("sort_swap"), q(SORT_QUERY))
    before = None
    for label, s in trace:
        if label.kind == "apply":
            assert before is not None and s.graphics == before.graphics
        before = s


def test_rule_annotation_sort_actions():
    s, trace = run_vis(load("sort_swap"), q(SORT_QUERY))
    actions = []
    prev = None
    for label, st in trace:
        if label.kind == "update":
            item = prev.stack[0].item
            actions.append((item.kind, str(item.actuals[2]) if item.kind == "changeParam" else "move"))
        prev = st
    per_firing = [("changeParam", "pink")] * 2 + [("moveRelative", "move")] * 2 + [("changeParam", "green")] * 2
    assert actions == per_firing * 3
    assert [l.detail for l in kinds(trace, "draw")] == ["node node7", "node node6", "node node4"]
    assert {o.name: o.param("x").value for o in s.graphics} == {"node7": 26, "node6": 14, "node4": 2}
    assert all(o.param("bkgrd").name == "green" for o in s.graphics)


def test_rule_annotation_suppresses_constraint_annotations_of_body_constraints():
    s, trace = run_vis(load("sort_swap"), q(SORT_QUERY))
    for label in kinds(trace, "apply_annotation"):
        if label.rule == "ann_rule_cell":
            assert all(provenance(s, i) == AUX for i in label.ids)


def test_provenance():
    s, _ = run_vis(load("sort_swap"), q(SORT_QUERY))
    assert provenance(s, 1) == AUX
    by_term = {}
    for cid, (term, rule) in s.cons_r.items():
        by_term.setdefault("aux" if is_aux(term) else "cell", set()).add(rule)
    assert by_term["aux"] == {AUX}
    assert by_term["cell"] == {AUX, "sort_rule"}
    with pytest.raises(EngineError):
        provenance(s, 999)


def test_no_annotations_degenerates_to_refined():
    p = load("min").without_annotations()
    s, trace = run_vis(p, q(MIN_QUERY))
    _, trace_r = run_query(p, q(MIN_QUERY))
    assert [str(l) for l, _ in trace] == [str(l) for l, _ in trace_r]
    assert all(len(st.graphics) == 0 for _, st in trace)


def test_min_annotation_with_comm_head():
    s, trace = run_vis(load("min"), q(MIN_QUERY))
    assert s.graphics.names() == ["1"]
    assert [str(l) for l in kinds(trace, "apply")] == ["apply remove_min [3, 1]", "apply remove_min [5, 3]"]


def test_conditional_rule_annotation():
    s, trace = run_vis(load("count"), q("count(0), inc(3)"))
    steps = [repr(t) for t, _ in s.cons_r.values() if is_aux(t)]
    assert steps == ["aux_ann_step(2)"]  # only the firing with N >= 2
    assert sorted(s.graphics.names()) == ["2", "c"]


def test_compound_annotation():
    s, trace = run_vis(load("path"), q("edge(1,2), edge(2,3)"))
    fired = [(l.rule, l.ids) for l in kinds(trace, "apply_annotation")]
    assert ("link", (1, 6)) in fired
    assert s.graphics.by_name("103").kind == "line"


def test_random_parameters_depend_on_seed_only():
    p = load("leq")
    a, _ = run_vis(p, q("leq(A,B), leq(B,C)"), seed=3)
    b, _ = run_vis(p, q("leq(A,B), leq(B,C)"), seed=3)
    c, _ = run_vis(p, q("leq(A,B), leq(B,C)"), seed=4)
    assert a.graphics == b.graphics and a.graphics != c.graphics


def test_fuel():
    with pytest.raises(FuelExhausted) as e:
        run_vis(load("sort_cells"), q(SORT_QUERY), fuel=5)
    assert len(e.value.trace) == 5


def test_unbound_annotation_argument_is_reported():
    p = parse_program(":- chr_constraint a/1.\ng a(X) ==> circle(valueOf(X), 1, 1, 1, red, red).")
    with pytest.raises(Exception, match="unbound"):
        run_vis(p, q("a(Y)"))


# --- invariants over the corpus ---------------------------------------------------------------

def corpus_runs():
    for path in sorted(CORPUS.glob("*.chr")):
        p = load(path.stem)
        for line in (CORPUS / f"{path.stem}.queries").read_text().splitlines():
            if line.strip():
                yield pytest.param(p, line, id=f"{path.stem}:{line}")


RUNS = list(corpus_runs())


@pytest.mark.parametrize("p,query", RUNS)
def test_annotation_single_fire(p, query):
    _, trace = run_vis(p, q(query))
    fired = [(l.rule, l.ids) for l in kinds(trace, "apply_annotation")]
    assert len(fired) == len(set(fired))


@pytest.mark.parametrize("p,query", RUNS)
def test_annotation_precedence(p, query):
    s = initial_state_vis(q(query))
    rng = random.Random(0)
    while not s.terminal:
        probe = None
        if isinstance(s.stack[0], Active):
            probe = find_annotation(p, s.stack[0], s, random.Random(0))
        label, s = step_vis(p, s, rng)
        if probe is not None:
            assert label.kind == "apply_annotation" and label.rule == probe.rule


@pytest.mark.parametrize("p,query", RUNS)
def test_draw_count_conservation(p, query):
    _, trace = run_vis(p, q(query))
    before = None
    for label, s in trace:
        if label.kind == "draw":
            name = label.detail.split(" ", 1)[1]
            clash = before.graphics.by_name(name) is not None
            assert len(s.graphics) == len(before.graphics) + 1 - clash
            assert label.ids[0] in s.graphics.ids()
        before = s


@pytest.mark.parametrize("p,query", RUNS)
def test_graphics_are_irrelevant_to_the_derivation(p, query):
    """Eliding visual transitions leaves the plain derivation (up to id renaming)."""
    v, trace = run_vis(p, q(query))
    _, trace_r = run_query(p.without_annotations(), q(query))
    aux_ids = {i for i, (t, _) in v.cons_r.items() if is_aux(t)}
    user = sorted(i for i in v.cons_r if i not in aux_ids)
    to_r = {vid: k for k, vid in enumerate(user, 1)}

    def norm(label, ids_map=None):
        ids = tuple(ids_map[i] for i in label.ids) if ids_map else label.ids
        return label.kind, label.rule, ids, label.occ

    got = [norm(l, to_r) for l, _ in trace
           if l.kind not in ("draw", "update", "apply_annotation") and not set(l.ids) & aux_ids]
    want = [norm(l) for l, _ in trace_r]
    assert got == want


@pytest.mark.parametrize("p,query", RUNS)
def test_every_stored_constraint_has_provenance(p, query):
    s, _ = run_vis(p, q(query))
    assert all(st.id in s.cons_r for st in s.store)
