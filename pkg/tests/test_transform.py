import pytest

from chrvis.refined import run_query
from chrvis.syntax import ChrRule, parse_program, pretty_print
from chrvis.terms import Atom, Compound, mk
from chrvis.transform import (STATUS, TransformError, is_generated_residue, strip_aux, transform)

from conftest import CORPUS, SORT_QUERY, load, q


def names(tp):
    return [r.name for r in tp.program.rules]


def test_sort_with_constraint_annotation():
    p = load("sort_cells")
    tp = transform(p)
    assert names(tp) == ["comm_cons_cell_2", "comm_cons_comm_head_1", "sort_rule"]
    assert tp.program.rule("sort_rule") == p.rule("sort_rule")
    comm = tp.program.rule("comm_cons_cell_2")
    assert comm.kind == "propagation"
    assert comm.guard == (mk("check", "status", "false"),)
    assert comm.body == (Compound("communicate_constraint", comm.kept),)
    assert tp.provenance == {"comm_cons_cell_2": 1, "comm_cons_comm_head_1": 1}
    assert not tp.program.constraint_annotations and not tp.program.rule_annotations
    assert tp.status_symbol == (STATUS, 1)


def test_sort_with_rule_annotation():
    tp = transform(load("sort_swap"))
    body = [repr(t) for t in tp.program.rule("sort_rule").body]
    assert body == ["set(status, true)", "cell(In2, V1)", "cell(In1, V2)",
                    "aux_ann_swap(In1, V1, In2, V2)", "set(status, false)"]
    comm = tp.program.rule("comm_cons_aux_ann_swap_4")
    assert comm.kind == "simplification" and tp.provenance[comm.name] == 3
    assert ("aux_ann_swap", 4) in tp.program.declarations
    assert "comm_cons_aux_ann_swap_4" in names(tp)[:4]  # generated rules come first


def test_no_annotations_only_adds_communication_rules():
    p = load("min").without_annotations()
    tp = transform(p)
    assert set(tp.provenance.values()) == {1}
    assert tp.program.rules[len(tp.provenance):] == p.rules


def test_compound_annotation_rule():
    tp = transform(load("path"))
    (name,) = [n for n, step in tp.provenance.items() if step == 2]
    r = tp.program.rule(name)
    assert name == "compound_edge_path" and r.kind == "propagation"
    assert repr(r.body[0]) == "aux_ann_link(X, Y, Z)"
    assert "comm_cons_aux_ann_link_3" in tp.provenance
    simp = transform(load("path"), simplify_compound=True).program.rule(name)
    assert simp.kind == "simplification"


def test_repeated_compound_names_get_suffixes():
    p = parse_program(""":- chr_constraint a/1, b/1.
        g one a(X), b(Y) ==> line(1, valueOf(X), 0, valueOf(Y), 0, red).
        g two a(X), b(Y) ==> line(2, valueOf(Y), 0, valueOf(X), 0, red).""")
    tp = transform(p)
    assert [n for n, s in tp.provenance.items() if s == 2] == ["compound_a_b", "compound_a_b_2"]


def test_already_transformed_input_is_rejected():
    tp = transform(load("sort_cells"))
    with pytest.raises(TransformError, match="already transformed.*comm_cons_cell_2"):
        transform(tp.program)


def test_condition_must_only_use_auxiliary_arguments():
    p = parse_program(""":- chr_constraint c/1.
        r @ c(X) <=> X > 0 | c(0).
        g r ==> X > 1 | aux_ann_big(0).""")
    with pytest.raises(TransformError, match="X"):
        transform(p)


def test_output_is_parseable():
    for path in CORPUS.glob("*.chr"):
        tp = transform(parse_program(path.read_text()))
        assert parse_program(pretty_print(tp.program)) == tp.program


def test_communication_rules_do_not_change_the_store():
    for step1 in (r for r in transform(load("sort_cells")).program.rules if r.name.startswith("comm_cons_")):
        assert isinstance(step1, ChrRule) and step1.kind == "propagation"
        assert all(t.functor == "communicate_constraint" for t in step1.body)


def test_communicated_events():
    s, _ = run_query(transform(load("sort_swap")).program, q(SORT_QUERY))
    sent = [repr(t) for t in s.events]
    assert sent[:2] == ["cell(0, 7)", "cell(1, 6)"]  # query constraints
    assert sum(t.startswith("aux_ann_swap") for t in sent) == 3  # one per swap
    assert sum(t.startswith("cell") for t in sent) == 3  # body cells are silent


@pytest.mark.parametrize("store,expected", [
    ([mk("min", 1), mk("status", "false")], [mk("min", 1)]),
    ([mk("cell", 2, 7), mk("aux_ann_swap", 0, 7, 1, 6)], [mk("cell", 2, 7)]),
    ([], []),
])
def test_strip_aux(store, expected):
    assert strip_aux(store) == expected


def test_generated_residue():
    assert is_generated_residue(Atom("comm_cons_x"))
    assert not is_generated_residue(mk("cell", 1, 2))
