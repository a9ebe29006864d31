import pytest
from hypothesis import given, settings, strategies as st

from chrvis import graphics as gx
from chrvis.syntax import (ConstraintAnnotationRule, ParseError, RuleAnnotationRule, fmt,
                           parse_program, parse_query, parse_term, pretty_print, tokenize)
from chrvis.terms import Atom, Compound, Int, Var, mk

from conftest import CORPUS, load

MIN_SRC = """
:- chr_constraint min/1.
remove_dup @ min(X) \\ min(X) <=> true.
remove_min @ min(X) \\ min(Y) <=> X < Y | true.
"""


def test_min_program_structure():
    p = parse_program(MIN_SRC)
    assert p.declarations == [("min", 1)]
    assert [r.name for r in p.rules] == ["remove_dup", "remove_min"]
    r = p.rule("remove_min")
    assert r.kind == "simpagation"
    assert r.guard == (mk("<", Var("X", 1), Var("Y", 2)),)
    assert r.body == (Atom("true"),)


def test_occurrences_number_removed_heads_first():
    p = parse_program(MIN_SRC)
    occ = [(o.rule, o.kept) for o in p.occurrences[("min", 1)]]
    assert occ == [("remove_dup", False), ("remove_dup", True),
                   ("remove_min", False), ("remove_min", True)]
    assert p.max_occurrence(("min", 1)) == 4
    assert p.occurrence(("min", 1), 5) is None


@pytest.mark.parametrize("src,kind", [
    (":- chr_constraint a/1.\nr @ a(X) ==> true.", "propagation"),
    (":- chr_constraint a/1.\nr @ a(X) <=> true.", "simplification"),
    (":- chr_constraint a/1.\nr @ a(X) \\ a(Y) <=> true.", "simpagation"),
])
def test_rule_kinds(src, kind):
    assert parse_program(src).rules[0].kind == kind


def test_unnamed_rules_get_names():
    p = parse_program(":- chr_constraint a/1.\na(X) ==> true.\na(1) <=> true.")
    assert [r.name for r in p.rules] == ["rule_1", "rule_2"]


def test_operator_precedence():
    assert parse_term("X is 1 + 2 * 3") == mk("is", Var("X", 1), mk("+", 1, mk("*", 2, 3)))
    assert parse_term("1 - 2 - 3") == mk("-", mk("-", 1, 2), 3)
    assert parse_term("-3") == Int(-3)


def test_query_variables_are_shared():
    a, b = parse_query("leq(A,B), leq(B,A).")
    assert a.args[0] == b.args[1] and a.args[1] == b.args[0]


def test_anonymous_variables_are_distinct():
    t = parse_term("f(_, _)")
    assert t.args[0] != t.args[1]


def test_comm_head_rule_becomes_flag():
    p = load("sort_cells")
    assert p.comm_head is True
    assert all(r.name != "rule_1" for r in p.rules)
    assert load("sort_swap").comm_head is False


def test_constraint_annotation_template():
    ann = load("sort_cells").constraint_annotations[0]
    assert isinstance(ann, ConstraintAnnotationRule) and ann.name == "ann_rule_cell"
    t = ann.output
    assert t.kind == "node" and len(t.params) == 11
    assert isinstance(t.params[0], gx.ValueOf)
    assert isinstance(t.params[1], gx.PrologValue)
    assert t.params[-1] == gx.Const(Atom("RECT"))


def test_rule_annotation_links_rule_variables():
    p = load("sort_swap")
    (ra,) = p.rule_annotations
    assert isinstance(ra, RuleAnnotationRule) and ra.target_rule == "sort_rule"
    rule_vars = {v.name: v for h in p.rule("sort_rule").heads for v in h.args}
    assert list(ra.aux_constraint.args) == [rule_vars[n] for n in ("In1", "V1", "In2", "V2")]
    assert p.aux_symbols == [("aux_ann_swap", 4)]


def test_prefixed_value_of():
    p = load("sort_swap")
    first = p.constraint_annotations[0].output.params[0]
    assert isinstance(first, gx.ValueOf) and first.prefix == "node"


@pytest.mark.parametrize("src,msg", [
    ("a(X) <=> true.", "no constraint declarations"),
    (":- chr_constraint a/1.\nr @ b(X) <=> true.", "undeclared constraint b/1"),
    (":- chr_constraint a/1.\nr @ a(X) <=> b(X).", "undeclared constraint b/1"),
    (":- chr_constraint a/1.\nr @ a(X) <=> true.\nr @ a(X) <=> true.", "duplicate rule name r"),
    (":- chr_constraint a/1.\nr @ a(X) <=> true.\ng nope ==> aux_ann_x(1).", "unknown rule nope"),
    (":- chr_constraint a/1.\nr @ a(X) <=> true.\ng r ==> swap(X).", "aux_ann_"),
    (":- chr_constraint a/1.\nr @ a(X) <=> true", "expected"),
    (":- chr_constraint a/1.\nr @ a(X) <=> 1 < 2 < 3.", "priority clash"),
    (":- chr_constraint a/1.\ng a(X) ==> blob(X).", "unknown visual object or action"),
    (":- chr_constraint a/1.\ng a(X) ==> circle(X).", "expects 6 parameters"),
])
def test_parse_errors(src, msg):
    with pytest.raises(ParseError, match=msg):
        parse_program(src)


def test_parse_error_has_position():
    with pytest.raises(ParseError) as e:
        parse_program(":- chr_constraint a/1.\nr @ a(X) <=> $.")
    assert e.value.line == 2


def test_tokenize_positions():
    toks = tokenize("a(X)\n  <=> b")
    assert [(t.text, t.line, t.col) for t in toks[:-1]] == [
        ("a", 1, 1), ("(", 1, 2), ("X", 1, 3), (")", 1, 4), ("<=>", 2, 3), ("b", 2, 7)]


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.chr")), ids=lambda p: p.stem)
def test_corpus_round_trip(path):
    p = parse_program(path.read_text())
    text = pretty_print(p)
    assert parse_program(text) == p
    assert pretty_print(parse_program(text)) == text


@pytest.mark.parametrize("text", ["f(X, -3)", "X * (-12)", "(A - B) * 2", "a \\== b", "'Hello world'"])
def test_fmt_round_trip(text):
    t = parse_term(text)
    assert parse_term(fmt(t)) == t


_pieces = st.sampled_from([
    ":- chr_constraint a/1, b/2.", "r @", "a(X)", "b(X, Y)", "\\", "<=>", "==>", "|", ",", ".",
    "true", "X < Y", "X is Y + 1", "g", "circle(X, 1, 2, 3, red, blue)", "(", ")", "valueOf(X)",
    "%c\n", "@", "1", "-", "'q'", "aux_ann_z(X)",
])


@settings(max_examples=300, deadline=None)
@given(st.lists(_pieces, max_size=14))
def test_parser_is_total(pieces):
    """Any input either parses or raises ParseError, never anything else."""
    try:
        parse_program(" ".join(pieces))
    except ParseError:
        pass


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=40))
def test_parser_is_total_on_noise(src):
    try:
        parse_program(src)
    except ParseError:
        pass
