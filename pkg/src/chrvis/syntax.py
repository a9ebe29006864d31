"""Reading and writing CHR programs with visual annotation rules.

Grammar (one clause per ``.``)::

    :- chr_constraint min/1, cell/2.
    name @ Kept \\ Removed <=> Guard | Body.
    name @ Heads ==> Guard | Body.
    name @ Heads <=> Guard | Body.
    comm_head(T) ==> T = true.
    g name Head, ... ==> Cond | node(valueOf(X), ...).
    g name chr_rule_name ==> Cond | aux_ann_foo(...).

Rule names, guards and annotation names are optional.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import graphics as gx
from .terms import Atom, Compound, Int, Term, Var, symbol, term_vars

AUX_PREFIX = "aux_ann_"
BODY_BUILTINS = {("true", 0), ("fail", 0), ("=", 2), ("==", 2), ("\\==", 2),
                 ("<", 2), (">", 2), ("=<", 2), (">=", 2), ("is", 2),
                 ("set", 2), ("check", 2), ("communicate_constraint", 1)}


class ParseError(Exception):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        self.msg, self.line, self.col = msg, line, col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + msg)


def is_builtin(t: Term) -> bool:
    return isinstance(t, (Atom, Compound)) and symbol(t) in BODY_BUILTINS


def is_aux(t: Term) -> bool:
    return isinstance(t, (Atom, Compound)) and symbol(t)[0].startswith(AUX_PREFIX)


# --- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class ChrRule:
    name: str
    kept: tuple
    removed: tuple
    guard: tuple
    body: tuple

    @property
    def heads(self) -> tuple:
        return self.kept + self.removed

    @property
    def kind(self) -> str:
        if not self.removed:
            return "propagation"
        return "simplification" if not self.kept else "simpagation"


@dataclass(frozen=True)
class ConstraintAnnotationRule:
    name: str
    heads: tuple
    condition: tuple
    output: gx.VisualTemplate


@dataclass(frozen=True)
class RuleAnnotationRule:
    name: str
    target_rule: str
    condition: tuple
    aux_constraint: Term


@dataclass(frozen=True)
class Occurrence:
    rule_index: int
    rule: str
    kept: bool
    position: int  # index into ChrRule.kept or ChrRule.removed


@dataclass
class Program:
    declarations: list = field(default_factory=list)
    rules: list = field(default_factory=list)
    constraint_annotations: list = field(default_factory=list)
    rule_annotations: list = field(default_factory=list)
    comm_head: bool = False
    occurrences: dict = field(default_factory=dict)  # (name, arity) -> [Occurrence], index j-1

    def __post_init__(self):
        if not self.occurrences:
            self.occurrences = number_occurrences(self.rules)

    def __eq__(self, other):
        if not isinstance(other, Program):
            return NotImplemented
        return (self.declarations == other.declarations and self.rules == other.rules
                and self.constraint_annotations == other.constraint_annotations
                and self.rule_annotations == other.rule_annotations
                and self.comm_head == other.comm_head)

    def rule(self, name: str) -> ChrRule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def occurrence(self, sym: tuple[str, int], j: int) -> Occurrence | None:
        occ = self.occurrences.get(sym, [])
        return occ[j - 1] if 1 <= j <= len(occ) else None

    def max_occurrence(self, sym: tuple[str, int]) -> int:
        return len(self.occurrences.get(sym, []))

    def rule_annotations_for(self, rule: str) -> list:
        return [a for a in self.rule_annotations if a.target_rule == rule]

    @property
    def annotated_rules(self) -> set[str]:
        return {a.target_rule for a in self.rule_annotations}

    @property
    def aux_symbols(self) -> list:
        seen = []
        for a in self.rule_annotations:
            s = symbol(a.aux_constraint)
            if s not in seen:
                seen.append(s)
        return seen

    def without_annotations(self) -> "Program":
        """The plain CHR program (annotation rules dropped)."""
        return Program(list(self.declarations), list(self.rules), [], [], self.comm_head)


def number_occurrences(rules) -> dict:
    """Top-down occurrence numbering; removed heads precede kept heads in a rule."""
    table: dict = {}
    for i, r in enumerate(rules):
        for kept, heads in ((False, r.removed), (True, r.kept)):
            for pos, h in enumerate(heads):
                table.setdefault(symbol(h), []).append(Occurrence(i, r.name, kept, pos))
    return table


# --- lexer ---------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+|%[^\n]*|/\*.*?\*/)
  | (?P<int>\d+)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<atom>[a-z][A-Za-z0-9_]*)
  | (?P<qatom>'(?:[^'\\]|\\.)*')
  | (?P<punct>:-|<=>|==>|\\==|=<|>=|==|[=<>\\|@,.()+\-*/])
""", re.VERBOSE | re.DOTALL)


@dataclass(frozen=True)
class Token:
    kind: str  # int var atom punct eof
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    out, pos, line, lstart = [], 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - lstart + 1)
        kind, text = m.lastgroup, m.group()
        if kind != "ws":
            if kind == "qatom":
                kind, text = "atom", re.sub(r"\\(.)", r"\1", text[1:-1])
            out.append(Token(kind, text, line, pos - lstart + 1))
        nl = m.group().count("\n")
        if nl:
            line += nl
            lstart = pos + m.group().rfind("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - lstart + 1))
    return out


# --- parser ----------------------------------------------------------------------

_INFIX = {  # op: (precedence, left-arg max, right-arg max)
    "=": (700, 699, 699), "==": (700, 699, 699), "\\==": (700, 699, 699),
    "<": (700, 699, 699), ">": (700, 699, 699), "=<": (700, 699, 699),
    ">=": (700, 699, 699), "is": (700, 699, 699),
    "+": (500, 500, 499), "-": (500, 500, 499),
    "*": (400, 400, 399), "/": (400, 400, 399),
}


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0
        self.vars: dict[str, Var] = {}

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("punct", "atom") and self.tok.text == text

    def take(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not (self.tok.kind == "punct" and self.tok.text == text):
            self.fail(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.take()

    def fail(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def fresh_scope(self):
        self.vars = {}

    def var(self, name: str) -> Var:
        if name == "_":
            return Var("_", len(self.vars) + 10_000 + self.i)
        if name not in self.vars:
            self.vars[name] = Var(name, len(self.vars) + 1)
        return self.vars[name]

    # terms
    def term(self, maxprec: int = 999) -> Term:
        left = self.primary()
        while True:
            t = self.tok
            op = t.text if t.kind in ("punct", "atom") else None
            if op not in _INFIX:
                return left
            prec, _, rmax = _INFIX[op]
            if prec > maxprec:
                return left
            self.take()
            right = self.term(rmax)
            left = Compound(op, (left, right))
            if prec == 700 and self.tok.kind in ("punct", "atom") and \
                    _INFIX.get(self.tok.text, (0,))[0] == 700:  # xfx does not chain
                self.fail(f"operator priority clash at {self.tok.text!r}")

    def primary(self) -> Term:
        t = self.tok
        if t.kind == "int":
            self.take()
            return Int(int(t.text))
        if t.kind == "var":
            self.take()
            return self.var(t.text)
        if t.kind == "punct" and t.text == "-":
            self.take()
            if self.tok.kind == "int":
                return Int(-int(self.take().text))
            return Compound("-", (self.term(200),))
        if t.kind == "punct" and t.text == "(":
            self.take()
            inner = self.term(1200)
            self.expect(")")
            return inner
        if t.kind == "atom":
            self.take()
            if self.tok.kind == "punct" and self.tok.text == "(":
                self.take()
                args = [self.term(999)]
                while self.at(","):
                    self.take()
                    args.append(self.term(999))
                self.expect(")")
                return Compound(t.text, tuple(args))
            return Atom(t.text)
        self.fail(f"unexpected {t.text or 'end of input'!r}")

    def term_list(self) -> list[Term]:
        items = [self.term()]
        while self.at(","):
            self.take()
            items.append(self.term())
        return items

    # clauses
    def declaration(self, decls: list):
        self.expect(":-")
        if not (self.tok.kind == "atom" and self.tok.text == "chr_constraint"):
            self.fail("expected chr_constraint declaration")
        self.take()
        while True:
            t = self.term()
            if not (isinstance(t, Compound) and t.functor == "/" and isinstance(t.args[0], Atom)
                    and isinstance(t.args[1], Int)):
                self.fail("expected name/arity in declaration")
            sym = (t.args[0].name, t.args[1].value)
            if sym in decls:
                self.fail(f"duplicate declaration {sym[0]}/{sym[1]}")
            decls.append(sym)
            if not self.at(","):
                break
            self.take()
        self.expect(".")

    def chr_rule(self) -> tuple[ChrRule, Token]:
        start = self.tok
        name = ""
        if self.tok.kind == "atom" and self.peek().text == "@":
            name = self.take().text
            self.take()
        first = self.term_list()
        second: list = []
        if self.at("\\"):
            self.take()
            second = self.term_list()
        if self.at("<=>"):
            self.take()
            kept, removed = (first, second) if second else ([], first)
        elif self.at("==>"):
            if second:
                self.fail("propagation rules cannot have removed heads")
            self.take()
            kept, removed = first, []
        else:
            self.fail(f"expected '<=>' or '==>', found {self.tok.text!r}")
        guard, body = self.guard_body()
        self.expect(".")
        return ChrRule(name, tuple(kept), tuple(removed), tuple(guard), tuple(body)), start

    def guard_body(self):
        items = self.term_list()
        if self.at("|"):
            self.take()
            return items, self.term_list()
        return [], items

    def annotation(self):
        start = self.take()  # the `g`
        name = ""
        nxt = self.peek()
        if self.tok.kind == "atom" and not (nxt.kind == "punct" and nxt.text in ("(", ",", "==>")):
            name = self.take().text
        heads = self.term_list()
        self.expect("==>")
        items = self.term_list()
        cond: list = []
        if self.at("|"):
            self.take()
            cond, items = items, self.term_list()
        if len(items) != 1:
            self.fail("annotation rule output must be a single term")
        self.expect(".")
        return name, heads, cond, items[0], start


def _template(out: Term, heads, tok: Token) -> gx.VisualTemplate:
    if not isinstance(out, Compound) or not gx.is_visual_kind(out.functor):
        raise ParseError(f"unknown visual object or action {out!r}", tok.line, tok.col)
    head_vars = {v.uid for h in heads for v in term_vars(h)}
    params = tuple(_param(a, head_vars, tok) for a in out.args)
    try:
        return gx.VisualTemplate(out.functor, params)
    except gx.GraphicsError as e:
        raise ParseError(str(e), tok.line, tok.col) from None


_VALUEOF = re.compile(r"^([a-z][A-Za-z0-9_]*?)?valueOf$")


def _strip_valueof(t: Term, head_vars, tok) -> tuple[Term, bool]:
    """Replace valueOf(V) by V inside an expression; report whether any was seen."""
    if isinstance(t, Compound):
        if t.functor == "valueOf" and len(t.args) == 1:
            v = t.args[0]
            if not isinstance(v, Var) or v.uid not in head_vars:
                raise ParseError(f"valueOf must name a head argument, got {v!r}", tok.line, tok.col)
            return v, True
        parts = [_strip_valueof(a, head_vars, tok) for a in t.args]
        return Compound(t.functor, tuple(p for p, _ in parts)), any(s for _, s in parts)
    if isinstance(t, Var):
        if t.uid not in head_vars:
            raise ParseError(f"variable {t.name} is not a head argument", tok.line, tok.col)
        return t, True
    return t, False


def _param(a: Term, head_vars, tok) -> gx.ParamExpr:
    if isinstance(a, Atom) and a.name == "random":
        return gx.Random()
    if isinstance(a, Var):
        # bare upper-case words that are not head arguments are symbols (RECT, CIRC)
        return gx.ValueOf(a) if a.uid in head_vars else gx.Const(Atom(a.name))
    if isinstance(a, Compound):
        m = _VALUEOF.match(a.functor)
        if m and len(a.args) == 1:
            v = a.args[0]
            if not isinstance(v, Var) or v.uid not in head_vars:
                raise ParseError(f"{a.functor} must name a head argument", tok.line, tok.col)
            return gx.ValueOf(v, m.group(1) or "")
        if a.functor == "prologValue" and len(a.args) == 1:
            return gx.PrologValue(_strip_valueof(a.args[0], head_vars, tok)[0], wrapped=True)
        if a.functor in ("+", "-", "*", "/"):
            return gx.PrologValue(_strip_valueof(a, head_vars, tok)[0])
    return gx.Const(a)


def _comm_head_flag(r: ChrRule) -> bool | None:
    """True/False for a `comm_head(T) ==> T = true|false.` rule, else None."""
    if r.name or r.removed or r.guard or len(r.kept) != 1 or len(r.body) != 1:
        return None
    h, b = r.kept[0], r.body[0]
    if not (isinstance(h, Compound) and h.functor == "comm_head" and len(h.args) == 1
            and isinstance(h.args[0], Var)):
        return None
    if (isinstance(b, Compound) and b.functor == "=" and b.args[0] == h.args[0]
            and b.args[1] in (Atom("true"), Atom("false"))):
        return b.args[1] == Atom("true")
    return None


def parse_program(src: str) -> Program:
    p = _Parser(src)
    decls: list = []
    rules: list = []
    rule_toks: list = []
    raw_anns: list = []
    comm_head = False
    while p.tok.kind != "eof":
        p.fresh_scope()
        if p.at(":-"):
            p.declaration(decls)
        elif (p.tok.kind == "atom" and p.tok.text == "g"
              and not (p.peek().kind == "punct" and p.peek().text in ("(", "@", ",", "\\", "<=>", "==>"))):
            raw_anns.append(p.annotation() + (dict(p.vars),))
        else:
            r, tok = p.chr_rule()
            flag = _comm_head_flag(r)
            if flag is not None:
                comm_head = flag
            else:
                rules.append(r)
                rule_toks.append(tok)
    if not decls:
        raise ParseError("no constraint declarations", 1, 1)
    return _assemble(decls, rules, rule_toks, raw_anns, comm_head)


def _assemble(decls, rules, rule_toks, raw_anns, comm_head) -> Program:
    named = []
    for k, r in enumerate(rules, 1):
        named.append(r if r.name else ChrRule(f"rule_{k}", r.kept, r.removed, r.guard, r.body))
    seen: set = set()
    for r, tok in zip(named, rule_toks):
        if r.name in seen:
            raise ParseError(f"duplicate rule name {r.name}", tok.line, tok.col)
        seen.add(r.name)
    rules_by_name = {r.name: r for r in named}

    declared = set(decls)
    aux_syms = set()
    c_anns, r_anns = [], []
    ann_names: set = set()
    for k, (name, heads, cond, out, tok, scope) in enumerate(raw_anns, 1):
        name = name or f"ann_{k}"
        if name in ann_names:
            raise ParseError(f"duplicate annotation rule name {name}", tok.line, tok.col)
        ann_names.add(name)
        if len(heads) == 1 and isinstance(heads[0], Atom):
            target = heads[0].name
            if target not in rules_by_name:
                raise ParseError(f"rule annotation targets unknown rule {target}", tok.line, tok.col)
            if not isinstance(out, (Atom, Compound)) or not symbol(out)[0].startswith(AUX_PREFIX):
                raise ParseError(f"auxiliary constraint must be named {AUX_PREFIX}*: {out!r}",
                                 tok.line, tok.col)
            link = _rule_var_map(rules_by_name[target], scope)
            cond = tuple(_relink(c, link) for c in cond)
            out = _relink(out, link)
            aux_syms.add(symbol(out))
            r_anns.append(RuleAnnotationRule(name, target, cond, out))
        else:
            c_anns.append((name, heads, cond, out, tok))

    known = declared | aux_syms
    for r, tok in zip(named, rule_toks):
        for h in r.heads:
            if not isinstance(h, (Atom, Compound)) or symbol(h) not in declared:
                raise ParseError(f"undeclared constraint {_sym_text(h)} in head of {r.name}",
                                 tok.line, tok.col)
        for b in r.body:
            if not isinstance(b, (Atom, Compound)):
                raise ParseError(f"body goal {b!r} is not callable", tok.line, tok.col)
            if not is_builtin(b) and symbol(b) not in known:
                raise ParseError(f"undeclared constraint {_sym_text(b)} in body of {r.name}",
                                 tok.line, tok.col)
    built = []
    for name, heads, cond, out, tok in c_anns:
        for h in heads:
            if not isinstance(h, Compound) or symbol(h) not in known:
                raise ParseError(f"undeclared constraint {_sym_text(h)} in annotation {name}",
                                 tok.line, tok.col)
        built.append(ConstraintAnnotationRule(name, tuple(heads), tuple(cond),
                                              _template(out, heads, tok)))
    return Program(list(decls), named, built, r_anns, comm_head)


def _sym_text(t: Term) -> str:
    try:
        n, a = symbol(t)
        return f"{n}/{a}"
    except Exception:
        return repr(t)


def _rule_var_map(rule: ChrRule, scope: dict) -> dict:
    """Map the annotation's variables onto the same-named variables of rule."""
    rv = {}
    for t in rule.heads + rule.guard + rule.body:
        for v in term_vars(t):
            rv.setdefault(v.name, v)
    link = {}
    for name, v in scope.items():
        link[v.uid] = rv.get(name, Var(name, 1_000_000 + v.uid))
    return link


def _relink(t: Term, link: dict) -> Term:
    if isinstance(t, Var):
        return link.get(t.uid, t)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_relink(a, link) for a in t.args))
    return t


def parse_query(src: str) -> list[Term]:
    p = _Parser(src)
    if p.tok.kind == "eof":
        return []
    items = p.term_list()
    if p.at("."):
        p.take()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.tok.text!r} after query")
    return items


def parse_term(src: str) -> Term:
    items = parse_query(src)
    if len(items) != 1:
        raise ParseError("expected exactly one term")
    return items[0]


# --- printer -------------------------------------------------------------------------

_PLAIN_ATOM = re.compile(r"^[a-z][A-Za-z0-9_]*$")


def fmt_atom(name: str) -> str:
    if _PLAIN_ATOM.match(name):
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def fmt(t: Term, maxprec: int = 999) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Int):
        return str(t.value)
    if isinstance(t, Atom):
        return fmt_atom(t.name)
    if t.functor in _INFIX and len(t.args) == 2:
        prec, lmax, rmax = _INFIX[t.functor]
        sep = " " if prec == 700 else ""
        right = fmt(t.args[1], rmax)
        if right.startswith("-") and not sep:
            right = f"({right})"
        s = f"{fmt(t.args[0], lmax)}{sep}{t.functor}{sep}{right}"
        return f"({s})" if prec > maxprec else s
    if t.functor == "-" and len(t.args) == 1:
        s = "-" + fmt(t.args[0], 200)
        return f"({s})" if 200 > maxprec else s
    return f"{fmt_atom(t.functor)}({', '.join(fmt(a) for a in t.args)})"


def fmt_list(ts) -> str:
    return ", ".join(fmt(t) for t in ts)


def fmt_rule(r: ChrRule) -> str:
    if r.kind == "propagation":
        head = f"{fmt_list(r.kept)} ==>"
    elif r.kind == "simplification":
        head = f"{fmt_list(r.removed)} <=>"
    else:
        head = f"{fmt_list(r.kept)} \\ {fmt_list(r.removed)} <=>"
    guard = f" {fmt_list(r.guard)} |" if r.guard else ""
    return f"{r.name} @ {head}{guard} {fmt_list(r.body)}."


def _unstrip(t: Term) -> Term:
    if isinstance(t, Var):
        return Compound("valueOf", (t,))
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_unstrip(a) for a in t.args))
    return t


def fmt_param(p: gx.ParamExpr) -> str:
    if isinstance(p, gx.Random):
        return "random"
    if isinstance(p, gx.ValueOf):
        return f"{p.prefix}valueOf({p.var.name})"
    if isinstance(p, gx.PrologValue):
        inner = fmt(_unstrip(p.expr))
        return f"prologValue({inner})" if p.wrapped else inner
    v = p.value
    if isinstance(v, Atom) and re.match(r"^[A-Z][A-Za-z0-9_]*$", v.name):
        return v.name
    return fmt(v)


def fmt_annotation(a) -> str:
    if isinstance(a, RuleAnnotationRule):
        lhs = a.target_rule
        out = fmt(a.aux_constraint)
    else:
        lhs = fmt_list(a.heads)
        out = f"{a.output.kind}({', '.join(fmt_param(p) for p in a.output.params)})"
    cond = f" {fmt_list(a.condition)} |" if a.condition else ""
    return f"g {a.name} {lhs} ==>{cond} {out}."


def pretty_print(p: Program) -> str:
    lines = [":- chr_constraint " + ", ".join(f"{fmt_atom(n)}/{k}" for n, k in p.declarations) + "."]
    lines.append("")
    if ("comm_head", 1) in p.declarations or p.comm_head:
        lines.append(f"comm_head(T) ==> T = {'true' if p.comm_head else 'false'}.")
    lines.extend(fmt_rule(r) for r in p.rules)
    if p.constraint_annotations or p.rule_annotations:
        lines.append("")
        lines.extend(fmt_annotation(a) for a in p.constraint_annotations)
        lines.extend(fmt_annotation(a) for a in p.rule_annotations)
    return "\n".join(lines) + "\n"
