"""CHR interpreter with refined and animation-extended semantics."""

from .equivalence import differential_check, seq_equiv, states_equivalent
from .refined import run_query
from .syntax import ParseError, Program, parse_program, parse_query, pretty_print
from .terms import Atom, BuiltinStore, Compound, Int, Var
from .transform import strip_aux, transform
from .vis import run_vis

__all__ = ["Atom", "BuiltinStore", "Compound", "Int", "ParseError", "Program", "Var",
           "differential_check", "parse_program", "parse_query", "pretty_print", "run_query",
           "run_vis", "seq_equiv", "states_equivalent", "strip_aux", "transform"]
