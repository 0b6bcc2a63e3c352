from .ast import Ambient, Apply, If, Init, Program, Seq, Skip, While, depth, if_skip, seq
from .builtins import builtin_matrix, ket, proj_lt, proj_state, rot, shift
from .syntax import ParseError, parse, parse_file, pretty, pretty_file
from .typecheck import Diagnostic, typecheck

__all__ = [
    "Ambient", "Apply", "If", "Init", "Program", "Seq", "Skip", "While", "depth", "if_skip", "seq",
    "builtin_matrix", "ket", "proj_lt", "proj_state", "rot", "shift",
    "ParseError", "parse", "parse_file", "pretty", "pretty_file",
    "Diagnostic", "typecheck",
]
