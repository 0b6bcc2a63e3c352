"""Expectation-based quantum relational Hoare logic.

A small quantum while-language with density-operator semantics, an algebra of
expectations over doubled registers, proof rules whose derivations carry
executable coupling witnesses, and numerical tools for checking witnesses and
refuting judgments.
"""

from .expectations import DoubledAmbient, Expectation
from .lang import Ambient, ParseError, Program, parse, parse_file, pretty, typecheck
from .linalg import BinaryMeasurement, LabeledOperator, PureState, Register, SeparableEnsemble, Variable
from .proofs import Derivation, Judgment, RuleError, parse_derivation, parse_judgment
from .semantics import NonConvergenceError, Policy, denote, dual_denote, is_terminating
from .validator import check_witness, dual_upper_bound, falsify

__version__ = "0.1.0"

__all__ = [
    "DoubledAmbient", "Expectation",
    "Ambient", "ParseError", "Program", "parse", "parse_file", "pretty", "typecheck",
    "BinaryMeasurement", "LabeledOperator", "PureState", "Register", "SeparableEnsemble", "Variable",
    "Derivation", "Judgment", "RuleError", "parse_derivation", "parse_judgment",
    "NonConvergenceError", "Policy", "denote", "dual_denote", "is_terminating",
    "check_witness", "dual_upper_bound", "falsify",
]
