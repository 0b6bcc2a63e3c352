from .fileformat import parse_derivation, parse_judgment
from .core import Derivation, FunctionWitness, Judgment, RuleError, Witness, witness_extend
from .rules import (
    mirror,
    rule_apply1,
    rule_apply2,
    rule_conseq,
    rule_exfalso,
    rule_if1,
    rule_if2,
    rule_init1,
    rule_init2,
    rule_jointif,
    rule_jointif4,
    rule_jointwhile,
    rule_seq,
    rule_skip,
    rule_sym,
    rule_while1,
    rule_while2,
)

__all__ = [
    "Derivation", "FunctionWitness", "Judgment", "RuleError", "Witness", "witness_extend",
    "mirror", "rule_apply1", "rule_apply2", "rule_conseq", "rule_exfalso", "rule_if1", "rule_if2",
    "rule_init1", "rule_init2", "rule_jointif", "rule_jointif4", "rule_jointwhile", "rule_seq",
    "rule_skip", "rule_sym", "rule_while1", "rule_while2",
    "parse_derivation", "parse_judgment",
]
