"""Judgments, coupling witnesses and derivations."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..expectations import DoubledAmbient, Expectation
from ..lang.ast import Program
from ..linalg import TOL, SeparableEnsemble, opnorm, proj, psd_decompose


class RuleError(ValueError):
    """A rule's side condition or premise shape does not hold."""


@dataclass(frozen=True, eq=False)
class Judgment:
    """``{pre} left ~ right {post}``."""

    pre: Expectation
    left: Program
    right: Program
    post: Expectation

    @property
    def da(self) -> DoubledAmbient:
        return DoubledAmbient.infer(self.pre.register)

    def __post_init__(self):
        if self.pre.register != self.post.register:
            raise ValueError("pre and post act on different registers")
        da = self.da
        amb = set(da.ambient.all_vars.names)
        for side, p in (("left", self.left), ("right", self.right)):
            extra = p.free_names() - amb
            if extra:
                raise ValueError(f"{side} program uses undeclared variables {sorted(extra)}")

    def __eq__(self, other):
        return (
            isinstance(other, Judgment)
            and self.left == other.left
            and self.right == other.right
            and self.pre.register == other.pre.register
            and np.array_equal(self.pre.matrix, other.pre.matrix)
            and np.array_equal(self.post.matrix, other.post.matrix)
        )

    __hash__ = None

    def close_to(self, other: Judgment, tol: float = TOL) -> bool:
        return (
            self.left == other.left
            and self.right == other.right
            and self.pre.close_to(other.pre, tol)
            and self.post.close_to(other.post, tol)
        )


class Witness:
    """Maps a product input ``α ⊗ β`` (unit-trace, ambient order) to a separable output.

    Subclasses implement :meth:`term`. A witness is only ever required on
    pure inputs; every witness in this package is also defined on mixed
    factors and agrees there with the linear extension.
    """

    def __init__(self, da: DoubledAmbient):
        self.da = da

    def empty(self) -> SeparableEnsemble:
        return SeparableEnsemble(self.da.left, self.da.right)

    def single(self, weight: float, alpha: np.ndarray, beta: np.ndarray) -> SeparableEnsemble:
        out = self.empty()
        out.add(weight, alpha, beta)
        return out

    def term(self, alpha: np.ndarray, beta: np.ndarray) -> SeparableEnsemble:
        raise NotImplementedError

    def pure(self, psi1: np.ndarray, psi2: np.ndarray) -> SeparableEnsemble:
        return self.term(proj(psi1), proj(psi2))

    def __call__(self, psi1: np.ndarray, psi2: np.ndarray) -> SeparableEnsemble:
        return self.pure(psi1, psi2)

    def extend(self, ens: SeparableEnsemble, decompose: bool = False) -> SeparableEnsemble:
        return witness_extend(self, ens, decompose)


class FunctionWitness(Witness):
    def __init__(self, da: DoubledAmbient, fn: Callable[[np.ndarray, np.ndarray], SeparableEnsemble]):
        super().__init__(da)
        self.fn = fn

    def term(self, alpha, beta):
        return self.fn(alpha, beta)


def witness_extend(w: Witness, ens: SeparableEnsemble, decompose: bool = False, tol: float = 1e-8) -> SeparableEnsemble:
    """Apply ``w`` to every product term of ``ens`` and reweight.

    With ``decompose`` each factor is first split into its eigenvectors and
    the witness is only ever evaluated on pure pairs; otherwise mixed factors
    are passed through directly.
    """
    out = w.empty()
    for p, a, b in ens.terms:
        if not decompose:
            out.extend(w.term(a, b), p)
            continue
        for la, va in psd_decompose(a, tol):
            for lb, vb in psd_decompose(b, tol):
                out.extend(w.pure(va, vb), p * la * lb)
    return out.compact()


@dataclass(frozen=True, eq=False)
class Derivation:
    rule: str
    params: dict
    premises: tuple
    conclusion: Judgment
    witness: Witness = field(repr=False)
    via: Derivation | None = field(default=None, repr=False)  # internal proof of a derived rule

    @property
    def pre(self) -> Expectation:
        return self.conclusion.pre

    @property
    def post(self) -> Expectation:
        return self.conclusion.post

    @property
    def left(self) -> Program:
        return self.conclusion.left

    @property
    def right(self) -> Program:
        return self.conclusion.right

    @property
    def da(self) -> DoubledAmbient:
        return self.conclusion.da

    def retag(self, rule: str, params: dict | None = None, premises: tuple | None = None) -> Derivation:
        return Derivation(
            rule,
            self.params if params is None else params,
            self.premises if premises is None else premises,
            self.conclusion,
            self.witness,
            via=self,
        )

    def with_witness(self, witness: Witness) -> Derivation:
        return replace(self, witness=witness)

    def walk(self):
        yield self
        for p in self.premises:
            yield from p.walk()

    def size(self) -> int:
        return sum(1 for _ in self.walk())

    def pretty(self, indent: int = 0) -> str:
        pad = "  " * indent
        lines = [f"{pad}{self.rule}"]
        lines.extend(p.pretty(indent + 1) for p in self.premises)
        return "\n".join(lines)


def expectation_distance(a: Expectation, b: Expectation) -> float:
    if a.register != b.register:
        return float("inf")
    return opnorm(a.matrix - b.matrix)
