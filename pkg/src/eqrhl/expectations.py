"""Expectations over the doubled register ``X1 X2``.

Each ambient variable ``x`` has two copies, ``x1`` (left program) and ``x2``
(right program). An expectation is a PSD :class:`LabeledOperator` over the
union of both copies.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .lang.ast import Ambient, Program
from .linalg import (
    TOL,
    BinaryMeasurement,
    LabeledOperator,
    PureState,
    Register,
    Variable,
    equality_projector,
    lift,
    opnorm,
    partial_trace,
)

Expectation = LabeledOperator


def side_name(name: str, side: int) -> str:
    if side not in (1, 2):
        raise ValueError(f"side must be 1 or 2, got {side}")
    return f"{name}{side}"


@dataclass(frozen=True)
class DoubledAmbient:
    ambient: Ambient

    @classmethod
    def infer(cls, register: Register) -> DoubledAmbient:
        """Recover the ambient register from a doubled one (``x1 x2 y1 y2 ...``)."""
        return _infer(register.canonical())

    @classmethod
    def _infer(cls, register: Register) -> DoubledAmbient:
        base: dict[str, int] = {}
        for v in register:
            if v.name[-1:] not in ("1", "2") or len(v.name) < 2:
                raise ValueError(f"{v.name!r} is not a doubled variable (expected a 1/2 suffix)")
            b = v.name[:-1]
            if base.setdefault(b, v.dim) != v.dim:
                raise ValueError(f"copies of {b!r} have different dimensions")
        da = cls(Ambient(Register(tuple(Variable(b, d) for b, d in base.items()))))
        if da.full != register.canonical():
            raise ValueError(f"register {register.names} does not hold both copies of every variable")
        return da

    @cached_property
    def left(self) -> Register:
        """``Xall1`` in ambient factor order."""
        return self.side(self.ambient.all_vars, 1)

    @cached_property
    def right(self) -> Register:
        return self.side(self.ambient.all_vars, 2)

    @cached_property
    def blocked(self) -> Register:
        """Left copy followed by right copy: the layout of ensemble matrices."""
        return self.left + self.right

    @cached_property
    def full(self) -> Register:
        return self.blocked.canonical()

    @property
    def dim(self) -> int:
        return self.full.dim

    @staticmethod
    def side(reg: Register, side: int) -> Register:
        return reg.rename({n: side_name(n, side) for n in reg.names})

    def side_of(self, names, side: int) -> Register:
        """The side copy of the named ambient variables (names given without suffix)."""
        if isinstance(names, Register):
            names = names.names
        return self.side(self.ambient.register(*names), side)

    def swap_map(self) -> dict[str, str]:
        m = {}
        for n in self.ambient.all_vars.names:
            m[side_name(n, 1)] = side_name(n, 2)
            m[side_name(n, 2)] = side_name(n, 1)
        return m

    def lift_side(self, u, on: Register, side: int) -> LabeledOperator:
        """``u ▷ X_side`` as an operator on the whole doubled register."""
        return lift(u, self.side(on, side), self.full)

    def operator(self, matrix: np.ndarray, order: Register | None = None) -> LabeledOperator:
        """Wrap a plain matrix given in ``order`` (default: blocked layout)."""
        return LabeledOperator(order or self.blocked, matrix)

    def blocked_matrix(self, a: LabeledOperator) -> np.ndarray:
        return a.matrix_in(self.blocked)

    def identity(self) -> Expectation:
        return LabeledOperator.identity(self.full)

    def zero(self) -> Expectation:
        return LabeledOperator.zero(self.full)

    def scalar(self, k: float) -> Expectation:
        return k * self.identity()

    def extend(self, a: LabeledOperator) -> Expectation:
        """Tensor with the identity on all doubled variables ``a`` does not mention."""
        if a.register == self.full:
            return a
        return a.extend(self.full)

    def on(self, matrix, names: Register | tuple[str, ...]) -> Expectation:
        """A matrix on doubled variables (e.g. ``("y1", "y2")``) extended by identity."""
        reg = names if isinstance(names, Register) else self.full.select(names)
        return self.extend(LabeledOperator(reg, matrix))

    def eq(self, names) -> Expectation:
        """Quantum equality ``≡`` between the left and right copies of ``names``."""
        if isinstance(names, str):
            names = (names,)
        return self.extend(equality_projector(self.side_of(names, 1), self.side_of(names, 2)))

    def swap(self, a: LabeledOperator) -> LabeledOperator:
        """``SWAP† a SWAP``: exchanges the roles of the two copies."""
        return a.rename(self.swap_map())

    def side_program_register(self, side: int) -> Register:
        return self.left if side == 1 else self.right

    def check(self, a: LabeledOperator, what: str = "expectation", tol: float = TOL):
        if a.register != self.full:
            raise ValueError(f"{what} must act on {self.full.names}, got {a.register.names}")
        scale = max(1.0, a.norm())
        if not a.is_psd(tol * scale):
            raise ValueError(f"{what} is not positive semidefinite")


@lru_cache(maxsize=256)
def _infer(register: Register) -> DoubledAmbient:
    return DoubledAmbient._infer(register)


def _check_side(side: int):
    if side not in (1, 2):
        raise ValueError(f"side must be 1 or 2, got {side}")


def restrict_star(m: BinaryMeasurement, side: int, t: bool, a: Expectation, da: DoubledAmbient) -> Expectation:
    """``E*_t(a) = (M_t ▷ X_side)† a (M_t ▷ X_side)``."""
    _check_side(side)
    k = da.lift_side(m.kraus(t), m.register, side)
    return a.conj_by(k.adjoint())


def restrict_star2(
    m: BinaryMeasurement, n: BinaryMeasurement, t: bool, u: bool, a: Expectation, da: DoubledAmbient
) -> Expectation:
    """``E*_{t,u}(a)``: ``M_t`` on the left copy, ``N_u`` on the right copy."""
    k = da.lift_side(m.kraus(t), m.register, 1) @ da.lift_side(n.kraus(u), n.register, 2)
    return a.conj_by(k.adjoint())


def conj_by(b, a: Expectation, da: DoubledAmbient | None = None) -> Expectation:
    """``b a b†``.

    ``b`` is a :class:`LabeledOperator` on any sub-register of ``a`` (lifted
    by the identity), or a :class:`PureState` read as the column map ``ψ``; in
    that case the result is ``I_Z ⊗ (ψ† ⊗ I) a (ψ ⊗ I)`` on the state's
    register ``Z``.
    """
    if isinstance(b, PureState):
        return contract(b, a).extend(a.register)
    if not b.register.issubset(a.register):
        raise ValueError(f"conj_by: {b.register.names} is not contained in {a.register.names}")
    full = lift(b.matrix, b.register, a.register)
    return a.conj_by(full)


def contract(psi: PureState, a: LabeledOperator) -> LabeledOperator:
    """``(ψ† ⊗ I) a (ψ ⊗ I)``, an operator on the remaining variables."""
    z = psi.register
    if not z.issubset(a.register):
        raise ValueError(f"contract: {z.names} is not contained in {a.register.names}")
    rest = a.register.minus(z)
    t = a.matrix_in(z + rest).reshape(z.dim, rest.dim, z.dim, rest.dim)
    v = psi.vector_in(z)
    out = np.einsum("i,iajb,j->ab", v.conj(), t, v)
    return LabeledOperator(rest, out)


def init_star(on: Register, psi, side: int, a: Expectation, da: DoubledAmbient) -> Expectation:
    """Precondition of initialising ``on`` (side copy) to ``psi``."""
    state = PureState(da.side(on, side), np.asarray(psi).reshape(-1))
    return conj_by(state, a)


def fv_subset_defect(a: LabeledOperator, y: Register) -> float:
    if not y.issubset(a.register):
        raise ValueError(f"{y.names} is not contained in {a.register.names}")
    z = a.register.minus(y)
    if len(z) == 0:
        return 0.0
    reduced = partial_trace(a, z) / z.dim
    return opnorm(a.matrix - reduced.extend(a.register).matrix)


def fv_subset(a: LabeledOperator, y: Register, tol: float = TOL) -> bool:
    """Whether ``a = a' ⊗ I`` for some ``a'`` on ``y``."""
    return fv_subset_defect(a, y) <= tol * max(1.0, a.norm())


def side_dual(c: Program, side: int, a: Expectation, da: DoubledAmbient, policy=None) -> Expectation:
    """Heisenberg dual of running ``c`` on one copy, on a doubled expectation."""
    from . import semantics

    policy = policy or semantics.DEFAULT_POLICY
    renamed = rename_program(c, {n: side_name(n, side) for n in da.ambient.all_vars.names})
    compiled = semantics.compile_program(renamed, da.full)
    return LabeledOperator(da.full, semantics.run_dual(compiled, a.matrix, policy))


def rename_program(p: Program, mapping: dict[str, str]) -> Program:
    from .lang.ast import Apply, If, Init, Seq, Skip, While

    if isinstance(p, Skip):
        return p
    if isinstance(p, Apply):
        return Apply(p.u, p.on.rename(mapping))
    if isinstance(p, Init):
        return Init(p.on.rename(mapping), p.psi)
    if isinstance(p, If):
        return If(p.m.rename(mapping), rename_program(p.then, mapping), rename_program(p.else_, mapping))
    if isinstance(p, While):
        return While(p.m.rename(mapping), rename_program(p.body, mapping))
    if isinstance(p, Seq):
        return Seq(tuple(rename_program(q, mapping) for q in p.items))
    raise TypeError(f"not a program: {p!r}")
