"""The quantum Zeno case study.

Program ``c`` rotates a qubit ``y`` by ``π/(2n)`` in each of ``n`` rounds;
program ``d`` instead measures in round ``i`` whether ``y`` is in
``φ_i = R^i |0⟩``. We derive ``{εⁿ·I} c ~ d {≡ on y1 y2}`` with
``ε = cos²(π/2n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .expectations import DoubledAmbient, Expectation, restrict_star
from .lang import builtins
from .lang.ast import Ambient, Apply, Init, Program, Skip, While, if_skip, seq
from .lang.syntax import format_matrix
from .linalg import BinaryMeasurement, LabeledOperator, loewner_gap, opnorm, proj
from .proofs.core import Derivation, RuleError
from .proofs.rules import (
    rule_apply1,
    rule_apply2,
    rule_conseq,
    rule_if2,
    rule_init1,
    rule_init2,
    rule_jointwhile,
    rule_seq,
    rule_skip,
)
from .semantics import DEFAULT_POLICY, Policy


def epsilon(n: int) -> float:
    return math.cos(math.pi / (2 * n)) ** 2


@dataclass(frozen=True)
class ZenoInstance:
    n: int
    m: int | None = None  # counter dimension, default n + 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.m is None:
            object.__setattr__(self, "m", self.n + 1)
        if self.m < self.n + 1:
            raise ValueError(f"counter dimension {self.m} is below n + 1 = {self.n + 1}")

    @property
    def epsilon(self) -> float:
        return epsilon(self.n)

    @property
    def theta(self) -> float:
        return math.pi / (2 * self.n)

    @cached_property
    def rot(self) -> np.ndarray:
        return builtins.rot(self.theta)

    @cached_property
    def phi(self) -> list[np.ndarray]:
        out = [builtins.ket(0, 2)]
        for _ in range(self.n):
            out.append(self.rot @ out[-1])
        return out

    @cached_property
    def ambient(self) -> Ambient:
        return Ambient.of(x=self.m, y=2)

    @cached_property
    def da(self) -> DoubledAmbient:
        return DoubledAmbient(self.ambient)

    @cached_property
    def incr(self) -> np.ndarray:
        return builtins.shift(self.m)

    @cached_property
    def guard(self) -> BinaryMeasurement:
        return BinaryMeasurement.projective(self.ambient.register("x"), builtins.proj_lt(self.n, self.m))

    @cached_property
    def p_phi(self) -> np.ndarray:
        """``Σ_{i≤n} proj(|i⟩ ⊗ φ_i)`` on ``x y``."""
        p = np.zeros((2 * self.m, 2 * self.m), dtype=complex)
        for i in range(self.n + 1):
            p += proj(np.kron(builtins.ket(i, self.m), self.phi[i]))
        return p

    @cached_property
    def phi_measurement(self) -> BinaryMeasurement:
        return BinaryMeasurement.projective(self.ambient.register("x", "y"), self.p_phi)


# -- programs ----------------------------------------------------------------------


def body_c(z: ZenoInstance) -> Program:
    return seq(Apply(z.incr, z.ambient.register("x")), Apply(z.rot, z.ambient.register("y")))


def body_d(z: ZenoInstance) -> Program:
    return seq(Apply(z.incr, z.ambient.register("x")), if_skip(z.phi_measurement))


def _inits(z: ZenoInstance) -> Program:
    return seq(Init(z.ambient.register("x"), builtins.ket(0, z.m)), Init(z.ambient.register("y"), builtins.ket(0, 2)))


def build_c(n: int, m: int | None = None) -> Program:
    return build_programs(ZenoInstance(n, m))[0]


def build_d(n: int, m: int | None = None) -> Program:
    return build_programs(ZenoInstance(n, m))[1]


def build_programs(z: ZenoInstance) -> tuple[Program, Program]:
    c = seq(_inits(z), While(z.guard, body_c(z)))
    d = seq(_inits(z), While(z.guard, body_d(z)))
    return c, d


def program_text(z: ZenoInstance, which: str) -> str:
    """Source text for ``c`` or ``d`` that parses back to :func:`build_programs`."""
    if which not in ("c", "d"):
        raise ValueError("which must be 'c' or 'd'")
    lines = [
        f"var x : dim {z.m};",
        "var y : dim 2;",
        f"let R = rot(pi/(2*{z.n}));",
        f"let incr = shift({z.m});",
    ]
    if which == "d":
        lines.append(f"let Pphi = {format_matrix(z.p_phi)};")
    lines += ["init x := ket(0);", "init y := ket(0);", f"while meas(proj_lt({z.n})) on x {{", "    apply incr on x;"]
    lines.append("    apply R on y" if which == "c" else "    if meas(Pphi) on x y { skip } else { skip }")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- expectations ----------------------------------------------------------------------


def _yy(z: ZenoInstance, v1: np.ndarray, v2: np.ndarray) -> Expectation:
    return z.da.on(proj(np.kron(v1, v2)), ("y1", "y2"))


def a_i(z: ZenoInstance, i: int) -> Expectation:
    """``A_i = ε^{n−i−1}·proj(φ_i ⊗ φ_{i+1})`` for ``i < n`` and ``proj(φ_n ⊗ φ_n)`` for ``i = n``."""
    if i == z.n:
        return _yy(z, z.phi[z.n], z.phi[z.n])
    return z.epsilon ** (z.n - i - 1) * _yy(z, z.phi[i], z.phi[i + 1])


def a_i_x(z: ZenoInstance, i: int) -> Expectation:
    """``A_i^x``: ``A_i`` together with both counters at ``i``."""
    k = builtins.ket(i, z.m)
    yv = z.phi[z.n] if i == z.n else z.phi[i + 1]
    coeff = 1.0 if i == z.n else z.epsilon ** (z.n - i - 1)
    vec = np.kron(np.kron(k, k), np.kron(z.phi[i], yv))
    return coeff * z.da.on(proj(vec), ("x1", "x2", "y1", "y2"))


@dataclass
class Invariant:
    a: Expectation  # Σ_{i<n} A_i^x
    b: Expectation  # proj(|n⟩|n⟩φ_nφ_n)
    a_x: list[Expectation] = field(default_factory=list)  # A_i^x for i = 0..n


def build_invariant(z: ZenoInstance) -> Invariant:
    a_x = [a_i_x(z, i) for i in range(z.n + 1)]
    a = z.da.zero()
    for term in a_x[: z.n]:
        a = a + term
    return Invariant(a, a_x[z.n], a_x)


def p_both(z: ZenoInstance) -> Expectation:
    p = builtins.proj_lt(z.n, z.m)
    return z.da.on(np.kron(p, p), ("x1", "x2"))


def p_none(z: ZenoInstance) -> Expectation:
    q = np.eye(z.m) - builtins.proj_lt(z.n, z.m)
    return z.da.on(np.kron(q, q), ("x1", "x2"))


def loop_post(z: ZenoInstance, inv: Invariant) -> Expectation:
    """``C′ = P_both∘A + P_none∘B``."""
    return inv.a.conj_by(p_both(z)) + inv.b.conj_by(p_none(z))


def step_operator(z: ZenoInstance) -> LabeledOperator:
    """The map ``X ↦ L X L†`` taking a body postcondition to its measured-branch precondition.

    ``L = (incr▷x1)† (R▷y1)† (incr▷x2)† (P_φ▷x2y2)``.
    """
    da = z.da
    x, y, xy = z.ambient.register("x"), z.ambient.register("y"), z.ambient.register("x", "y")
    l = (
        da.lift_side(z.incr, x, 1).adjoint()
        @ da.lift_side(z.rot, y, 1).adjoint()
        @ da.lift_side(z.incr, x, 2).adjoint()
        @ da.lift_side(z.p_phi, xy, 2)
    )
    return l


def invariant_defect(z: ZenoInstance, inv: Invariant | None = None) -> float:
    """``λ_min(A′ − A)`` with ``A′ = L C′ L†``; non-negative when the invariant step holds."""
    inv = inv or build_invariant(z)
    a_prime = loop_post(z, inv).conj_by(step_operator(z))
    return loewner_gap(inv.a, a_prime)


# -- derivations ------------------------------------------------------------------------


def _init_pair(z: ZenoInstance, var: str, post: Expectation) -> Derivation:
    """``{·} init var ~ init var {post}`` via Init2 then Init1."""
    v = builtins.ket(0, z.ambient.register(var).dim)
    right = rule_init2(var, v, post)
    left = rule_init1(var, v, right.pre)
    return rule_seq(left, right)


def loop_premise(z: ZenoInstance, inv: Invariant) -> Derivation:
    """``{A} body_c ~ body_d {C′}``."""
    c_prime = loop_post(z, inv)
    meas = rule_if2(z.phi_measurement, rule_skip(c_prime), rule_skip(c_prime))
    incr2 = rule_apply2(z.incr, "x", meas.pre)
    rot1 = rule_apply1(z.rot, "y", incr2.pre)
    incr1 = rule_apply1(z.incr, "x", rot1.pre)
    chain = rule_seq(incr1, rot1, incr2, meas)
    return rule_conseq(inv.a, chain, c_prime)


@dataclass
class ZenoProof:
    instance: ZenoInstance
    derivation: Derivation
    invariant: Invariant
    invariant_gap: float  # λ_min(A′ − A) with A′ taken on the measured branch only
    d_expected: Expectation  # εⁿ·proj(|00⟩) on x1 x2
    d_distance: float  # distance of the derived middle expectation from d_expected


def derive_zeno(z: ZenoInstance | int, policy: Policy = DEFAULT_POLICY, tol: float = 1e-9) -> Derivation:
    return prove_zeno(z, policy, tol).derivation


def prove_zeno(z: ZenoInstance | int, policy: Policy = DEFAULT_POLICY, tol: float = 1e-9) -> ZenoProof:
    if isinstance(z, int):
        z = ZenoInstance(z)
    da = z.da
    inv = build_invariant(z)
    gap = invariant_defect(z, inv)
    if gap < -tol:
        raise RuleError(f"loop invariant step fails: λ_min(A′ − A) = {gap:.3e}")
    body = loop_premise(z, inv)
    loop = rule_jointwhile(z.guard, z.guard, body, inv.b, policy)
    c = inv.a_x[0]
    loop = rule_conseq(c, loop, inv.b)
    y_pair = _init_pair(z, "y", c)
    d_expected = z.epsilon**z.n * da.on(proj(np.kron(builtins.ket(0, z.m), builtins.ket(0, z.m))), ("x1", "x2"))
    d_dist = opnorm(y_pair.pre.matrix - d_expected.matrix)
    x_pair = _init_pair(z, "x", y_pair.pre)
    whole = rule_seq(x_pair, y_pair, loop)
    final = rule_conseq(da.scalar(z.epsilon**z.n), whole, da.eq("y"))
    return ZenoProof(z, final, inv, gap, d_expected, d_dist)


# -- warm-up: straight-line programs -------------------------------------------------------


@dataclass
class Warmup:
    n: int
    derivation: Derivation
    chain: list[Expectation]  # ε^n·I, A_0, ..., A_n

    @cached_property
    def instance(self) -> ZenoInstance:
        return ZenoInstance(self.n)


def warmup_instance(n: int) -> tuple[ZenoInstance, DoubledAmbient]:
    z = ZenoInstance(n)
    return z, DoubledAmbient(Ambient.of(y=2))


def warmup_programs(n: int = 3) -> tuple[Program, Program]:
    z, da = warmup_instance(n)
    y = da.ambient.register("y")
    c = seq(Init(y, builtins.ket(0, 2)), *[Apply(z.rot, y) for _ in range(n)])
    d = seq(
        Init(y, builtins.ket(0, 2)),
        *[if_skip(BinaryMeasurement.projective(y, proj(z.phi[i]))) for i in range(1, n + 1)],
    )
    return c, d


def warmup_expectation(n: int, i: int) -> Expectation:
    """The closed form of ``A_i`` over the ``y``-only ambient."""
    z, da = warmup_instance(n)
    if i == n:
        return da.on(proj(np.kron(z.phi[n], z.phi[n])), ("y1", "y2"))
    return z.epsilon ** (n - i - 1) * da.on(proj(np.kron(z.phi[i], z.phi[i + 1])), ("y1", "y2"))


def warmup(n: int = 3) -> Warmup:
    """``{εⁿ·I} c′ ~ d′ {≡ on y1 y2}`` through the chain ``A_0 … A_n``."""
    z, da = warmup_instance(n)
    y = da.ambient.register("y")
    a = warmup_expectation(n, n)
    steps = []
    chain = [a]
    for i in range(n, 0, -1):
        rot = rule_apply1(z.rot, "y", a)  # {A_i′} apply R ~ skip {A_i}
        m = BinaryMeasurement.projective(y, proj(z.phi[i]))
        meas = rule_if2(m, rule_skip(rot.pre), rule_skip(rot.pre))
        step = rule_seq(meas, rot)
        # drop the failed-measurement term: A_{i−1} = E*_{2,true}(A_i′)
        a = restrict_star(m, 2, True, rot.pre, da)
        steps.append(rule_conseq(a, step, step.post))
        chain.append(a)
    steps.reverse()
    chain.reverse()
    v = builtins.ket(0, 2)
    right = rule_init2("y", v, chain[0])
    left = rule_init1("y", v, right.pre)
    init = rule_conseq(da.scalar(z.epsilon**n), rule_seq(left, right), chain[0])
    whole = rule_seq(init, *steps)
    final = rule_conseq(da.scalar(z.epsilon**n), whole, da.eq("y"))
    return Warmup(n, final, [init.pre] + chain)


def warmup3() -> Warmup:
    return warmup(3)


def warmup_chain(d: Derivation) -> list[Expectation]:
    """Read the intermediate expectations off a warm-up derivation's sequence node."""
    node = d
    while node.rule == "Conseq":
        node = node.premises[0]
    if node.rule != "Seq":
        raise ValueError("not a warm-up derivation")
    return [node.premises[0].pre] + [p.post for p in node.premises]
