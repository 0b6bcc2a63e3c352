"""One constructor per proof rule.

Every constructor checks its side conditions, computes the conclusion and
attaches a witness that follows the rule's soundness argument: given a pure
product input it builds an explicit separable output coupling.
"""

from __future__ import annotations

import numpy as np

from ..expectations import DoubledAmbient, Expectation, init_star, restrict_star, restrict_star2
from ..lang.ast import Apply, If, Init, Program, Skip, While, seq
from ..linalg import (
    TOL,
    BinaryMeasurement,
    PureState,
    Register,
    SeparableEnsemble,
    clip_psd,
    isometry_defect,
    kraus_defect,
    lift_matrix,
    loewner_gap,
)
from ..semantics import DEFAULT_POLICY, Policy, compile_program, is_terminating, run
from .core import Derivation, Judgment, RuleError, Witness, expectation_distance, witness_extend

# -- helpers -------------------------------------------------------------------


def _da(a: Expectation) -> DoubledAmbient:
    try:
        return DoubledAmbient.infer(a.register)
    except ValueError as exc:
        raise RuleError(str(exc)) from None


def _check_expectation(a: Expectation, da: DoubledAmbient, what: str, tol: float = TOL):
    try:
        da.check(a, what, tol)
    except ValueError as exc:
        raise RuleError(str(exc)) from None


def _register(x, da: DoubledAmbient) -> Register:
    """Ambient variables from a register, a name, or a list of names (order kept)."""
    if isinstance(x, str):
        x = (x,)
    names = x.names if isinstance(x, Register) else tuple(x)
    try:
        reg = da.ambient.register(*names)
    except ValueError as exc:
        raise RuleError(str(exc)) from None
    if isinstance(x, Register) and x != reg:
        raise RuleError(f"register {x!r} does not match the ambient declaration")
    return reg


def _measurement(m: BinaryMeasurement, da: DoubledAmbient, tol: float = TOL):
    _register(m.register, da)
    defect = kraus_defect(m)
    if defect > tol:
        raise RuleError(f"measurement on {m.register.names} is not a Kraus pair (defect {defect:.3e})")


def _same_program(p: Program, q: Program, what: str):
    if p != q:
        raise RuleError(f"premises disagree on the {what} program")


def _same_expectation(a: Expectation, b: Expectation, what: str, tol: float):
    dist = expectation_distance(a, b)
    if dist > tol:
        raise RuleError(f"{what} mismatch (distance {dist:.3e})")


def _require_terminating(c: Program, da: DoubledAmbient, policy: Policy, what: str):
    verdict = is_terminating(c, da.ambient, policy)
    if not verdict:
        raise RuleError(
            f"{what} is not known to terminate ({verdict.status}; defect {verdict.defect:.3e}, "
            f"residual {verdict.residual:.3e})"
        )


def _swap_terms(ens: SeparableEnsemble, da: DoubledAmbient) -> SeparableEnsemble:
    return SeparableEnsemble(da.left, da.right, [(p, b, a) for p, a, b in ens.terms])


# -- witnesses -----------------------------------------------------------------


class IdentityWitness(Witness):
    def term(self, alpha, beta):
        return self.single(1.0, alpha, beta)


class LeftProgramWitness(Witness):
    """Run the left program and keep the right state: ``⟦c⟧(α) ⊗ β``."""

    def __init__(self, da, c: Program, policy: Policy):
        super().__init__(da)
        self.compiled = compile_program(c, da.ambient.all_vars)
        self.policy = policy

    def term(self, alpha, beta):
        return self.single(1.0, run(self.compiled, alpha, self.policy), beta)


class ProductWitness(Witness):
    """``⟦c⟧(α) ⊗ ⟦d⟧(β)``, used for ExFalso."""

    def __init__(self, da, c: Program, d: Program, policy: Policy):
        super().__init__(da)
        reg = da.ambient.all_vars
        self.cc = compile_program(c, reg)
        self.cd = compile_program(d, reg)
        self.policy = policy

    def term(self, alpha, beta):
        out = self.empty()
        a = run(self.cc, alpha, self.policy)
        b = run(self.cd, beta, self.policy)
        ta, tb = float(np.real(np.trace(a))), float(np.real(np.trace(b)))
        if ta > 0 and tb > 0:
            # weight chosen so that both marginals are exact when traces agree
            out.terms.append((min(ta, tb), a / ta, b / tb))
        return out


class SymWitness(Witness):
    def __init__(self, da, inner: Witness):
        super().__init__(da)
        self.inner = inner

    def term(self, alpha, beta):
        return _swap_terms(self.inner.term(beta, alpha), self.da)

    def pure(self, psi1, psi2):
        return _swap_terms(self.inner.pure(psi2, psi1), self.da)


class SeqWitness(Witness):
    def __init__(self, da, parts: list[Witness]):
        super().__init__(da)
        self.parts = parts

    def term(self, alpha, beta):
        ens = self.parts[0].term(alpha, beta)
        for w in self.parts[1:]:
            ens = witness_extend(w, ens)
        return ens


class If1Witness(Witness):
    """``p·ρ_T + (1−p)·ρ_F`` with ``ρ_T``, ``ρ_F`` the branch witnesses on the renormalised states."""

    def __init__(self, da, m: BinaryMeasurement, w_then: Witness, w_else: Witness, cutoff: float = 1e-14):
        super().__init__(da)
        reg = da.ambient.all_vars
        self.branches = [
            (lift_matrix(m.m_true, m.register, reg), w_then),
            (lift_matrix(m.m_false, m.register, reg), w_else),
        ]
        self.cutoff = cutoff

    def term(self, alpha, beta):
        out = self.empty()
        for k, w in self.branches:
            a = k @ alpha @ k.conj().T
            p = float(np.real(np.trace(a)))
            if p > self.cutoff:
                out.extend(w.term(a / p, beta), p)
        return out


class JointWhileWitness(Witness):
    """Iterate the body witness on the jointly-continuing part, then pad.

    ``η_0 = α ⊗ β``, ``η_{k+1} = body(E_tt(η_k))``; the output is
    ``Σ_k E_ff(η_k) + r·γ⊗δ`` where ``r·γ`` and ``r·δ`` are what the summed
    part misses of the true loop outputs.
    """

    def __init__(self, da, m, n, body: Witness, loop_c: Program, loop_d: Program, policy: Policy):
        super().__init__(da)
        reg = da.ambient.all_vars
        self.mt = lift_matrix(m.m_true, m.register, reg)
        self.mf = lift_matrix(m.m_false, m.register, reg)
        self.nt = lift_matrix(n.m_true, n.register, reg)
        self.nf = lift_matrix(n.m_false, n.register, reg)
        self.body = body
        self.cc = compile_program(loop_c, reg)
        self.cd = compile_program(loop_d, reg)
        self.policy = policy

    def _restrict(self, ens: SeparableEnsemble, k1, k2) -> SeparableEnsemble:
        out = self.empty()
        for p, a, b in ens.terms:
            out.add(p, k1 @ a @ k1.conj().T, k2 @ b @ k2.conj().T)
        return out

    def iterates(self, alpha, beta) -> tuple[SeparableEnsemble, list[SeparableEnsemble]]:
        """The accumulated ``Σ E_ff(η_k)`` and the list of ``η_k``."""
        eta = self.single(1.0, alpha, beta)
        acc = self.empty()
        etas = [eta]
        for _ in range(self.policy.max_iters):
            acc.extend(self._restrict(eta, self.mf, self.nf))
            cont = self._restrict(eta, self.mt, self.nt)
            if cont.trace() <= self.policy.tail_tol:
                break
            eta = witness_extend(self.body, cont)
            etas.append(eta)
        return acc.compact(), etas

    def term(self, alpha, beta):
        acc, _ = self.iterates(alpha, beta)
        a_out = run(self.cc, alpha, self.policy)
        b_out = run(self.cd, beta, self.policy)
        gamma = clip_psd(a_out - acc.marginal_left())
        delta = clip_psd(b_out - acc.marginal_right())
        r = 0.5 * (float(np.real(np.trace(gamma))) + float(np.real(np.trace(delta))))
        if r > self.policy.tail_tol:
            acc.terms.append((r, self._normalise(gamma), self._normalise(delta)))
        return acc

    def _normalise(self, m):
        t = float(np.real(np.trace(m)))
        if t <= self.policy.tail_tol:
            return np.eye(m.shape[0], dtype=complex) / m.shape[0]
        return m / t


# -- structural rules ----------------------------------------------------------


def rule_skip(a: Expectation) -> Derivation:
    da = _da(a)
    _check_expectation(a, da, "expectation")
    return Derivation("Skip", {"a": a}, (), Judgment(a, Skip(), Skip(), a), IdentityWitness(da))


def rule_sym(d: Derivation) -> Derivation:
    da = d.da
    j = Judgment(da.swap(d.pre), d.right, d.left, da.swap(d.post))
    return Derivation("Sym", {}, (d,), j, SymWitness(da, d.witness))


def rule_seq(*ds: Derivation, tol: float = 1e-9) -> Derivation:
    if len(ds) == 1 and isinstance(ds[0], (list, tuple)):
        ds = tuple(ds[0])
    if not ds:
        raise RuleError("Seq needs at least one premise")
    da = ds[0].da
    for i, (d1, d2) in enumerate(zip(ds, ds[1:])):
        if d1.da != d2.da:
            raise RuleError("Seq premises live over different ambient registers")
        _same_expectation(d1.post, d2.pre, f"middle expectation {i + 1}", tol)
    j = Judgment(ds[0].pre, seq(*(d.left for d in ds)), seq(*(d.right for d in ds)), ds[-1].post)
    return Derivation("Seq", {}, tuple(ds), j, SeqWitness(da, [d.witness for d in ds]))


def rule_conseq(a2: Expectation, d: Derivation, b2: Expectation, tol: float = TOL) -> Derivation:
    da = d.da
    for what, e in (("weakened pre", a2), ("weakened post", b2)):
        if e.register != da.full:
            raise RuleError(f"{what} acts on {e.register.names}, expected {da.full.names}")
        _check_expectation(e, da, what, tol * max(1.0, e.norm()))
    gap = loewner_gap(a2, d.pre, tol)
    if gap < -tol:
        raise RuleError(f"Conseq: new pre is not below the premise pre (eigenvalue {gap:.3e})")
    gap = loewner_gap(d.post, b2, tol)
    if gap < -tol:
        raise RuleError(f"Conseq: premise post is not below the new post (eigenvalue {gap:.3e})")
    return Derivation("Conseq", {"pre": a2, "post": b2}, (d,), Judgment(a2, d.left, d.right, b2), d.witness)


def rule_exfalso(c: Program, d: Program, b: Expectation, policy: Policy = DEFAULT_POLICY) -> Derivation:
    da = _da(b)
    _check_expectation(b, da, "post")
    _require_terminating(c, da, policy, "left program")
    _require_terminating(d, da, policy, "right program")
    j = Judgment(da.zero(), c, d, b)
    return Derivation("ExFalso", {"post": b}, (), j, ProductWitness(da, c, d, policy))


# -- one-sided rules -----------------------------------------------------------


def rule_apply1(u, x, a: Expectation, tol: float = TOL) -> Derivation:
    da = _da(a)
    _check_expectation(a, da, "post")
    x = _register(x, da)
    u = np.asarray(u, dtype=complex)
    if u.shape != (x.dim, x.dim):
        raise RuleError(f"matrix of shape {u.shape} cannot act on {x.names}")
    defect = isometry_defect(u)
    if defect > tol:
        raise RuleError(f"Apply1: not an isometry (defect {defect:.3e})")
    k = da.lift_side(u, x, 1)
    pre = a.conj_by(k.adjoint())
    c = Apply(u, x)
    return Derivation("Apply1", {"u": u, "on": x}, (), Judgment(pre, c, Skip(), a), LeftProgramWitness(da, c, DEFAULT_POLICY))


def rule_init1(x, psi, a: Expectation, tol: float = TOL) -> Derivation:
    da = _da(a)
    _check_expectation(a, da, "post")
    x = _register(x, da)
    v = psi.vector_in(x) if isinstance(psi, PureState) else np.asarray(psi, dtype=complex).reshape(-1)
    if v.shape != (x.dim,):
        raise RuleError(f"state of length {v.shape[0]} cannot initialise {x.names}")
    if abs(np.linalg.norm(v) - 1) > tol:
        raise RuleError(f"Init1: state is not normalised (norm {np.linalg.norm(v):.12g})")
    pre = init_star(x, v, 1, a, da)
    c = Init(x, v)
    return Derivation("Init1", {"on": x, "psi": v}, (), Judgment(pre, c, Skip(), a), LeftProgramWitness(da, c, DEFAULT_POLICY))


def rule_if1(m: BinaryMeasurement, d_then: Derivation, d_else: Derivation, tol: float = 1e-9) -> Derivation:
    da = d_then.da
    if d_else.da != da:
        raise RuleError("If1 premises live over different ambient registers")
    _measurement(m, da)
    _same_program(d_then.right, d_else.right, "right")
    _same_expectation(d_then.post, d_else.post, "If1 post", tol)
    pre = restrict_star(m, 1, True, d_then.pre, da) + restrict_star(m, 1, False, d_else.pre, da)
    j = Judgment(pre, If(m, d_then.left, d_else.left), d_then.right, d_then.post)
    return Derivation("If1", {"m": m}, (d_then, d_else), j, If1Witness(da, m, d_then.witness, d_else.witness))


def while1_pre(m: BinaryMeasurement, a: Expectation, b: Expectation, da: DoubledAmbient) -> Expectation:
    return restrict_star(m, 1, True, a, da) + restrict_star(m, 1, False, b, da)


def rule_while1(
    m: BinaryMeasurement, body: Derivation, b: Expectation, policy: Policy = DEFAULT_POLICY, tol: float = 1e-9
) -> Derivation:
    """``{E*_t(A) + E*_f(B)} while M do c ~ skip {B}`` from ``{A} c ~ skip {E*_t(A) + E*_f(B)}``."""
    da = body.da
    _measurement(m, da)
    _check_expectation(b, da, "post")
    if body.right != Skip():
        raise RuleError("While1: the body premise must have skip on the right")
    pre = while1_pre(m, body.pre, b, da)
    _same_expectation(body.post, pre, "While1 body post", tol)
    loop = While(m, body.left)
    _require_terminating(body.left, da, policy, "loop body")
    _require_terminating(loop, da, policy, "loop")
    j = Judgment(pre, loop, Skip(), b)
    return Derivation("While1", {"m": m, "post": b}, (body,), j, LeftProgramWitness(da, loop, policy))


# -- mirrored rules ------------------------------------------------------------

_MIRROR = {"Apply1": "Apply2", "Init1": "Init2", "If1": "If2", "While1": "While2"}


def mirror(d: Derivation) -> Derivation:
    """Move a one-sided derivation to the other side (via Sym)."""
    if d.rule not in _MIRROR:
        raise RuleError(f"mirror: unsupported root rule {d.rule}")
    return rule_sym(d).retag(_MIRROR[d.rule], params=d.params, premises=(d,))


def rule_apply2(u, x, a: Expectation, tol: float = TOL) -> Derivation:
    da = _da(a)
    inner = rule_apply1(u, x, da.swap(a), tol)
    return rule_sym(inner).retag("Apply2", params=inner.params, premises=())


def rule_init2(x, psi, a: Expectation, tol: float = TOL) -> Derivation:
    da = _da(a)
    inner = rule_init1(x, psi, da.swap(a), tol)
    return rule_sym(inner).retag("Init2", params=inner.params, premises=())


def rule_if2(m: BinaryMeasurement, d_then: Derivation, d_else: Derivation, tol: float = 1e-9) -> Derivation:
    inner = rule_if1(m, rule_sym(d_then), rule_sym(d_else), tol)
    return rule_sym(inner).retag("If2", params={"m": m}, premises=(d_then, d_else))


def rule_while2(
    m: BinaryMeasurement, body: Derivation, b: Expectation, policy: Policy = DEFAULT_POLICY, tol: float = 1e-9
) -> Derivation:
    da = body.da
    inner = rule_while1(m, rule_sym(body), da.swap(b), policy, tol)
    return rule_sym(inner).retag("While2", params={"m": m, "post": b}, premises=(body,))


# -- two-sided rules -----------------------------------------------------------


def rule_jointif4(
    m: BinaryMeasurement,
    n: BinaryMeasurement,
    d_tt: Derivation,
    d_tf: Derivation,
    d_ft: Derivation,
    d_ff: Derivation,
    tol: float = 1e-9,
) -> Derivation:
    """Premises ``{A_tu} c_t ~ d_u {B}``; conclusion pre ``Σ E*_{t,u}(A_tu)``."""
    _same_program(d_tt.left, d_tf.left, "left true-branch")
    _same_program(d_ft.left, d_ff.left, "left false-branch")
    _same_program(d_tt.right, d_ft.right, "right true-branch")
    _same_program(d_tf.right, d_ff.right, "right false-branch")
    # for each right outcome u, If1 merges the left branches; If2 then merges u
    via = rule_if2(n, rule_if1(m, d_tt, d_ft, tol), rule_if1(m, d_tf, d_ff, tol), tol)
    return via.retag("JointIf4", params={"m": m, "n": n}, premises=(d_tt, d_tf, d_ft, d_ff))


def rule_jointif(
    m: BinaryMeasurement,
    n: BinaryMeasurement,
    d_tt: Derivation,
    d_ff: Derivation,
    policy: Policy = DEFAULT_POLICY,
    tol: float = 1e-9,
) -> Derivation:
    """Diagonal premises only; the mixed branches are filled in by ExFalso."""
    _same_expectation(d_tt.post, d_ff.post, "JointIf post", tol)
    b = d_tt.post
    d_tf = rule_exfalso(d_tt.left, d_ff.right, b, policy)
    d_ft = rule_exfalso(d_ff.left, d_tt.right, b, policy)
    via = rule_jointif4(m, n, d_tt, d_tf, d_ft, d_ff, tol)
    return via.retag("JointIf", params={"m": m, "n": n}, premises=(d_tt, d_ff))


def jointwhile_pre(m, n, a: Expectation, b: Expectation, da: DoubledAmbient) -> Expectation:
    return restrict_star2(m, n, True, True, a, da) + restrict_star2(m, n, False, False, b, da)


def rule_jointwhile(
    m: BinaryMeasurement,
    n: BinaryMeasurement,
    body: Derivation,
    b: Expectation,
    policy: Policy = DEFAULT_POLICY,
    tol: float = 1e-9,
) -> Derivation:
    """``{E*_tt(A) + E*_ff(B)} while M c ~ while N d {B}`` from ``{A} c ~ d {E*_tt(A) + E*_ff(B)}``."""
    da = body.da
    _measurement(m, da)
    _measurement(n, da)
    _check_expectation(b, da, "post")
    pre = jointwhile_pre(m, n, body.pre, b, da)
    _same_expectation(body.post, pre, "JointWhile body post", tol)
    loop_c, loop_d = While(m, body.left), While(n, body.right)
    _require_terminating(body.left, da, policy, "left loop body")
    _require_terminating(body.right, da, policy, "right loop body")
    _require_terminating(loop_c, da, policy, "left loop")
    _require_terminating(loop_d, da, policy, "right loop")
    j = Judgment(pre, loop_c, loop_d, b)
    w = JointWhileWitness(da, m, n, body.witness, loop_c, loop_d, policy)
    return Derivation("JointWhile", {"m": m, "n": n, "post": b}, (body,), j, w)
