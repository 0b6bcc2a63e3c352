"""Random instances for the property suites (seeded numpy generators)."""

from __future__ import annotations

import numpy as np

from eqrhl.expectations import DoubledAmbient
from eqrhl.lang.ast import Ambient, Apply, If, Init, Program, Skip, While, seq
from eqrhl.linalg import BinaryMeasurement, LabeledOperator, Register, opnorm
from eqrhl.proofs import rules
from eqrhl.semantics import is_terminating

# ambient dimension ≤ 6, so doubled registers stay at or below 36
AMBIENTS = [dict(x=2), dict(x=3), dict(x=2, y=2), dict(x=2, y=3), dict(x=3, y=2), dict(x=6)]


def rng_of(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_ambient(rng, choices=AMBIENTS) -> Ambient:
    return Ambient.of(**choices[rng.integers(len(choices))])


def random_da(rng) -> DoubledAmbient:
    return DoubledAmbient(random_ambient(rng))


def random_unitary(d: int, rng) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(d: int, rng) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_density(d: int, rng, rank: int | None = None) -> np.ndarray:
    rank = rank or int(rng.integers(1, d + 1))
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_psd(d: int, rng, norm: float | None = None) -> np.ndarray:
    rank = int(rng.integers(1, d + 1))
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    a = g @ g.conj().T
    a = (a + a.conj().T) / 2
    norm = rng.uniform(0.2, 1.0) if norm is None else norm
    return a * (norm / opnorm(a))


def random_hermitian(d: int, rng) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / 2


def random_expectation(da: DoubledAmbient, rng) -> LabeledOperator:
    return LabeledOperator(da.full, random_psd(da.dim, rng))


def random_subregister(amb: Ambient, rng) -> Register:
    names = list(amb.all_vars.names)
    k = int(rng.integers(1, len(names) + 1))
    picked = [names[i] for i in rng.permutation(len(names))[:k]]
    return amb.register(*picked)


def random_projector(d: int, rng, max_rank: int | None = None) -> np.ndarray:
    max_rank = d - 1 if max_rank is None else max_rank
    rank = int(rng.integers(1, max_rank + 1)) if max_rank >= 1 else 0
    u = random_unitary(d, rng)[:, :rank]
    return u @ u.conj().T


def random_measurement(reg: Register, rng, projective: bool | None = None, max_rank: int | None = None) -> BinaryMeasurement:
    d = reg.dim
    if projective is None:
        projective = bool(rng.integers(2))
    if projective:
        return BinaryMeasurement.projective(reg, random_projector(d, rng, max_rank))
    v = random_unitary(2 * d, rng)[:, :d]
    return BinaryMeasurement(reg, v[:d], v[d:])


def random_program(amb: Ambient, rng, depth: int = 3, loops: bool = True) -> Program:
    """A random program of the given maximum nesting depth; loops terminate almost surely."""
    kinds = ["skip", "apply", "init"]
    if depth > 1:
        kinds += ["if", "seq"] + (["while"] if loops else [])
    kind = kinds[rng.integers(len(kinds))]
    if kind == "skip":
        return Skip()
    if kind == "apply":
        x = random_subregister(amb, rng)
        return Apply(random_unitary(x.dim, rng), x)
    if kind == "init":
        x = random_subregister(amb, rng)
        return Init(x, random_state(x.dim, rng))
    if kind == "if":
        x = random_subregister(amb, rng)
        return If(random_measurement(x, rng), random_program(amb, rng, depth - 1, loops), random_program(amb, rng, depth - 1, loops))
    if kind == "seq":
        return seq(random_program(amb, rng, depth - 1, loops), random_program(amb, rng, depth - 1, loops))
    # a generic unitary on the guarded variables escapes any proper guard subspace
    x = random_subregister(amb, rng)
    body = seq(Apply(random_unitary(x.dim, rng), x), random_program(amb, rng, depth - 2, False) if depth > 2 else Skip())
    return While(random_measurement(x, rng, projective=True), body)


def terminating_program(amb: Ambient, rng, depth: int = 2) -> Program:
    while True:
        p = random_program(amb, rng, depth)
        if is_terminating(p, amb):
            return p


# -- rule instances ------------------------------------------------------------


def _one_step(da: DoubledAmbient, rng, post, kinds=("apply1", "apply2", "init1", "init2")):
    kind = kinds[rng.integers(len(kinds))]
    x = random_subregister(da.ambient, rng)
    if kind.startswith("apply"):
        fn = rules.rule_apply1 if kind == "apply1" else rules.rule_apply2
        return fn(random_unitary(x.dim, rng), x, post)
    fn = rules.rule_init1 if kind == "init1" else rules.rule_init2
    return fn(x, random_state(x.dim, rng), post)


def _fixed_point(k: np.ndarray, branches, b: np.ndarray, tol: float = 1e-14, max_iters: int = 3000):
    """Least solution of ``A = K† (Σ_t T_t† A T_t + F† B F) K`` by iteration from 0.

    ``branches`` is ``(continue_kraus, exit_kraus)``: lists of full matrices.
    Returns None when the loop converges too slowly.
    """
    cont, exit_ = branches
    base = sum(f.conj().T @ b @ f for f in exit_)
    a = np.zeros_like(b)
    for _ in range(max_iters):
        inner = base + sum(t.conj().T @ a @ t for t in cont)
        nxt = k.conj().T @ inner @ k
        if opnorm(nxt - a) <= tol:
            return nxt
        a = nxt
    return None


def inst_skip(rng):
    return rules.rule_skip(random_expectation(random_da(rng), rng))


def inst_apply1(rng):
    da = random_da(rng)
    return _one_step(da, rng, random_expectation(da, rng), ("apply1",))


def inst_apply2(rng):
    da = random_da(rng)
    return _one_step(da, rng, random_expectation(da, rng), ("apply2",))


def inst_init1(rng):
    da = random_da(rng)
    return _one_step(da, rng, random_expectation(da, rng), ("init1",))


def inst_init2(rng):
    da = random_da(rng)
    return _one_step(da, rng, random_expectation(da, rng), ("init2",))


def inst_seq(rng):
    da = random_da(rng)
    d = _one_step(da, rng, random_expectation(da, rng))
    steps = [d]
    for _ in range(int(rng.integers(1, 3))):
        steps.insert(0, _one_step(da, rng, steps[0].pre))
    return rules.rule_seq(*steps)


def inst_conseq(rng):
    da = random_da(rng)
    d = _one_step(da, rng, random_expectation(da, rng))
    # a2 = √pre · C · √pre with 0 ≤ C ≤ I stays below pre
    w, v = np.linalg.eigh(d.pre.matrix)
    root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    c = random_psd(da.dim, rng, norm=rng.uniform(0, 1))
    a2 = LabeledOperator(da.full, root @ c @ root)
    b2 = d.post + LabeledOperator(da.full, random_psd(da.dim, rng))
    return rules.rule_conseq(a2, d, b2, tol=1e-8)


def inst_exfalso(rng):
    da = random_da(rng)
    c = terminating_program(da.ambient, rng)
    d = terminating_program(da.ambient, rng)
    return rules.rule_exfalso(c, d, random_expectation(da, rng))


def _branch_pair(da, rng, post):
    """Two derivations with the same right program and post."""
    x = random_subregister(da.ambient, rng)
    right = rules.rule_apply2(random_unitary(x.dim, rng), x, post) if rng.integers(2) else None
    mid = right.pre if right is not None else post
    out = []
    for _ in range(2):
        d = _one_step(da, rng, mid, ("apply1", "init1"))
        out.append(rules.rule_seq(d, right) if right is not None else d)
    return out


def inst_if1(rng):
    da = random_da(rng)
    d_then, d_else = _branch_pair(da, rng, random_expectation(da, rng))
    m = random_measurement(random_subregister(da.ambient, rng), rng)
    return rules.rule_if1(m, d_then, d_else)


def inst_if2(rng):
    da = random_da(rng)
    d_then, d_else = (rules.rule_sym(d) for d in _branch_pair(da, rng, da.swap(random_expectation(da, rng))))
    m = random_measurement(random_subregister(da.ambient, rng), rng)
    return rules.rule_if2(m, d_then, d_else)


def inst_sym(rng):
    makers = [inst_apply1, inst_init2, inst_if1, inst_seq]
    return rules.rule_sym(makers[rng.integers(len(makers))](rng))


def inst_while1(rng):
    while True:
        da = random_da(rng)
        b = random_expectation(da, rng)
        x = random_subregister(da.ambient, rng)
        m = random_measurement(x, rng)
        y = random_subregister(da.ambient, rng).union(x)
        u = random_unitary(y.dim, rng)

        k = da.lift_side(u, y, 1).matrix
        mt, mf = (da.lift_side(m.kraus(t), m.register, 1).matrix for t in (True, False))
        a = _fixed_point(k, ([mt], [mf]), b.matrix)
        if a is None:
            continue
        a = LabeledOperator(da.full, a)
        body = rules.rule_apply1(u, y, rules.while1_pre(m, a, b, da))
        return rules.rule_while1(m, body, b)


def inst_while2(rng):
    return rules.mirror(inst_while1(rng))


def inst_mirror(rng):
    makers = [inst_apply1, inst_init1, inst_if1]
    return rules.mirror(makers[rng.integers(len(makers))](rng))


def _pair_step(da, rng, post, c, d):
    """``{A} c ~ d {post}`` for unitary programs ``c`` and ``d``."""
    right = rules.rule_apply2(d.u, d.on, post)
    left = rules.rule_apply1(c.u, c.on, right.pre)
    return rules.rule_seq(left, right)


def _random_apply(amb, rng) -> Apply:
    x = random_subregister(amb, rng)
    return Apply(random_unitary(x.dim, rng), x)


def inst_jointif4(rng):
    da = random_da(rng)
    b = random_expectation(da, rng)
    ct, cf, dt, df = (_random_apply(da.ambient, rng) for _ in range(4))
    ds = [_pair_step(da, rng, b, c, d) for c, d in ((ct, dt), (ct, df), (cf, dt), (cf, df))]
    m = random_measurement(random_subregister(da.ambient, rng), rng)
    n = random_measurement(random_subregister(da.ambient, rng), rng)
    return rules.rule_jointif4(m, n, *ds)


def inst_jointif(rng):
    da = random_da(rng)
    b = random_expectation(da, rng)
    ct, cf, dt, df = (_random_apply(da.ambient, rng) for _ in range(4))
    m = random_measurement(random_subregister(da.ambient, rng), rng)
    n = random_measurement(random_subregister(da.ambient, rng), rng)
    return rules.rule_jointif(m, n, _pair_step(da, rng, b, ct, dt), _pair_step(da, rng, b, cf, df))


def inst_jointwhile(rng):
    while True:
        da = random_da(rng)
        b = random_expectation(da, rng)
        m = random_measurement(random_subregister(da.ambient, rng), rng)
        n = random_measurement(random_subregister(da.ambient, rng), rng)
        c = Apply(random_unitary(da.ambient.dim, rng), da.ambient.all_vars)
        d = Apply(random_unitary(da.ambient.dim, rng), da.ambient.all_vars)

        k = (da.lift_side(c.u, c.on, 1) @ da.lift_side(d.u, d.on, 2)).matrix
        lifted = {
            (t, u): (da.lift_side(m.kraus(t), m.register, 1) @ da.lift_side(n.kraus(u), n.register, 2)).matrix
            for t in (True, False)
            for u in (True, False)
        }
        a = _fixed_point(k, ([lifted[True, True]], [lifted[False, False]]), b.matrix)
        if a is None:
            continue
        a = LabeledOperator(da.full, a)
        body = _pair_step(da, rng, rules.jointwhile_pre(m, n, a, b, da), c, d)
        return rules.rule_jointwhile(m, n, body, b)


INSTANCES = {
    "Skip": inst_skip,
    "Sym": inst_sym,
    "Seq": inst_seq,
    "Conseq": inst_conseq,
    "ExFalso": inst_exfalso,
    "Apply1": inst_apply1,
    "Apply2": inst_apply2,
    "Init1": inst_init1,
    "Init2": inst_init2,
    "If1": inst_if1,
    "If2": inst_if2,
    "While1": inst_while1,
    "While2": inst_while2,
    "Mirror": inst_mirror,
    "JointIf": inst_jointif,
    "JointIf4": inst_jointif4,
    "JointWhile": inst_jointwhile,
}
