import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqrhl.expectations import DoubledAmbient, restrict_star
from eqrhl.lang import Ambient, Apply, Init, Skip, While, ket
from eqrhl.linalg import BinaryMeasurement, LabeledOperator, SeparableEnsemble, proj
from eqrhl.proofs import RuleError
from eqrhl.proofs import rules
from eqrhl.proofs.core import witness_extend
from eqrhl.validator import check_witness

from gen import INSTANCES, random_density, random_expectation, random_unitary, rng_of

DA = DoubledAmbient(Ambient.of(y=2))
Y = DA.ambient.register("y")


def test_skip_judgment():
    a = random_expectation(DA, rng_of(0))
    d = rules.rule_skip(a)
    assert d.pre.close_to(a) and d.post.close_to(a)
    assert d.left == d.right == Skip()


def test_skip_rejects_indefinite():
    with pytest.raises(ValueError):
        rules.rule_skip(-1 * DA.identity())


def test_sym_twice_is_identity_on_judgment():
    d = INSTANCES["Apply1"](rng_of(1))
    back = rules.rule_sym(rules.rule_sym(d))
    assert back.conclusion.close_to(d.conclusion, 1e-12)


def test_sym_swaps_programs():
    d = INSTANCES["Init1"](rng_of(2))
    s = rules.rule_sym(d)
    assert (s.left, s.right) == (d.right, d.left)
    assert s.pre.close_to(d.da.swap(d.pre))


def test_apply1_pre():
    u = random_unitary(2, rng_of(3))
    b = DA.eq("y")
    d = rules.rule_apply1(u, Y, b)
    k = DA.lift_side(u, Y, 1).matrix
    np.testing.assert_allclose(d.pre.matrix, k.conj().T @ b.matrix @ k, atol=1e-12)


def test_apply_witness_is_tight():
    for k in range(5):
        d = INSTANCES["Apply1"](rng_of(100 + k))
        report = check_witness(d, samples=10)
        assert abs(report.worst_slack) <= 1e-12
        assert max(abs(r.slack) for r in report.results) <= 1e-12


def test_apply1_rejects_non_isometry():
    with pytest.raises(RuleError, match="isometry"):
        rules.rule_apply1(np.diag([1, 0.5]), Y, DA.identity())


def test_init1_of_own_projector_gives_identity():
    psi = np.array([0.6, 0.8j])
    d = rules.rule_init1(Y, psi, DA.on(proj(psi), ("y1",)))
    assert d.pre.close_to(DA.identity(), 1e-12)


def test_init1_rejects_unnormalised():
    with pytest.raises(RuleError, match="normalised"):
        rules.rule_init1(Y, [1, 1], DA.identity())


def test_seq_checks_middle():
    a = random_expectation(DA, rng_of(4))
    d1 = rules.rule_skip(a)
    d2 = rules.rule_skip(a + DA.identity())
    with pytest.raises(RuleError, match="middle"):
        rules.rule_seq(d1, d2)


def test_seq_is_nary():
    a = DA.eq("y")
    u, v = random_unitary(2, rng_of(5)), random_unitary(2, rng_of(6))
    d3 = rules.rule_apply2(v, Y, a)
    d2 = rules.rule_apply1(u, Y, d3.pre)
    d1 = rules.rule_skip(d2.pre)
    s = rules.rule_seq(d1, d2, d3)
    assert len(s.premises) == 3
    assert s.left == Apply(u, Y) and s.right == Apply(v, Y)


def test_conseq_accepts_weakening():
    a = DA.eq("y")
    d = rules.rule_skip(a)
    out = rules.rule_conseq(0.5 * a, d, DA.identity())
    assert out.pre.close_to(0.5 * a) and out.post.close_to(DA.identity())


def test_conseq_rejects_strengthened_pre():
    d = rules.rule_skip(0.5 * DA.identity())
    with pytest.raises(RuleError, match="pre"):
        rules.rule_conseq(DA.identity(), d, 0.5 * DA.identity())


def test_conseq_rejects_strengthened_post():
    d = rules.rule_skip(DA.eq("y"))
    with pytest.raises(RuleError, match="post"):
        rules.rule_conseq(DA.zero(), d, 0.5 * DA.eq("y"))


def test_exfalso_pre_is_zero():
    d = rules.rule_exfalso(Apply(random_unitary(2, rng_of(7)), Y), Skip(), DA.eq("y"))
    assert d.pre.close_to(DA.zero())


def test_exfalso_rejects_nonterminating():
    loop = While(BinaryMeasurement(Y, np.eye(2), np.zeros((2, 2))), Skip())
    with pytest.raises(RuleError, match="terminat"):
        rules.rule_exfalso(loop, Skip(), DA.identity())


def test_if1_with_skip_branches():
    p = proj(np.array([1, 1]) / np.sqrt(2))
    m = BinaryMeasurement.projective(Y, p)
    a = random_expectation(DA, rng_of(8))
    d = rules.rule_if1(m, rules.rule_skip(a), rules.rule_skip(a))
    pt = DA.lift_side(p, Y, 1).matrix
    pf = DA.lift_side(np.eye(2) - p, Y, 1).matrix
    np.testing.assert_allclose(d.pre.matrix, pt @ a.matrix @ pt + pf @ a.matrix @ pf, atol=1e-12)


def test_if1_rejects_different_right_programs():
    a = DA.identity()
    m = BinaryMeasurement.projective(Y, np.diag([1, 0]))
    d_then = rules.rule_skip(a)
    d_else = rules.rule_apply2(random_unitary(2, rng_of(9)), Y, a)
    with pytest.raises(RuleError):
        rules.rule_if1(m, d_then, d_else)


def test_mirror_twice_returns_original_judgment():
    d = INSTANCES["Apply1"](rng_of(10))
    once = rules.mirror(d)
    assert once.rule == "Apply2"
    assert (once.left, once.right) == (Skip(), d.left)
    assert rules.rule_sym(once).conclusion.close_to(d.conclusion, 1e-12)


def test_mirror_rejects_two_sided():
    with pytest.raises(RuleError):
        rules.mirror(INSTANCES["JointIf4"](rng_of(11)))


def test_jointif4_identical_premises_collapse():
    # four copies of skip~skip: the pre is Σ E*_{t,u}(A) over all outcome pairs
    a = random_expectation(DA, rng_of(12))
    m = BinaryMeasurement.projective(Y, np.diag([1, 0]))
    n = BinaryMeasurement.projective(Y, proj(np.array([1, 1]) / np.sqrt(2)))
    s = rules.rule_skip(a)
    d = rules.rule_jointif4(m, n, s, s, s, s)
    want = DA.zero()
    for t in (True, False):
        for u in (True, False):
            want = want + restrict_star(m, 1, t, restrict_star(n, 2, u, a, DA), DA)
    assert d.pre.close_to(want, 1e-12)


def test_jointif_mixed_branches_vanish():
    a = DA.eq("y")
    m = BinaryMeasurement.projective(Y, np.diag([1, 0]))
    s = rules.rule_skip(a)
    d = rules.rule_jointif(m, m, s, s)
    want = restrict_star(m, 1, True, restrict_star(m, 2, True, a, DA), DA)
    want = want + restrict_star(m, 1, False, restrict_star(m, 2, False, a, DA), DA)
    assert d.pre.close_to(want, 1e-12)


def test_while1_requires_matching_body_post():
    m = BinaryMeasurement.projective(Y, np.diag([0, 1]))
    b = DA.on(proj([1, 0]), ("y1",))
    body = rules.rule_init1(Y, ket(0, 2), b)
    with pytest.raises(RuleError, match="body post"):
        rules.rule_while1(m, body, b)


def test_while1_reset_loop():
    # while y = 1 { y := |0⟩ } with B = I: pre must be I
    m = BinaryMeasurement.projective(Y, np.diag([0, 1]))
    b = DA.identity()
    body = rules.rule_init1(Y, ket(0, 2), rules.while1_pre(m, b, b, DA))
    d = rules.rule_while1(m, body, b)
    assert d.pre.close_to(DA.identity(), 1e-12)
    assert check_witness(d, samples=5).passed


# -- witnesses ------------------------------------------------------------------


def test_witness_extend_empty():
    d = INSTANCES["Apply1"](rng_of(13))
    ens = SeparableEnsemble(d.da.left, d.da.right)
    assert len(witness_extend(d.witness, ens)) == 0


def test_witness_extend_linear():
    rng = rng_of(14)
    d = INSTANCES["If1"](rng)
    n = d.da.ambient.dim
    a1, b1, a2, b2 = (random_density(n, rng) for _ in range(4))
    ens = SeparableEnsemble(d.da.left, d.da.right)
    ens.add(0.3, a1, b1)
    ens.add(0.7, a2, b2)
    whole = witness_extend(d.witness, ens).matrix()
    parts = 0.3 * d.witness.term(a1, b1).matrix() + 0.7 * d.witness.term(a2, b2).matrix()
    np.testing.assert_allclose(whole, parts, atol=1e-10)


def test_witness_mixed_matches_pure_decomposition():
    rng = rng_of(15)
    d = INSTANCES["Seq"](rng)
    n = d.da.ambient.dim
    ens = SeparableEnsemble(d.da.left, d.da.right)
    ens.add(1.0, random_density(n, rng), random_density(n, rng))
    direct = witness_extend(d.witness, ens).matrix()
    split = witness_extend(d.witness, ens, decompose=True).matrix()
    np.testing.assert_allclose(direct, split, atol=1e-9)


def test_corrupted_post_fails_check():
    d = INSTANCES["Apply1"](rng_of(16))
    bad = rules.rule_skip(d.pre)
    # claim skip~skip lifts the expectation by I: no coupling does that
    j = type(bad.conclusion)(bad.pre + bad.da.identity(), Skip(), Skip(), bad.post)
    forged = type(bad)("Skip", {}, (), j, bad.witness)
    assert not check_witness(forged, samples=5).passed


@pytest.mark.parametrize("name", sorted(INSTANCES))
def test_rule_witnesses_pass(name):
    rng = rng_of(zlib.crc32(name.encode()))
    for _ in range(3):
        d = INSTANCES[name](rng)
        assert d.rule == name or name in ("Mirror", "Sym")
        report = check_witness(d, samples=5, seed=int(rng.integers(2**31)))
        assert report.passed, (name, report.worst_marginal_residual, report.worst_slack)


seeds = st.integers(0, 2**32 - 1)
FAST = [n for n in sorted(INSTANCES) if n not in ("JointWhile", "While1", "While2")]


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(FAST))
def test_random_rule_instances_pass(seed, name):
    d = INSTANCES[name](rng_of(seed))
    assert check_witness(d, samples=4, seed=seed).passed


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_sym_witness_swaps_output(seed):
    rng = rng_of(seed)
    d = INSTANCES["Apply1"](rng)
    n = d.da.ambient.dim
    v1, v2 = (random_density(n, rng, rank=1) for _ in range(2))
    s = rules.rule_sym(d)
    out = s.witness.term(v2, v1)
    back = d.witness.term(v1, v2)
    np.testing.assert_allclose(out.marginal_left(), back.marginal_right(), atol=1e-10)
    np.testing.assert_allclose(out.marginal_right(), back.marginal_left(), atol=1e-10)
