import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqrhl.expectations import (
    DoubledAmbient,
    conj_by,
    contract,
    fv_subset,
    fv_subset_defect,
    init_star,
    restrict_star,
    restrict_star2,
    side_dual,
)
from eqrhl.lang import Ambient, Apply, ket
from eqrhl.linalg import BinaryMeasurement, LabeledOperator, PureState, Register, lift_matrix, proj
from eqrhl.zeno import ZenoInstance, a_i_x, build_invariant, p_both, p_none, step_operator

from gen import random_da, random_density, random_expectation, random_measurement, random_subregister, random_unitary, rng_of

DA = DoubledAmbient(Ambient.of(y=2))
DA2 = DoubledAmbient(Ambient.of(x=2, y=2))


def test_doubled_registers():
    assert DA2.left.names == ("x1", "y1")
    assert DA2.right.names == ("x2", "y2")
    assert DA2.blocked.names == ("x1", "y1", "x2", "y2")
    assert DA2.full.names == ("x1", "x2", "y1", "y2")
    assert DA2.dim == 16


def test_infer_roundtrip():
    assert DoubledAmbient.infer(DA2.full) == DA2
    with pytest.raises(ValueError):
        DoubledAmbient.infer(Register(DA2.left.vars))
    with pytest.raises(ValueError):
        DoubledAmbient.infer(Ambient.of(x=2).all_vars)


def test_swap_exchanges_copies():
    a = DA2.on(proj([1, 0]), ("x1",))
    b = DA2.on(proj([1, 0]), ("x2",))
    assert DA2.swap(a).close_to(b)
    assert DA2.swap(DA2.swap(a)).close_to(a)


def test_eq_is_symmetric_under_swap():
    e = DA2.eq(("x", "y"))
    assert DA2.swap(e).close_to(e)
    assert e.trace().real == pytest.approx(10.0)


def test_restrict_star_identity_gives_projector():
    p = proj(np.array([1, 1j]) / np.sqrt(2))
    m = BinaryMeasurement.projective(DA.ambient.register("y"), p)
    assert restrict_star(m, 1, True, DA.identity(), DA).close_to(DA.on(p, ("y1",)))
    assert restrict_star(m, 2, False, DA.zero(), DA).close_to(DA.zero())


def test_restrict_star_side_checked():
    m = BinaryMeasurement.projective(DA.ambient.register("y"), np.diag([1, 0]))
    with pytest.raises(ValueError):
        restrict_star(m, 3, True, DA.identity(), DA)


def test_restrict_star2_trivial_measurements():
    y = DA.ambient.register("y")
    triv = BinaryMeasurement(y, np.eye(2), np.zeros((2, 2)))
    a = random_expectation(DA, rng_of(0))
    assert restrict_star2(triv, triv, True, True, a, DA).close_to(a)


def test_conj_by_identity():
    a = random_expectation(DA2, rng_of(1))
    assert conj_by(LabeledOperator.identity(DA2.full.select(["y1"])), a).close_to(a)


def test_conj_by_state_on_its_projector():
    psi = np.array([0.6, 0.8])
    a = DA.on(proj(np.kron(psi, psi)), ("y1", "y2"))
    out = conj_by(PureState(DA.full.select(["y1"]), psi), a)
    # remaining factor on y2 is proj(psi); fully contracting gives 1
    state = PureState(DA.full, np.kron(psi, psi))
    assert contract(state, a).matrix[0, 0] == pytest.approx(1.0)
    assert out.close_to(DA.on(proj(psi), ("y2",)))


def test_zeno_rotation_step():
    z = ZenoInstance(3)
    a3 = DA.on(proj(np.kron(z.phi[3], z.phi[3])), ("y1", "y2"))
    rdag = LabeledOperator(DA.full.select(["y1"]), z.rot.conj().T)
    out = conj_by(rdag, a3)
    assert out.close_to(DA.on(proj(np.kron(z.phi[2], z.phi[3])), ("y1", "y2")), 1e-12)


def test_init_star_scalar():
    # ⟨0|proj(φ1)|0⟩ = ε for n = 3
    z = ZenoInstance(3)
    a = DA.on(proj(z.phi[1]), ("y1",))
    out = init_star(DA.ambient.register("y"), ket(0, 2), 1, a, DA)
    assert out.close_to(z.epsilon * DA.identity(), 1e-12)


def test_fv_subset_examples():
    p = DA.on(proj([1, 0]), ("y1",))
    assert fv_subset(p, DA.full.select(["y1"]))
    eq = DA.eq("y")
    assert not fv_subset(eq, DA.full.select(["y1"]))
    assert fv_subset_defect(eq, DA.full.select(["y1"])) > 0.1
    assert fv_subset(DA.identity(), Register())


def test_side_dual_matches_rule_shape():
    rng = rng_of(2)
    u = random_unitary(2, rng)
    a = random_expectation(DA2, rng)
    y = DA2.ambient.register("y")
    out = side_dual(Apply(u, y), 2, a, DA2)
    k = DA2.lift_side(u, y, 2)
    assert out.close_to(a.conj_by(k.adjoint()), 1e-12)


def test_check_rejects_indefinite():
    with pytest.raises(ValueError, match="positive"):
        DA.check(-1 * DA.identity())
    with pytest.raises(ValueError, match="act on"):
        DA.check(LabeledOperator.identity(DA.left))


# -- Zeno invariant algebra ---------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_zeno_invariant_step(n):
    z = ZenoInstance(n)
    inv = build_invariant(z)
    step = step_operator(z)
    pb = p_both(z)
    for i in range(1, n):
        lhs = inv.a_x[i].conj_by(pb).conj_by(step)
        assert np.abs(lhs.matrix - a_i_x(z, i - 1).matrix).max() <= 1e-10
    lhs = inv.b.conj_by(p_none(z)).conj_by(step)
    assert np.abs(lhs.matrix - a_i_x(z, n - 1).matrix).max() <= 1e-10


def test_zeno_invariant_parts_orthogonal():
    z = ZenoInstance(4)
    inv = build_invariant(z)
    for i in range(len(inv.a_x)):
        for j in range(len(inv.a_x)):
            if i != j:
                assert np.abs((inv.a_x[i] @ inv.a_x[j]).matrix).max() <= 1e-12


# -- properties ---------------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_restrict_star_duality(seed):
    rng = rng_of(seed)
    da = random_da(rng)
    m = random_measurement(random_subregister(da.ambient, rng), rng)
    a = random_expectation(da, rng)
    rho = random_density(da.dim, rng)
    side = int(rng.integers(1, 3))
    for t in (True, False):
        k = da.lift_side(m.kraus(t), m.register, side).matrix
        lhs = np.trace(a.matrix @ k @ rho @ k.conj().T)
        rhs = np.trace(restrict_star(m, side, t, a, da).matrix @ rho)
        assert abs(lhs - rhs) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_restrict_star2_factorises(seed):
    rng = rng_of(seed)
    da = random_da(rng)
    m = random_measurement(random_subregister(da.ambient, rng), rng)
    n = random_measurement(random_subregister(da.ambient, rng), rng)
    a = random_expectation(da, rng)
    for t in (True, False):
        for u in (True, False):
            both = restrict_star2(m, n, t, u, a, da)
            one = restrict_star(m, 1, t, restrict_star(n, 2, u, a, da), da)
            other = restrict_star(n, 2, u, restrict_star(m, 1, t, a, da), da)
            assert both.close_to(one, 1e-10) and both.close_to(other, 1e-10)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_measurement_branches_sum_to_identity(seed):
    rng = rng_of(seed)
    da = random_da(rng)
    m = random_measurement(random_subregister(da.ambient, rng), rng)
    side = int(rng.integers(1, 3))
    total = restrict_star(m, side, True, da.identity(), da) + restrict_star(m, side, False, da.identity(), da)
    assert total.close_to(da.identity(), 1e-10)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_side_dual_duality(seed):
    rng = rng_of(seed)
    da = random_da(rng)
    x = random_subregister(da.ambient, rng)
    u = random_unitary(x.dim, rng)
    a = random_expectation(da, rng)
    side = int(rng.integers(1, 3))
    rho = random_density(da.dim, rng)
    k = lift_matrix(u, da.side(x, side), da.full)
    lhs = np.trace(a.matrix @ k @ rho @ k.conj().T)
    rhs = np.trace(side_dual(Apply(u, x), side, a, da).matrix @ rho)
    assert abs(lhs - rhs) <= 1e-10
