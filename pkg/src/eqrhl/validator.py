"""Numerical checking and refutation of judgments.

:func:`check_witness` evaluates a derivation's witness on sampled pure inputs
and measures how far it is from satisfying the coupling contract.
:func:`falsify` searches for inputs on which *no* coupling (separable or not)
can meet the postcondition, using the dual of the coupling problem.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .expectations import DoubledAmbient
from .linalg import LabeledOperator, PureState, Register, trace_norm
from .proofs.core import Derivation, Judgment
from .semantics import DEFAULT_POLICY, Policy, compile_program, run

DEFAULT_SEED = 42
BASIS_CAP = 64


def haar_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_pure(register: Register, seed) -> PureState:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return PureState(register, haar_vector(register.dim, rng))


def sample_pairs(dim: int, samples: int, seed: int, basis_cap: int = BASIS_CAP):
    """Deterministic input pairs: all basis pairs (if ``dim² ≤ basis_cap``), then Haar pairs."""
    pairs = []
    if dim * dim <= basis_cap:
        eye = np.eye(dim, dtype=complex)
        pairs.extend((eye[i], eye[j]) for i, j in itertools.product(range(dim), repeat=2))
    rng = np.random.default_rng(seed)
    pairs.extend((haar_vector(dim, rng), haar_vector(dim, rng)) for _ in range(samples))
    return pairs


# -- witness checking ------------------------------------------------------------


@dataclass
class PairResult:
    index: int
    marginal_residual: float
    slack: float
    pre_value: float
    post_value: float


@dataclass
class CheckReport:
    samples: int
    worst_marginal_residual: float
    worst_slack: float
    passed: bool
    seed: int
    tol_marginal: float = 1e-8
    tol_slack: float = 1e-8
    worst_marginal_index: int = -1
    worst_slack_index: int = -1
    results: list[PairResult] = field(default_factory=list, repr=False)

    @property
    def pass_(self) -> bool:
        return self.passed

    @classmethod
    def merge(cls, parts: list[CheckReport]) -> CheckReport:
        """Combine reports over disjoint sample sets (associative)."""
        results = [r for p in parts for r in p.results]
        base = parts[0]
        return _summarise(results, base.seed, base.tol_marginal, base.tol_slack)

    def to_lines(self) -> list[tuple[str, str]]:
        return [
            ("samples", str(self.samples)),
            ("seed", str(self.seed)),
            ("tol_marginal", f"{self.tol_marginal:.3e}"),
            ("tol_slack", f"{self.tol_slack:.3e}"),
            ("worst_marginal_residual", f"{self.worst_marginal_residual:.6e}"),
            ("worst_marginal_sample", str(self.worst_marginal_index)),
            ("worst_slack", f"{self.worst_slack:.6e}"),
            ("worst_slack_sample", str(self.worst_slack_index)),
        ]

    def serialize(self) -> str:
        lines = [f"{k}={v}" for k, v in self.to_lines()]
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines) + "\n"


def _summarise(results: list[PairResult], seed, tol_marginal, tol_slack) -> CheckReport:
    if not results:
        return CheckReport(0, 0.0, 0.0, True, seed, tol_marginal, tol_slack)
    worst_m = max(results, key=lambda r: r.marginal_residual)
    worst_s = min(results, key=lambda r: r.slack)
    passed = worst_m.marginal_residual <= tol_marginal and worst_s.slack >= -tol_slack
    return CheckReport(
        len(results),
        worst_m.marginal_residual,
        worst_s.slack,
        passed,
        seed,
        tol_marginal,
        tol_slack,
        worst_m.index,
        worst_s.index,
        sorted(results, key=lambda r: r.index),
    )


class _Evaluator:
    """Everything needed to score one input pair, precomputed once."""

    def __init__(self, d: Derivation, policy: Policy):
        j = d.conclusion
        self.da = da = d.da
        reg = da.ambient.all_vars
        self.witness = d.witness
        self.cc = compile_program(j.left, reg)
        self.cd = compile_program(j.right, reg)
        self.policy = policy
        n = reg.dim
        self.n = n
        self.pre = da.blocked_matrix(j.pre)
        self.post4 = da.blocked_matrix(j.post).reshape(n, n, n, n)

    def evaluate(self, index: int, v1: np.ndarray, v2: np.ndarray) -> PairResult:
        ens = self.witness(v1, v2)
        a1 = np.outer(v1, v1.conj())
        a2 = np.outer(v2, v2.conj())
        out1 = run(self.cc, a1, self.policy)
        out2 = run(self.cd, a2, self.policy)
        residual = max(trace_norm(ens.marginal_left() - out1), trace_norm(ens.marginal_right() - out2))
        v = np.kron(v1, v2)
        pre_value = float(np.real(v.conj() @ self.pre @ v))
        post_value = ens.expect_blocked(self.post4)
        return PairResult(index, residual, post_value - pre_value, pre_value, post_value)


def check_witness(
    d: Derivation,
    samples: int = 20,
    seed: int = DEFAULT_SEED,
    tol_marginal: float = 1e-8,
    tol_slack: float = 1e-8,
    policy: Policy = DEFAULT_POLICY,
    jobs: int = 1,
    pairs=None,
) -> CheckReport:
    """Evaluate the witness of ``d`` on basis pairs plus ``samples`` Haar pairs."""
    ev = _Evaluator(d, policy)
    if pairs is None:
        pairs = sample_pairs(ev.n, samples, seed)
    indexed = list(enumerate(pairs))

    def one(item):
        i, (v1, v2) = item
        try:
            return ev.evaluate(i, np.asarray(v1, dtype=complex), np.asarray(v2, dtype=complex))
        except Exception as exc:  # noqa: BLE001 - re-raised with context
            raise RuntimeError(f"witness evaluation failed on sample {i}: {exc}") from exc

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(one, indexed))
    else:
        results = [one(item) for item in indexed]
    return _summarise(results, seed, tol_marginal, tol_slack)


def witness_value(d: Derivation, v1: np.ndarray, v2: np.ndarray, post: LabeledOperator | None = None) -> float:
    """``tr(B ρ′)`` for the witness output ``ρ′`` on the given pure inputs.

    ``B`` defaults to the conclusion's postcondition.
    """
    v1 = np.asarray(v1, dtype=complex)
    v2 = np.asarray(v2, dtype=complex)
    if post is None:
        return _Evaluator(d, DEFAULT_POLICY).evaluate(0, v1, v2).post_value
    return d.witness(v1, v2).expect(post)


# -- dual bound ------------------------------------------------------------------


@dataclass
class DualBound:
    y1: LabeledOperator
    y2: LabeledOperator
    value: float
    iterations: int
    feasibility_gap: float  # λ_min(Y1⊗I + I⊗Y2 − B) at the returned point

    def audit(self, b: LabeledOperator, out1, out2, da: DoubledAmbient, tol: float = 1e-8) -> bool:
        """Independently recheck feasibility and the value."""
        s = _sum_operator(self.y1.matrix_in(da.left), self.y2.matrix_in(da.right)) - da.blocked_matrix(b)
        lam = float(np.linalg.eigvalsh((s + s.conj().T) / 2)[0])
        value = _pair_value(self.y1.matrix_in(da.left), self.y2.matrix_in(da.right), out1, out2)
        return lam >= -tol and abs(value - self.value) <= tol * max(1.0, abs(value))


def _sum_operator(y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
    return np.kron(y1, np.eye(y2.shape[0])) + np.kron(np.eye(y1.shape[0]), y2)


def _pair_value(y1, y2, o1, o2) -> float:
    return float(np.real(np.trace(y1 @ o1) + np.trace(y2 @ o2)))


def _as_matrix(x, reg: Register) -> np.ndarray:
    if isinstance(x, LabeledOperator):
        return x.matrix_in(reg)
    return np.asarray(x, dtype=complex)


def dual_upper_bound(
    b: LabeledOperator,
    out1,
    out2,
    iters: int = 500,
    tol: float = 1e-9,
    target: float | None = None,
) -> DualBound:
    """An upper bound on ``max tr(B ρ′)`` over all couplings of ``out1`` and ``out2``.

    Any Hermitian ``Y1, Y2`` with ``Y1⊗I + I⊗Y2 ⪰ B`` give
    ``tr(B ρ′) ≤ tr(Y1 out1) + tr(Y2 out2)``. The objective
    ``F = tr(Y1 o1) + tr(Y2 o2) + t·λ_max(B − Y1⊗I − I⊗Y2)`` is the value after
    shifting to feasibility, so every iterate yields a valid bound; it is
    minimised by subgradient steps of size ``1/k``. ``out1`` and ``out2`` are
    matrices in the ambient order of the respective copy (or labelled operators).
    With ``target`` the search stops as soon as the bound drops below it.
    """
    da = DoubledAmbient.infer(b.register)
    o1 = _as_matrix(out1, da.left)
    o2 = _as_matrix(out2, da.right)
    t1, t2 = float(np.real(np.trace(o1))), float(np.real(np.trace(o2)))
    if abs(t1 - t2) > max(tol, 1e-8):
        raise ValueError(f"outputs have different traces ({t1:.12g} vs {t2:.12g}): no coupling exists")
    t = 0.5 * (t1 + t2)
    bm = da.blocked_matrix(b)
    bm = (bm + bm.conj().T) / 2
    n1, n2 = o1.shape[0], o2.shape[0]
    y1 = np.zeros((n1, n1), dtype=complex)
    y2 = np.zeros((n2, n2), dtype=complex)

    def objective(y1, y2):
        s = bm - _sum_operator(y1, y2)
        w, v = np.linalg.eigh(s)
        return _pair_value(y1, y2, o1, o2) + t * w[-1], w[-1], v[:, -1]

    f, lam, vec = objective(y1, y2)
    best = (f, y1, y2, lam)
    k_used = 0
    scale = max(1.0, float(np.linalg.norm(bm, 2)))
    for k in range(1, iters + 1):
        if target is not None and best[0] < target:
            break
        if best[0] <= 0 and t == 0:
            break
        k_used = k
        top = np.outer(vec, vec.conj()).reshape(n1, n2, n1, n2)
        g1 = o1 - t * np.einsum("iaja->ij", top)
        g2 = o2 - t * np.einsum("aiaj->ij", top)
        gnorm = np.sqrt(np.linalg.norm(g1) ** 2 + np.linalg.norm(g2) ** 2)
        if gnorm < 1e-14:
            break
        step = scale / (k * gnorm)
        y1 = y1 - step * (g1 + g1.conj().T) / 2
        y2 = y2 - step * (g2 + g2.conj().T) / 2
        f, lam, vec = objective(y1, y2)
        if f < best[0]:
            best = (f, y1, y2, lam)
    f, y1, y2, lam = best
    # restore feasibility: Y1 += λ_max(B − Y1⊗I − I⊗Y2)·I
    y1 = y1 + lam * np.eye(n1)
    gap = float(np.linalg.eigvalsh(hermitian(_sum_operator(y1, y2) - bm))[0])
    value = _pair_value(y1, y2, o1, o2)
    return DualBound(LabeledOperator(da.left, y1), LabeledOperator(da.right, y2), value, k_used, gap)


def hermitian(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


# -- falsification ----------------------------------------------------------------


@dataclass
class Counterexample:
    index: int
    psi1: np.ndarray
    psi2: np.ndarray
    pre_value: float
    bound: DualBound | None  # None when the outputs cannot be coupled at all
    audited: bool
    reason: str = "dual bound below precondition"

    def to_lines(self) -> list[tuple[str, str]]:
        lines = [("counterexample_sample", str(self.index)), ("reason", self.reason), ("pre_value", f"{self.pre_value:.12g}")]
        if self.bound is not None:
            lines += [
                ("upper_bound", f"{self.bound.value:.12g}"),
                ("gap", f"{self.pre_value - self.bound.value:.6e}"),
                ("dual_feasibility", f"{self.bound.feasibility_gap:.6e}"),
            ]
        lines += [
            ("audit", "ok" if self.audited else "failed"),
            ("psi1", _format_vec(self.psi1)),
            ("psi2", _format_vec(self.psi2)),
        ]
        return lines


def _format_vec(v: np.ndarray) -> str:
    return "[" + ", ".join(f"{z.real:.6g}{z.imag:+.6g}i" for z in v) + "]"


@dataclass
class FalsifyResult:
    counterexample: Counterexample | None
    samples: int
    seed: int
    skipped_by_product_bound: int = 0

    @property
    def found(self) -> bool:
        return self.counterexample is not None


def falsify(
    j: Judgment,
    samples: int = 100,
    seed: int = DEFAULT_SEED,
    iters: int = 500,
    tol: float = 1e-8,
    policy: Policy = DEFAULT_POLICY,
) -> FalsifyResult:
    """Look for a pure input pair that no output coupling can serve.

    Finding nothing is not a proof of validity. Every reported
    counterexample has passed an independent feasibility audit of its dual
    certificate.
    """
    da = j.da
    reg = da.ambient.all_vars
    cc = compile_program(j.left, reg)
    cd = compile_program(j.right, reg)
    pre = da.blocked_matrix(j.pre)
    post = da.blocked_matrix(j.post)
    n = reg.dim
    post4 = post.reshape(n, n, n, n)
    pairs = sample_pairs(n, samples, seed)
    skipped = 0
    for i, (v1, v2) in enumerate(pairs):
        v = np.kron(v1, v2)
        v_pre = float(np.real(v.conj() @ pre @ v))
        o1 = run(cc, np.outer(v1, v1.conj()), policy)
        o2 = run(cd, np.outer(v2, v2.conj()), policy)
        t1, t2 = float(np.real(np.trace(o1))), float(np.real(np.trace(o2)))
        if abs(t1 - t2) > tol:
            cex = Counterexample(i, v1, v2, v_pre, None, True, f"output traces differ ({t1:.9g} vs {t2:.9g})")
            return FalsifyResult(cex, len(pairs), seed, skipped)
        # the product coupling is feasible, so it lower-bounds every dual value
        product_value = float(np.real(np.einsum("iajb,ji,ba->", post4, o1, o2)))
        if t1 > 0 and product_value / t1 >= v_pre - tol:
            skipped += 1
            continue
        bound = dual_upper_bound(j.post, o1, o2, iters=iters, target=v_pre - tol)
        if v_pre > bound.value + tol:
            audited = bound.audit(j.post, o1, o2, da, tol)
            if audited:
                return FalsifyResult(Counterexample(i, v1, v2, v_pre, bound, True), len(pairs), seed, skipped)
    return FalsifyResult(None, len(pairs), seed, skipped)
