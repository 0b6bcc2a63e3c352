"""Denotational semantics on density operators and its Heisenberg dual.

Programs are first compiled against a concrete register order: every
``apply``, ``init`` and measurement becomes a list of Kraus matrices acting on
the whole register. Loops are evaluated as a truncated series whose dropped
mass is reported in a :class:`TailReport`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lang.ast import Ambient, Apply, If, Init, Program, Seq, Skip, While
from .linalg import TOL, LabeledOperator, Register, lift_matrix, opnorm


class NonConvergenceError(RuntimeError):
    def __init__(self, report: TailReport):
        super().__init__(
            f"loop did not converge: residual {report.residual_trace:.3e} after {report.iterations_used} iterations"
        )
        self.report = report


@dataclass(frozen=True)
class Policy:
    max_iters: int = 10_000
    tail_tol: float = 1e-9
    strict: bool = True  # raise NonConvergenceError instead of returning a partial sum

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")

    def lenient(self) -> Policy:
        return Policy(self.max_iters, self.tail_tol, strict=False)


DEFAULT_POLICY = Policy()


@dataclass
class TailReport:
    iterations_used: int = 0
    residual_trace: float = 0.0
    converged: bool = True

    def merge(self, other: TailReport):
        self.iterations_used += other.iterations_used
        self.residual_trace += other.residual_trace
        self.converged = self.converged and other.converged


# --- compilation --------------------------------------------------------------


@dataclass
class Compiled:
    """A program with all operators lifted to full-register matrices."""

    kind: str
    kraus: list = field(default_factory=list)  # apply/init: Kraus matrices
    m_true: np.ndarray | None = None
    m_false: np.ndarray | None = None
    children: list = field(default_factory=list)


def compile_program(p: Program, register: Register) -> Compiled:
    if isinstance(p, Skip):
        return Compiled("skip")
    if isinstance(p, Apply):
        return Compiled("kraus", [lift_matrix(p.u, p.on, register)])
    if isinstance(p, Init):
        # K_k = |ψ⟩⟨k| on the initialised variables, identity elsewhere
        d = p.on.dim
        kraus = []
        for k in range(d):
            op = np.zeros((d, d), dtype=complex)
            op[:, k] = p.psi
            kraus.append(lift_matrix(op, p.on, register))
        return Compiled("kraus", kraus)
    if isinstance(p, If):
        return Compiled(
            "if",
            m_true=lift_matrix(p.m.m_true, p.m.register, register),
            m_false=lift_matrix(p.m.m_false, p.m.register, register),
            children=[compile_program(p.then, register), compile_program(p.else_, register)],
        )
    if isinstance(p, While):
        return Compiled(
            "while",
            m_true=lift_matrix(p.m.m_true, p.m.register, register),
            m_false=lift_matrix(p.m.m_false, p.m.register, register),
            children=[compile_program(p.body, register)],
        )
    if isinstance(p, Seq):
        return Compiled("seq", children=[compile_program(q, register) for q in p.items])
    raise TypeError(f"not a program: {p!r}")


def _conj(k: np.ndarray, m: np.ndarray) -> np.ndarray:
    return k @ m @ k.conj().T


def _dconj(k: np.ndarray, m: np.ndarray) -> np.ndarray:
    return k.conj().T @ m @ k


def _trace(m: np.ndarray) -> float:
    return float(np.real(np.trace(m)))


def run(c: Compiled, rho: np.ndarray, policy: Policy = DEFAULT_POLICY, report: TailReport | None = None) -> np.ndarray:
    """Forward semantics on a plain matrix in the compiled register order."""
    report = report if report is not None else TailReport()
    if c.kind == "skip":
        return rho
    if c.kind == "kraus":
        if len(c.kraus) == 1:
            return _conj(c.kraus[0], rho)
        return sum(_conj(k, rho) for k in c.kraus)
    if c.kind == "seq":
        for child in c.children:
            rho = run(child, rho, policy, report)
        return rho
    if c.kind == "if":
        then, else_ = c.children
        return run(then, _conj(c.m_true, rho), policy, report) + run(else_, _conj(c.m_false, rho), policy, report)
    if c.kind == "while":
        (body,) = c.children
        out = np.zeros_like(rho)
        state = rho
        loop = TailReport(converged=False)
        for k in range(1, policy.max_iters + 1):
            out = out + _conj(c.m_false, state)
            state = run(body, _conj(c.m_true, state), policy, loop)
            loop.iterations_used = k
            residual = max(_trace(state), 0.0)
            if residual <= policy.tail_tol:
                loop.converged = True
                break
        loop.residual_trace += residual
        report.merge(loop)
        if not loop.converged and policy.strict:
            raise NonConvergenceError(loop)
        return out
    raise TypeError(c.kind)


def run_dual(c: Compiled, a: np.ndarray, policy: Policy = DEFAULT_POLICY, report: TailReport | None = None) -> np.ndarray:
    """Heisenberg dual on a plain matrix: ``tr(a · run(c, ρ)) = tr(run_dual(c, a) · ρ)``.

    For loops the reported residual is ``‖T*^K(I)‖``, the largest trace any
    unit-trace input can still carry after ``K`` rounds.
    """
    report = report if report is not None else TailReport()
    if c.kind == "skip":
        return a
    if c.kind == "kraus":
        if len(c.kraus) == 1:
            return _dconj(c.kraus[0], a)
        return sum(_dconj(k, a) for k in c.kraus)
    if c.kind == "seq":
        for child in reversed(c.children):
            a = run_dual(child, a, policy, report)
        return a
    if c.kind == "if":
        then, else_ = c.children
        return _dconj(c.m_true, run_dual(then, a, policy, report)) + _dconj(c.m_false, run_dual(else_, a, policy, report))
    if c.kind == "while":
        (body,) = c.children
        loop = TailReport(converged=False)
        term = _dconj(c.m_false, a)
        out = np.zeros_like(a)
        rest = np.eye(a.shape[0], dtype=complex)
        for k in range(1, policy.max_iters + 1):
            out = out + term
            term = _dconj(c.m_true, run_dual(body, term, policy, loop))
            rest = _dconj(c.m_true, run_dual(body, rest, policy, loop))
            loop.iterations_used = k
            residual = opnorm(rest)
            if residual <= policy.tail_tol:
                loop.converged = True
                break
        loop.residual_trace += residual
        report.merge(loop)
        if not loop.converged and policy.strict:
            raise NonConvergenceError(loop)
        return out
    raise TypeError(c.kind)


# --- public API ---------------------------------------------------------------


def _register_of(rho: LabeledOperator, c: Program) -> Register:
    reg = rho.register
    missing = c.free_names() - set(reg.names)
    if missing:
        raise ValueError(f"program uses variables {sorted(missing)} outside the state's register")
    return reg


def denote(c: Program, rho: LabeledOperator, policy: Policy = DEFAULT_POLICY) -> tuple[LabeledOperator, TailReport]:
    reg = _register_of(rho, c)
    report = TailReport()
    out = run(compile_program(c, reg), rho.matrix, policy, report)
    return LabeledOperator(reg, out), report


def dual_denote(c: Program, a: LabeledOperator, policy: Policy = DEFAULT_POLICY) -> tuple[LabeledOperator, TailReport]:
    if not a.is_hermitian(1e-8 * max(1.0, a.norm())):
        raise ValueError("dual_denote expects a Hermitian operator")
    reg = _register_of(a, c)
    report = TailReport()
    out = run_dual(compile_program(c, reg), a.matrix, policy, report)
    return LabeledOperator(reg, out), report


@dataclass(frozen=True)
class Termination:
    """Three-valued termination verdict with its certificate."""

    status: str  # "true", "false" or "unknown"
    defect: float  # ‖D − I‖ for the truncated dual D = ⟦c⟧*(I)
    residual: float
    iterations: int

    def __bool__(self):
        return self.status == "true"


def is_terminating(
    c: Program, ambient: Ambient | Register, policy: Policy = DEFAULT_POLICY, tol: float = 1e-8
) -> Termination:
    reg = ambient.all_vars if isinstance(ambient, Ambient) else ambient
    report = TailReport()
    d = run_dual(compile_program(c, reg), np.eye(reg.dim, dtype=complex), policy.lenient(), report)
    gap = np.eye(reg.dim) - (d + d.conj().T) / 2
    defect = opnorm(gap)
    # the exact dual exceeds the truncated one by at most `residual` in norm
    worst_loss = float(np.linalg.eigvalsh(gap)[-1])
    if report.residual_trace <= policy.tail_tol:
        status = "true" if defect <= tol else "false"
    elif worst_loss - report.residual_trace > tol:
        status = "false"
    else:
        status = "unknown"
    return Termination(status, defect, report.residual_trace, report.iterations_used)
