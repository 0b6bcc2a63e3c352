"""Finite-dimensional linear algebra over named registers.

Every operator is tagged with the register it acts on. Factors are always
stored in canonical order (sorted by variable name), so that ``a (x) b`` and
``b (x) a`` yield identical objects, just as tensor products of named systems
commute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

TOL = 1e-9


@dataclass(frozen=True, order=True)
class Variable:
    name: str
    dim: int

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name must be non-empty")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"variable {self.name!r}: dim must be a positive integer, got {self.dim}")

    def __repr__(self):
        return f"{self.name}:{self.dim}"


@dataclass(frozen=True)
class Register:
    """An ordered list of distinct variables."""

    vars: tuple[Variable, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        names = [v.name for v in self.vars]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in register {names}")

    @classmethod
    def of(cls, *vars: Variable) -> Register:
        return cls(tuple(vars))

    def __iter__(self) -> Iterator[Variable]:
        return iter(self.vars)

    def __len__(self):
        return len(self.vars)

    def __contains__(self, item):
        if isinstance(item, str):
            return item in self.names
        return item in self.vars

    def __add__(self, other: Register) -> Register:
        return Register(self.vars + other.vars)

    def __repr__(self):
        return "Register(" + " ".join(map(repr, self.vars)) + ")"

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.vars)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(v.dim for v in self.vars)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def canonical(self) -> Register:
        return Register(tuple(sorted(self.vars, key=lambda v: v.name)))

    def is_canonical(self) -> bool:
        return list(self.names) == sorted(self.names)

    def issubset(self, other: Register) -> bool:
        return all(v in other.vars for v in self.vars)

    def isdisjoint(self, other: Register) -> bool:
        theirs = set(other.names)
        return not any(n in theirs for n in self.names)

    def minus(self, other: Register) -> Register:
        drop = set(other.names)
        return Register(tuple(v for v in self.vars if v.name not in drop))

    def union(self, other: Register) -> Register:
        """Union preserving the order of ``self`` first; shared names must agree."""
        mine = {v.name: v for v in self.vars}
        extra = []
        for v in other.vars:
            if v.name in mine:
                if mine[v.name] != v:
                    raise ValueError(f"variable {v.name!r} declared with two dimensions")
            else:
                extra.append(v)
        return Register(self.vars + tuple(extra))

    def lookup(self, name: str) -> Variable:
        for v in self.vars:
            if v.name == name:
                return v
        raise KeyError(name)

    def select(self, names: Iterable[str]) -> Register:
        return Register(tuple(self.lookup(n) for n in names))

    def rename(self, mapping: Mapping[str, str]) -> Register:
        return Register(tuple(Variable(mapping.get(v.name, v.name), v.dim) for v in self.vars))


def _check_finite(m: np.ndarray):
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")


def permutation_of(src: Register, dst: Register) -> list[int]:
    """Axis permutation taking factor order ``src`` to order ``dst``."""
    if sorted(src.names) != sorted(dst.names):
        raise ValueError(f"registers {src.names} and {dst.names} hold different variables")
    pos = {n: i for i, n in enumerate(src.names)}
    return [pos[n] for n in dst.names]


def permute_operator(m: np.ndarray, src: Register, dst: Register) -> np.ndarray:
    """Reorder the tensor factors of a square matrix from ``src`` to ``dst``."""
    perm = permutation_of(src, dst)
    if perm == sorted(perm):
        return m
    n = len(perm)
    t = m.reshape(src.dims + src.dims)
    t = t.transpose(perm + [n + p for p in perm])
    return t.reshape(dst.dim, dst.dim)


def permute_vector(v: np.ndarray, src: Register, dst: Register) -> np.ndarray:
    perm = permutation_of(src, dst)
    if perm == sorted(perm):
        return v
    return v.reshape(src.dims).transpose(perm).reshape(dst.dim)


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def min_eigenvalue(m: np.ndarray) -> float:
    if m.shape == (0, 0):
        return 0.0
    return float(np.linalg.eigvalsh(hermitian_part(m))[0])


def opnorm(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def trace_norm(m: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


class LabeledOperator:
    """A square matrix acting on the tensor product of a register's variables.

    The register may be given in any order; the stored form is canonical.
    """

    __slots__ = ("register", "matrix")

    def __init__(self, register: Register, matrix):
        matrix = np.array(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {matrix.shape}")
        if matrix.shape[0] != register.dim:
            raise ValueError(
                f"matrix dimension {matrix.shape[0]} does not match register {register!r} (dim {register.dim})"
            )
        _check_finite(matrix)
        canon = register.canonical()
        matrix = permute_operator(matrix, register, canon)
        matrix.flags.writeable = False
        self.register = canon
        self.matrix = matrix

    @classmethod
    def identity(cls, register: Register) -> LabeledOperator:
        return cls(register, np.eye(register.dim))

    @classmethod
    def zero(cls, register: Register) -> LabeledOperator:
        return cls(register, np.zeros((register.dim, register.dim)))

    @property
    def dim(self) -> int:
        return self.register.dim

    def __repr__(self):
        return f"LabeledOperator({self.register!r}, shape={self.matrix.shape})"

    def _same(self, other: LabeledOperator):
        if self.register != other.register:
            raise ValueError(f"register mismatch: {self.register!r} vs {other.register!r}")

    def __add__(self, other: LabeledOperator) -> LabeledOperator:
        self._same(other)
        return LabeledOperator(self.register, self.matrix + other.matrix)

    def __sub__(self, other: LabeledOperator) -> LabeledOperator:
        self._same(other)
        return LabeledOperator(self.register, self.matrix - other.matrix)

    def __mul__(self, k) -> LabeledOperator:
        if isinstance(k, LabeledOperator):
            return NotImplemented
        return LabeledOperator(self.register, k * self.matrix)

    __rmul__ = __mul__

    def __truediv__(self, k) -> LabeledOperator:
        return LabeledOperator(self.register, self.matrix / k)

    def __matmul__(self, other: LabeledOperator) -> LabeledOperator:
        self._same(other)
        return LabeledOperator(self.register, self.matrix @ other.matrix)

    def __neg__(self):
        return LabeledOperator(self.register, -self.matrix)

    def adjoint(self) -> LabeledOperator:
        return LabeledOperator(self.register, self.matrix.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def matrix_in(self, order: Register) -> np.ndarray:
        """The matrix with factors arranged in the given order."""
        return permute_operator(self.matrix, self.register, order)

    def rename(self, mapping: Mapping[str, str]) -> LabeledOperator:
        return LabeledOperator(self.register.rename(mapping), self.matrix)

    def conj_by(self, b: LabeledOperator) -> LabeledOperator:
        """``b · self · b†`` (both on the same register)."""
        self._same(b)
        return LabeledOperator(self.register, b.matrix @ self.matrix @ b.matrix.conj().T)

    def extend(self, into: Register) -> LabeledOperator:
        """``self ⊗ I`` on the larger register."""
        return tensor(self, LabeledOperator.identity(into.minus(self.register)))

    def close_to(self, other: LabeledOperator, tol: float = TOL) -> bool:
        return self.register == other.register and opnorm(self.matrix - other.matrix) <= tol

    def is_hermitian(self, tol: float = TOL) -> bool:
        return opnorm(self.matrix - self.matrix.conj().T) <= tol

    def is_psd(self, tol: float = TOL) -> bool:
        return self.is_hermitian(tol) and min_eigenvalue(self.matrix) >= -tol

    def norm(self) -> float:
        return opnorm(self.matrix)


DensityOperator = LabeledOperator


class PureState:
    """A vector in the Hilbert space of a register (stored canonically)."""

    __slots__ = ("register", "vector")

    def __init__(self, register: Register, vector):
        vector = np.array(vector, dtype=complex).reshape(-1)
        if vector.shape[0] != register.dim:
            raise ValueError(f"vector length {vector.shape[0]} does not match register dim {register.dim}")
        _check_finite(vector)
        canon = register.canonical()
        vector = permute_vector(vector, register, canon)
        vector.flags.writeable = False
        self.register = canon
        self.vector = vector

    @classmethod
    def basis(cls, register: Register, index: int | Sequence[int]) -> PureState:
        """``|i⟩`` given a flat index or one index per variable (in ``register`` order)."""
        if not isinstance(index, (int, np.integer)):
            index = int(np.ravel_multi_index(tuple(index), register.dims))
        v = np.zeros(register.dim, dtype=complex)
        v[index] = 1
        return cls(register, v)

    def __repr__(self):
        return f"PureState({self.register!r})"

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def is_normalized(self, tol: float = TOL) -> bool:
        return abs(self.norm() - 1) <= tol

    def density(self) -> LabeledOperator:
        return LabeledOperator(self.register, np.outer(self.vector, self.vector.conj()))

    def rename(self, mapping: Mapping[str, str]) -> PureState:
        return PureState(self.register.rename(mapping), self.vector)

    def vector_in(self, order: Register) -> np.ndarray:
        return permute_vector(self.vector, self.register, order)


def product_state(*states: PureState) -> PureState:
    reg = Register()
    v = np.ones(1, dtype=complex)
    for s in states:
        if not reg.isdisjoint(s.register):
            raise ValueError("product of states on overlapping registers")
        reg = reg + s.register
        v = np.kron(v, s.vector)
    return PureState(reg, v)


def proj(v) -> np.ndarray:
    """``v v†`` for a plain vector."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


class BinaryMeasurement:
    """Kraus pair ``(M_true, M_false)`` acting on a register."""

    __slots__ = ("register", "m_true", "m_false")

    def __init__(self, register: Register, m_true, m_false):
        m_true = np.array(m_true, dtype=complex)
        m_false = np.array(m_false, dtype=complex)
        for m in (m_true, m_false):
            if m.shape != (register.dim, register.dim):
                raise ValueError(f"Kraus operator shape {m.shape} does not match register dim {register.dim}")
            _check_finite(m)
        canon = register.canonical()
        self.register = canon
        self.m_true = permute_operator(m_true, register, canon)
        self.m_false = permute_operator(m_false, register, canon)
        self.m_true.flags.writeable = False
        self.m_false.flags.writeable = False

    @classmethod
    def projective(cls, register: Register, p) -> BinaryMeasurement:
        p = np.asarray(p, dtype=complex)
        return cls(register, p, np.eye(register.dim) - p)

    def kraus(self, outcome: bool) -> np.ndarray:
        return self.m_true if outcome else self.m_false

    def rename(self, mapping: Mapping[str, str]) -> BinaryMeasurement:
        return BinaryMeasurement(self.register.rename(mapping), self.m_true, self.m_false)

    def __eq__(self, other):
        if not isinstance(other, BinaryMeasurement):
            return NotImplemented
        return (
            self.register == other.register
            and np.array_equal(self.m_true, other.m_true)
            and np.array_equal(self.m_false, other.m_false)
        )

    __hash__ = None

    def __repr__(self):
        return f"BinaryMeasurement({self.register!r})"


# --- operations ---------------------------------------------------------------


def tensor(a: LabeledOperator, b: LabeledOperator) -> LabeledOperator:
    if not a.register.isdisjoint(b.register):
        raise ValueError(f"tensor of overlapping registers {a.register.names} and {b.register.names}")
    return LabeledOperator(a.register + b.register, np.kron(a.matrix, b.matrix))


def lift(u, on: Register, into: Register) -> LabeledOperator:
    """``u ⊗ I``: the operator acting as ``u`` on ``on`` (in the given order) inside ``into``."""
    u = np.asarray(u, dtype=complex)
    if not on.issubset(into):
        raise ValueError(f"register {on.names} is not contained in {into.names}")
    if u.shape != (on.dim, on.dim):
        raise ValueError(f"operator of shape {u.shape} cannot act on {on!r} (dim {on.dim})")
    rest = into.minus(on)
    return LabeledOperator(on + rest, np.kron(u, np.eye(rest.dim)))


def lift_matrix(u, on: Register, into: Register) -> np.ndarray:
    """Like :func:`lift` but returns the plain matrix in the factor order of ``into``."""
    return lift(u, on, into).matrix_in(into)


def partial_trace(rho: LabeledOperator, out: Register) -> LabeledOperator:
    if not out.issubset(rho.register):
        raise ValueError(f"cannot trace out {out.names}: not in {rho.register.names}")
    keep = rho.register.minus(out)
    return LabeledOperator(keep, partial_trace_matrix(rho.matrix, rho.register, keep))


def partial_trace_matrix(m: np.ndarray, register: Register, keep: Register) -> np.ndarray:
    """Trace out everything except ``keep``; result factors ordered as ``keep``."""
    out = register.minus(keep)
    t = permute_operator(m, register, keep + out)
    dk, do = keep.dim, out.dim
    return np.einsum("iaja->ij", t.reshape(dk, do, dk, do))


def swap_operator(x1: Register, x2: Register) -> LabeledOperator:
    """The unitary exchanging ``x1[i]`` with ``x2[i]`` for every position ``i``."""
    if x1.dims != x2.dims:
        raise ValueError(f"SWAP needs equal dimension profiles, got {x1.dims} and {x2.dims}")
    if not x1.isdisjoint(x2):
        raise ValueError("SWAP registers overlap")
    d = x1.dim
    s = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            s[j * d + i, i * d + j] = 1
    return LabeledOperator(x1 + x2, s)


def equality_projector(x1: Register, x2: Register) -> LabeledOperator:
    """Projector ``(I + SWAP)/2`` onto the swap-symmetric subspace of ``x1 x2``."""
    s = swap_operator(x1, x2)
    return (LabeledOperator.identity(s.register) + s) / 2


def loewner_gap(a: LabeledOperator, b: LabeledOperator, tol: float = TOL) -> float:
    """Smallest eigenvalue of ``b - a``."""
    if a.register != b.register:
        raise ValueError(f"register mismatch: {a.register!r} vs {b.register!r}")
    for name, op in (("a", a), ("b", b)):
        if not op.is_hermitian(max(tol, 1e-12) * max(1.0, op.norm()) * 10):
            raise ValueError(f"loewner_leq: {name} is not Hermitian")
    return min_eigenvalue(b.matrix - a.matrix)


def loewner_leq(a: LabeledOperator, b: LabeledOperator, tol: float = TOL) -> bool:
    return loewner_gap(a, b, tol) >= -tol


def check_kraus_pair(m: BinaryMeasurement, tol: float = TOL) -> bool:
    return kraus_defect(m) <= tol


def kraus_defect(m: BinaryMeasurement) -> float:
    t, f = m.m_true, m.m_false
    if t.shape != f.shape or t.shape[0] != t.shape[1]:
        return math.inf
    return opnorm(t.conj().T @ t + f.conj().T @ f - np.eye(t.shape[0]))


def isometry_defect(u) -> float:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] < u.shape[1]:
        return math.inf
    return opnorm(u.conj().T @ u - np.eye(u.shape[1]))


def check_isometry(u, tol: float = TOL) -> bool:
    return isometry_defect(u) <= tol


def psd_decompose(m: np.ndarray, tol: float = TOL, cutoff: float = 1e-15) -> list[tuple[float, np.ndarray]]:
    """Spectral decomposition of a PSD matrix into weighted unit vectors.

    Eigenvalues below ``-tol`` mean the input is not PSD and raise; tiny ones
    (``<= cutoff``) are dropped.
    """
    w, v = np.linalg.eigh(hermitian_part(m))
    if w.size and w[0] < -tol:
        raise ValueError(f"cannot decompose a non-PSD operator (eigenvalue {w[0]:.3e})")
    return [(float(w[k]), v[:, k]) for k in range(len(w)) if w[k] > cutoff]


def clip_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(m))
    w = np.clip(w, 0, None)
    return (v * w) @ v.conj().T


# --- separable couplings ------------------------------------------------------


@dataclass
class SeparableEnsemble:
    """``Σ_j p_j · left_j ⊗ right_j`` with unit-trace PSD factors.

    Factors are plain matrices in the factor order of ``left_register`` and
    ``right_register``; the two registers are usually copies of the same
    ambient register.
    """

    left_register: Register
    right_register: Register
    terms: list[tuple[float, np.ndarray, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        for p, _, _ in self.terms:
            if p < 0:
                raise ValueError(f"negative ensemble weight {p}")

    def __len__(self):
        return len(self.terms)

    def add(self, weight: float, left: np.ndarray, right: np.ndarray):
        """Add ``weight · left ⊗ right``; factors need not be normalised."""
        tl = float(np.real(np.trace(left)))
        tr = float(np.real(np.trace(right)))
        w = weight * tl * tr
        if w <= 0 or tl <= 0 or tr <= 0:
            return
        self.terms.append((w, left / tl, right / tr))

    def extend(self, other: SeparableEnsemble, scale: float = 1.0):
        for p, a, b in other.terms:
            if p * scale > 0:
                self.terms.append((p * scale, a, b))

    def scaled(self, k: float) -> SeparableEnsemble:
        return SeparableEnsemble(self.left_register, self.right_register, [(p * k, a, b) for p, a, b in self.terms if p * k > 0])

    def swapped(self) -> SeparableEnsemble:
        return SeparableEnsemble(self.right_register, self.left_register, [(p, b, a) for p, a, b in self.terms])

    def trace(self) -> float:
        return float(sum(p for p, _, _ in self.terms))

    def marginal_left(self) -> np.ndarray:
        out = np.zeros((self.left_register.dim,) * 2, dtype=complex)
        for p, a, _ in self.terms:
            out += p * a
        return out

    def marginal_right(self) -> np.ndarray:
        out = np.zeros((self.right_register.dim,) * 2, dtype=complex)
        for p, _, b in self.terms:
            out += p * b
        return out

    def left(self) -> LabeledOperator:
        return LabeledOperator(self.left_register, self.marginal_left())

    def right(self) -> LabeledOperator:
        return LabeledOperator(self.right_register, self.marginal_right())

    def matrix(self) -> np.ndarray:
        """The joint state in block order (left factors, then right factors)."""
        d = self.left_register.dim * self.right_register.dim
        out = np.zeros((d, d), dtype=complex)
        for p, a, b in self.terms:
            out += p * np.kron(a, b)
        return out

    def to_operator(self) -> LabeledOperator:
        return LabeledOperator(self.left_register + self.right_register, self.matrix())

    def expect_blocked(self, b4: np.ndarray) -> float:
        """``tr(B ρ)`` for ``B`` given as a ``(d1, d2, d1, d2)`` block tensor."""
        total = 0.0
        for p, a, bb in self.terms:
            total += p * np.real(np.einsum("iajb,ji,ba->", b4, a, bb))
        return float(total)

    def expect(self, b: LabeledOperator) -> float:
        order = self.left_register + self.right_register
        d1, d2 = self.left_register.dim, self.right_register.dim
        return self.expect_blocked(b.matrix_in(order).reshape(d1, d2, d1, d2))

    def compact(self, atol: float = 1e-12) -> SeparableEnsemble:
        """Merge terms that share a left (or right) factor; the state is unchanged."""
        merged: list[list] = []
        for p, a, b in self.terms:
            for slot in merged:
                q, a2, b2 = slot
                if np.allclose(a, a2, rtol=0, atol=atol):
                    slot[0], slot[2] = p + q, (q * b2 + p * b) / (p + q)
                    break
                if np.allclose(b, b2, rtol=0, atol=atol):
                    slot[0], slot[1] = p + q, (q * a2 + p * a) / (p + q)
                    break
            else:
                merged.append([p, a, b])
        return SeparableEnsemble(self.left_register, self.right_register, [tuple(s) for s in merged])
