"""Program syntax trees.

Nodes compare structurally (matrices by exact value). Sequences are built
through :func:`seq`, which flattens nesting and drops ``skip``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..linalg import BinaryMeasurement, PureState, Register


class Program:
    __slots__ = ()

    def free_registers(self) -> Iterator[Register]:
        return iter(())

    def free_names(self) -> set[str]:
        names: set[str] = set()
        for reg in self.free_registers():
            names.update(reg.names)
        return names


@dataclass(frozen=True, eq=False)
class Skip(Program):
    def __eq__(self, other):
        return isinstance(other, Skip)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Apply(Program):
    """Apply the isometry ``u`` to the variables ``on`` (matrix in ``on`` order)."""

    u: np.ndarray
    on: Register

    def __post_init__(self):
        u = np.array(self.u, dtype=complex)
        u.flags.writeable = False
        object.__setattr__(self, "u", u)

    def __eq__(self, other):
        return isinstance(other, Apply) and self.on == other.on and np.array_equal(self.u, other.u)

    __hash__ = None

    def free_registers(self):
        yield self.on


@dataclass(frozen=True, eq=False)
class Init(Program):
    """Initialise ``on`` with the state ``psi`` (vector in ``on`` order)."""

    on: Register
    psi: np.ndarray

    def __post_init__(self):
        psi = np.array(self.psi, dtype=complex).reshape(-1)
        psi.flags.writeable = False
        object.__setattr__(self, "psi", psi)

    @property
    def state(self) -> PureState:
        return PureState(self.on, self.psi)

    def __eq__(self, other):
        return isinstance(other, Init) and self.on == other.on and np.array_equal(self.psi, other.psi)

    __hash__ = None

    def free_registers(self):
        yield self.on


@dataclass(frozen=True, eq=False)
class If(Program):
    m: BinaryMeasurement
    then: Program
    else_: Program

    def __eq__(self, other):
        return isinstance(other, If) and self.m == other.m and self.then == other.then and self.else_ == other.else_

    __hash__ = None

    def free_registers(self):
        yield self.m.register
        yield from self.then.free_registers()
        yield from self.else_.free_registers()


@dataclass(frozen=True, eq=False)
class While(Program):
    m: BinaryMeasurement
    body: Program

    def __eq__(self, other):
        return isinstance(other, While) and self.m == other.m and self.body == other.body

    __hash__ = None

    def free_registers(self):
        yield self.m.register
        yield from self.body.free_registers()


@dataclass(frozen=True, eq=False)
class Seq(Program):
    items: tuple[Program, ...]

    def __post_init__(self):
        items = tuple(self.items)
        if len(items) < 2 or any(isinstance(p, (Seq, Skip)) for p in items):
            raise ValueError("Seq must hold at least two non-skip, non-sequence programs; use seq()")
        object.__setattr__(self, "items", items)

    def __eq__(self, other):
        return isinstance(other, Seq) and self.items == other.items

    __hash__ = None

    def free_registers(self):
        for p in self.items:
            yield from p.free_registers()


def seq(*programs: Program) -> Program:
    flat: list[Program] = []
    for p in programs:
        if isinstance(p, Seq):
            flat.extend(p.items)
        elif not isinstance(p, Skip):
            flat.append(p)
    if not flat:
        return Skip()
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))


def if_skip(m: BinaryMeasurement) -> If:
    """A bare measurement: ``if M then skip else skip``."""
    return If(m, Skip(), Skip())


def depth(p: Program) -> int:
    if isinstance(p, If):
        return 1 + max(depth(p.then), depth(p.else_))
    if isinstance(p, While):
        return 1 + depth(p.body)
    if isinstance(p, Seq):
        return 1 + max(depth(q) for q in p.items)
    return 1


@dataclass(frozen=True)
class Ambient:
    """The fixed set of program variables."""

    all_vars: Register

    def __post_init__(self):
        if len(self.all_vars) == 0:
            raise ValueError("ambient register must be non-empty")
        object.__setattr__(self, "all_vars", self.all_vars.canonical())

    @classmethod
    def of(cls, **dims: int) -> Ambient:
        from ..linalg import Variable

        return cls(Register(tuple(Variable(n, d) for n, d in dims.items())))

    def register(self, *names: str) -> Register:
        try:
            return self.all_vars.select(names)
        except KeyError as exc:
            raise ValueError(f"unknown variable {exc.args[0]!r}") from None

    @property
    def dim(self) -> int:
        return self.all_vars.dim
