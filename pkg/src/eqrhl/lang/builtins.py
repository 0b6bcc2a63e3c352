"""Named matrix constructors available in program text."""

from __future__ import annotations

import math

import numpy as np


def rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def shift(m: int) -> np.ndarray:
    """Cyclic increment ``|i⟩ ↦ |i+1 mod m⟩``."""
    out = np.zeros((m, m), dtype=complex)
    for i in range(m):
        out[(i + 1) % m, i] = 1
    return out


def proj_lt(k: int, dim: int) -> np.ndarray:
    """Diagonal projector onto ``|i⟩`` with ``i < k``."""
    return np.diag([1.0 + 0j if i < k else 0j for i in range(dim)])


def proj_state(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    nrm2 = float(np.real(np.vdot(v, v)))
    if nrm2 == 0:
        raise ValueError("proj_state of the zero vector")
    return np.outer(v, v.conj()) / nrm2


def ket(i: int, dim: int) -> np.ndarray:
    if not 0 <= i < dim:
        raise ValueError(f"ket({i}) out of range for dimension {dim}")
    v = np.zeros(dim, dtype=complex)
    v[i] = 1
    return v


_ARITY = {"rot": 1, "shift": 1, "proj_lt": 1, "proj_state": 1, "literal": 1}


def builtin_matrix(name: str, params: list, dim_context: int | None = None) -> np.ndarray:
    """Evaluate a builtin by name.

    ``dim_context`` is the dimension of the register the matrix will act on;
    ``proj_lt`` needs it, the others check against it when given.
    """
    if name not in _ARITY:
        raise ValueError(f"unknown builtin {name!r}")
    if len(params) != _ARITY[name]:
        raise ValueError(f"{name} takes {_ARITY[name]} argument(s), got {len(params)}")
    (arg,) = params
    if name == "rot":
        out = rot(float(np.real(arg)))
    elif name == "shift":
        out = shift(_as_int(arg, name))
    elif name == "proj_lt":
        if dim_context is None:
            raise ValueError("proj_lt needs the dimension of the register it acts on")
        out = proj_lt(_as_int(arg, name), dim_context)
    elif name == "proj_state":
        out = proj_state(arg)
    else:
        out = np.asarray(arg, dtype=complex)
        if out.ndim != 2:
            raise ValueError("literal matrix must be two-dimensional")
    if dim_context is not None and out.shape != (dim_context, dim_context):
        raise ValueError(f"{name}: matrix of shape {out.shape} does not fit a register of dimension {dim_context}")
    return out


def _as_int(x, name) -> int:
    if isinstance(x, complex):
        if x.imag != 0:
            raise ValueError(f"{name}: expected an integer, got {x}")
        x = x.real
    if int(x) != x:
        raise ValueError(f"{name}: expected an integer, got {x}")
    return int(x)
