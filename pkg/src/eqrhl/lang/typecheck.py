"""Well-typedness checks for programs."""

from __future__ import annotations

from dataclasses import dataclass

from ..linalg import TOL, isometry_defect, kraus_defect
from .ast import Ambient, Apply, If, Init, Program, Seq, Skip, While


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # "isometry", "normalization", "kraus", "scope", "shape"
    message: str

    def __str__(self):
        return f"{self.kind}: {self.message}"


def typecheck(p: Program, ambient: Ambient, tol: float = TOL) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    _check(p, ambient, tol, out)
    return out


def _scope(reg, ambient, out):
    for v in reg:
        if v.name not in ambient.all_vars:
            out.append(Diagnostic("scope", f"variable {v.name!r} is not declared"))
        elif ambient.all_vars.lookup(v.name).dim != v.dim:
            out.append(Diagnostic("scope", f"variable {v.name!r} has dim {v.dim}, declared {ambient.all_vars.lookup(v.name).dim}"))


def _check(p, ambient, tol, out):
    if isinstance(p, Skip):
        return
    if isinstance(p, Apply):
        _scope(p.on, ambient, out)
        if p.u.shape != (p.on.dim, p.on.dim):
            out.append(Diagnostic("shape", f"matrix of shape {p.u.shape} applied to {p.on.names}"))
            return
        defect = isometry_defect(p.u)
        if defect > tol:
            out.append(Diagnostic("isometry", f"apply on {' '.join(p.on.names)}: not an isometry (defect {defect:.3e})"))
        return
    if isinstance(p, Init):
        _scope(p.on, ambient, out)
        if p.psi.shape != (p.on.dim,):
            out.append(Diagnostic("shape", f"state of length {p.psi.shape[0]} for {p.on.names}"))
            return
        if not p.state.is_normalized(tol):
            out.append(Diagnostic("normalization", f"init {' '.join(p.on.names)}: state has norm {p.state.norm():.6g}"))
        return
    if isinstance(p, (If, While)):
        _scope(p.m.register, ambient, out)
        defect = kraus_defect(p.m)
        if defect > tol:
            out.append(Diagnostic("kraus", f"measurement on {' '.join(p.m.register.names)}: Kraus defect {defect:.3e}"))
        for q in (p.then, p.else_) if isinstance(p, If) else (p.body,):
            _check(q, ambient, tol, out)
        return
    if isinstance(p, Seq):
        for q in p.items:
            _check(q, ambient, tol, out)
        return
    raise TypeError(f"not a program: {p!r}")
