"""Command-line front end.

Subcommands: ``parse``, ``run``, ``check``, ``falsify`` and ``zeno``. With
``--format structured`` every subcommand prints ``key=value`` lines in a fixed
order and ends with ``PASS`` or ``FAIL``.

Exit codes: 0 success, 1 failed check or rule error, 2 usage or parse error,
3 loop non-convergence.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lang.ast import Ambient, Apply, If, Init, Program, Seq, Skip, While
from .lang.syntax import ParseError, Parser, format_vars, parse_file, pretty_file
from .lang.typecheck import typecheck
from .linalg import LabeledOperator
from .proofs.core import RuleError
from .proofs.fileformat import parse_derivation, parse_judgment
from .semantics import NonConvergenceError, Policy, denote, is_terminating
from .validator import DEFAULT_SEED, check_witness, falsify, witness_value

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NONCONVERGENCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = DEFAULT_SEED
    tol: float = 1e-8
    max_iters: int = 10_000
    tail_tol: float = 1e-9
    fmt: str = "text"

    def __post_init__(self):
        if not (self.tol > 0 and self.tail_tol > 0):
            raise UsageError("tolerances must be positive")

    @property
    def policy(self) -> Policy:
        return Policy(self.max_iters, self.tail_tol)


class Report:
    """Ordered key/value lines, rendered as text or as ``key=value``."""

    def __init__(self, fmt: str):
        self.fmt = fmt
        self.items: list[tuple[str, str]] = []
        self.blocks: list[str] = []

    def add(self, key: str, value) -> None:
        self.items.append((key, str(value)))

    def extend(self, pairs) -> None:
        for k, v in pairs:
            self.add(k, v)

    def block(self, text: str) -> None:
        """Free text shown only in text mode."""
        self.blocks.append(text.rstrip("\n"))

    def render(self, ok: bool) -> str:
        if self.fmt == "structured":
            lines = [f"{k}={v}" for k, v in self.items]
        else:
            lines = list(self.blocks)
            width = max((len(k) for k, _ in self.items), default=0)
            lines += [f"{k.ljust(width)} = {v}" for k, v in self.items]
        lines.append("PASS" if ok else "FAIL")
        return "\n".join(lines) + "\n"


def default_seed() -> int:
    raw = os.environ.get("EQRHL_SEED")
    if raw is None or raw.strip() == "":
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"EQRHL_SEED must be an integer, got {raw!r}") from None


def read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def fmt_complex(z: complex) -> str:
    z = complex(z)
    if z.imag == 0:
        return f"{z.real:.12g}"
    return f"{z.real:.12g}{z.imag:+.12g}i"


def fmt_matrix(m: np.ndarray) -> str:
    return "[" + "; ".join(", ".join(fmt_complex(z) for z in row) for row in m) + "]"


# -- AST dump ------------------------------------------------------------------------


def dump_ast(p: Program, indent: int = 0) -> list[str]:
    pad = "  " * indent
    if isinstance(p, Skip):
        return [f"{pad}Skip"]
    if isinstance(p, Apply):
        return [f"{pad}Apply on {format_vars(p.on)} u={fmt_matrix(p.u)}"]
    if isinstance(p, Init):
        return [f"{pad}Init {format_vars(p.on)} psi=[{', '.join(fmt_complex(z) for z in p.psi)}]"]
    if isinstance(p, If):
        lines = [f"{pad}If meas on {format_vars(p.m.register)}", f"{pad}  then:"]
        lines += dump_ast(p.then, indent + 2)
        lines.append(f"{pad}  else:")
        lines += dump_ast(p.else_, indent + 2)
        return lines
    if isinstance(p, While):
        return [f"{pad}While meas on {format_vars(p.m.register)}"] + dump_ast(p.body, indent + 1)
    if isinstance(p, Seq):
        lines = [f"{pad}Seq"]
        for q in p.items:
            lines += dump_ast(q, indent + 1)
        return lines
    raise TypeError(type(p).__name__)  # pragma: no cover


def cmd_parse(args, cfg: RunConfig) -> tuple[Report, bool]:
    ambient, prog = parse_file(read_text(args.file))
    rep = Report(cfg.fmt)
    rep.block("\n".join(dump_ast(prog)))
    rep.block(pretty_file(prog, ambient))
    rep.add("variables", format_vars(ambient.all_vars))
    rep.add("dim", ambient.dim)
    diags = typecheck(prog, ambient)
    rep.add("diagnostics", len(diags))
    for i, dg in enumerate(diags):
        rep.add(f"diagnostic.{i}", f"{dg.kind}: {dg.message}")
    return rep, not diags


# -- run ---------------------------------------------------------------------------


class _InputParser(Parser):
    """``x := ket(1); y := vec([1, 1])`` or the shorthand ``x = 1, y = 0``."""

    def parse_input(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        while self.tok.kind != "eof":
            t = self.tok
            name = self.expect_ident()
            if name not in self.ambient.all_vars:
                raise self.error(f"unknown variable {name!r}", t)
            if name in out:
                raise self.error(f"variable {name!r} given twice", t)
            dim = self.ambient.all_vars.select([name]).dim
            if self.accept(":="):
                v = self.parse_vecexpr()(dim)
            else:
                self.expect("=")
                i = self.parse_int()
                if not 0 <= i < dim:
                    raise self.error(f"basis index {i} out of range for dimension {dim}", t)
                v = np.zeros(dim, dtype=complex)
                v[i] = 1
            norm = np.linalg.norm(v)
            if norm == 0:
                raise self.error(f"zero vector for {name!r}", t)
            out[name] = v / norm
            if not (self.accept(";") or self.accept(",")):
                break
        self.expect_eof()
        return out


def initial_state(spec: str | None, ambient: Ambient) -> LabeledOperator:
    reg = ambient.all_vars
    if spec is None:
        spec = ""
    path = Path(spec) if spec else None
    if path is not None and path.suffix == ".npy" and path.is_file():
        arr = np.load(path)
        if arr.ndim == 1:
            arr = np.outer(arr, arr.conj())
        if arr.shape != (reg.dim, reg.dim):
            raise UsageError(f"input array has shape {arr.shape}, expected ({reg.dim}, {reg.dim})")
        return LabeledOperator(reg, arr)
    if path is not None and path.is_file():
        spec = path.read_text()
    vecs = _InputParser(spec, ambient).parse_input()
    psi = np.ones(1, dtype=complex)
    for v in reg:
        vec = vecs.get(v.name)
        if vec is None:
            vec = np.zeros(v.dim, dtype=complex)
            vec[0] = 1
        psi = np.kron(psi, vec)
    return LabeledOperator(reg, np.outer(psi, psi.conj()))


def cmd_run(args, cfg: RunConfig) -> tuple[Report, bool]:
    ambient, prog = parse_file(read_text(args.file))
    rho = initial_state(args.input, ambient)
    out, tail = denote(prog, rho, cfg.policy)
    rep = Report(cfg.fmt)
    rep.block(np.array2string(out.matrix, precision=6, suppress_small=True, max_line_width=120))
    rep.add("register", format_vars(out.register))
    rep.add("dim", out.register.dim)
    rep.add("trace", f"{float(np.real(np.trace(out.matrix))):.12g}")
    rep.add("rho", fmt_matrix(np.round(out.matrix, 12) + 0.0))
    rep.add("iterations_used", tail.iterations_used)
    rep.add("residual_trace", f"{tail.residual_trace:.6e}")
    rep.add("converged", str(tail.converged).lower())
    return rep, tail.converged


# -- check / falsify ---------------------------------------------------------------


def cmd_check(args, cfg: RunConfig) -> tuple[Report, bool]:
    d = parse_derivation(read_text(args.file), policy=cfg.policy)
    report = check_witness(
        d, samples=args.samples, seed=cfg.seed, tol_marginal=cfg.tol, tol_slack=cfg.tol, policy=cfg.policy, jobs=args.jobs
    )
    rep = Report(cfg.fmt)
    rep.block(d.pretty())
    rep.add("root_rule", d.rule)
    rep.add("derivation_size", d.size())
    rep.extend(report.to_lines())
    return rep, report.passed


def cmd_falsify(args, cfg: RunConfig) -> tuple[Report, bool]:
    j = parse_judgment(read_text(args.file))
    res = falsify(j, samples=args.samples, seed=cfg.seed, iters=args.iters, tol=cfg.tol, policy=cfg.policy)
    rep = Report(cfg.fmt)
    rep.add("samples", res.samples)
    rep.add("seed", res.seed)
    rep.add("skipped_by_product_bound", res.skipped_by_product_bound)
    if res.found:
        rep.add("result", "counterexample")
        rep.extend(res.counterexample.to_lines())
    else:
        rep.add("result", "none found")
    # FAIL means the judgment was refuted; the run itself succeeded
    return rep, not res.found


# -- zeno ---------------------------------------------------------------------------


def cmd_zeno(args, cfg: RunConfig) -> tuple[Report, bool]:
    from . import zeno

    n = args.n
    if n < 1:
        raise UsageError("--n must be at least 1")
    rep = Report(cfg.fmt)
    start = time.perf_counter()
    z = zeno.ZenoInstance(n, args.m)
    proof = zeno.prove_zeno(z, cfg.policy)
    d = proof.derivation
    eps_n = z.epsilon**n
    rep.add("n", n)
    rep.add("m", z.m)
    rep.add("epsilon", f"{z.epsilon:.12g}")
    rep.add("epsilon^n", f"{eps_n:.12g}")
    rep.add("conclusion_pre_coefficient", f"{float(np.real(d.pre.matrix[0, 0])):.12g}")
    rep.add("derivation_size", d.size())
    rep.add("invariant_step_gap", f"{proof.invariant_gap:.6e}")
    rep.add("middle_expectation_distance", f"{proof.d_distance:.6e}")

    c, dd = d.left, d.right
    tc, td = is_terminating(c, z.ambient, cfg.policy), is_terminating(dd, z.ambient, cfg.policy)
    rep.add("terminating_c", tc.status)
    rep.add("terminating_d", td.status)

    zero = np.zeros(z.ambient.dim, dtype=complex)
    zero[0] = 1
    value = witness_value(d, zero, zero)
    value_b = witness_value(d, zero, zero, proof.invariant.b)
    rep.add("witness_value_00_loop_post", f"{value_b:.12g}")
    rep.add("witness_value_00", f"{value:.12g}")
    rep.add("witness_value_minus_epsilon^n", f"{value_b - eps_n:.6e}")

    report = check_witness(d, samples=args.samples, seed=cfg.seed, tol_marginal=cfg.tol, tol_slack=cfg.tol,
                           policy=cfg.policy, jobs=args.jobs)
    rep.extend((f"check.{k}", v) for k, v in report.to_lines())
    rep.add("check", "PASS" if report.passed else "FAIL")
    ok = report.passed and bool(tc) and bool(td)

    if args.warmup:
        w = zeno.warmup(n)
        wrep = check_witness(w.derivation, samples=args.samples, seed=cfg.seed, tol_marginal=cfg.tol,
                             tol_slack=cfg.tol, policy=cfg.policy)
        for i, a in enumerate(w.chain[1:]):
            dist = float(np.max(np.abs(a.matrix - zeno.warmup_expectation(n, i).matrix)))
            rep.add(f"warmup.A{i}_distance", f"{dist:.3e}")
        rep.add("warmup.witness_value_00", f"{witness_value(w.derivation, np.eye(2)[0], np.eye(2)[0]):.12g}")
        rep.add("warmup.check", "PASS" if wrep.passed else "FAIL")
        ok = ok and wrep.passed

    for k in range(1, n + 1):
        rep.add(f"table.epsilon^n[{k}]", f"{zeno.epsilon(k) ** k:.12g}")
    rep.block(f"{{epsilon^{n}*I}} c ~ d {{eq on y1 y2}} derived in {time.perf_counter() - start:.2f}s")
    rep.block(d.pretty())
    return rep, ok


# -- entry point ---------------------------------------------------------------------


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "structured"), default="text")
    common.add_argument("--seed", type=int, default=None, help="sampling seed (default: EQRHL_SEED or 42)")
    common.add_argument("--tol", type=float, default=1e-8, help="marginal and slack tolerance")
    common.add_argument("--trunc", type=int, default=10_000, help="maximum loop iterations")
    common.add_argument("--tail-tol", type=float, default=1e-9, help="loop residual treated as converged")

    ap = _ArgumentParser(prog="eqrhl", description="Expectation-based quantum relational Hoare logic toolkit.")
    sub = ap.add_subparsers(dest="command", parser_class=_ArgumentParser)
    sub.required = True

    p = sub.add_parser("parse", parents=[common], help="parse and typecheck a program")
    p.add_argument("file")

    p = sub.add_parser("run", parents=[common], help="simulate a program on an input state")
    p.add_argument("file")
    p.add_argument("--input", default=None, help="'x = 1, y := vec([1, 1])', a file with that text, or a .npy array")

    p = sub.add_parser("check", parents=[common], help="validate the witness of a derivation")
    p.add_argument("file")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("falsify", parents=[common], help="search for a counterexample to a judgment")
    p.add_argument("file")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--iters", type=int, default=500)

    p = sub.add_parser("zeno", parents=[common], help="derive and check the Zeno judgment")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None, help="counter dimension (default n + 1)")
    p.add_argument("--warmup", action="store_true", help="also derive the loop-free variant")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--jobs", type=int, default=1)
    return ap


COMMANDS = {"parse": cmd_parse, "run": cmd_run, "check": cmd_check, "falsify": cmd_falsify, "zeno": cmd_zeno}


def main(argv: list[str] | None = None) -> int:
    out, err = sys.stdout, sys.stderr
    try:
        args = build_parser().parse_args(argv)
        seed = args.seed if args.seed is not None else default_seed()
        cfg = RunConfig(seed, args.tol, args.trunc, args.tail_tol, args.format)
        rep, ok = COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"eqrhl: error: {exc}", file=err)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"eqrhl: parse error: {exc}", file=err)
        return EXIT_USAGE
    except NonConvergenceError as exc:
        print(f"eqrhl: {exc}", file=err)
        return EXIT_NONCONVERGENCE
    except RuleError as exc:
        print(f"eqrhl: rule error: {exc}", file=err)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"eqrhl: error: {exc}", file=err)
        return EXIT_USAGE
    out.write(rep.render(ok))
    if args.command == "falsify":
        return EXIT_OK
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
