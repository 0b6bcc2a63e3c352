"""Text formats for derivations and judgments.

Both share the program syntax (``var``/``let`` headers, matrix and state
expressions). A derivation file binds expectations and proofs and names the
root::

    var y : dim 2;
    expect E = eq(y);
    proof p = skip(E);
    proof q = conseq(scale(0.5, E), p, identity);
    conclude q;

A judgment file states one judgment::

    var y : dim 2;
    pre identity;
    left { skip };
    right { apply lit([[0, 1], [1, 0]]) on y };
    post eq(y);

Expectations: ``identity``, ``zero``, ``scalar(k)``, ``eq(vars)``,
``<matrix> on <doubled vars>``, ``restrict_star(meas(..) on vars, side, true|false, E)``,
``conj(<matrix> on <doubled vars>, E)``, ``sum(E, ...)``, ``scale(k, E)``,
``pre(P)``, ``post(P)`` and bound names.
"""

from __future__ import annotations

from ..expectations import DoubledAmbient, Expectation, conj_by, restrict_star
from ..lang.ast import Ambient, Program
from ..lang.syntax import ParseError, Parser
from ..linalg import LabeledOperator, PureState
from ..semantics import DEFAULT_POLICY, Policy
from . import rules
from .core import Derivation, Judgment, RuleError

RULES = {
    "skip", "sym", "seq", "conseq", "exfalso", "apply1", "apply2", "init1", "init2",
    "if1", "if2", "while1", "while2", "mirror", "jointif", "jointif4", "jointwhile",
}


class ProofParser(Parser):
    def __init__(self, text: str, ambient: Ambient | None = None, policy: Policy = DEFAULT_POLICY):
        super().__init__(text, ambient)
        self.expectations: dict[str, Expectation] = {}
        self.programs: dict[str, Program] = {}
        self.proofs: dict[str, Derivation] = {}
        self.policy = policy
        self.da: DoubledAmbient | None = None

    def parse_header(self):
        super().parse_header()
        self.da = DoubledAmbient(self.ambient)

    # -- expectations --

    def parse_doubled_vars(self):
        names = []
        while self.tok.kind == "ident" and self.tok.value in self.da.full:
            if self.tok.value in names:
                raise self.error(f"variable {self.tok.value!r} listed twice")
            names.append(self.tok.value)
            self.pos += 1
        if not names:
            raise self.error(f"expected doubled variable names (like x1 x2), found {self.describe(self.tok)}")
        return self.da.full.select(names)

    def parse_operator_on(self) -> LabeledOperator:
        mat = self.parse_matexpr()
        self.expect("on")
        reg = self.parse_doubled_vars()
        return LabeledOperator(reg, mat(reg.dim))

    def parse_bool(self) -> bool:
        t = self.tok
        name = self.expect_ident()
        if name not in ("true", "false"):
            raise self.error(f"expected true or false, found {name!r}", t)
        return name == "true"

    def parse_expectation(self) -> Expectation:
        t = self.tok
        if t.kind != "ident":
            raise self.error(f"expected an expectation, found {self.describe(t)}")
        name = t.value
        if name in self.expectations and not self._call_follows():
            self.pos += 1
            return self.expectations[name]
        da = self.da
        if name == "identity":
            self.pos += 1
            return da.identity()
        if name == "zero":
            self.pos += 1
            return da.zero()
        if name == "scalar":
            self.pos += 1
            self.expect("(")
            k = self.parse_real()
            self.expect(")")
            return da.scalar(k)
        if name == "eq":
            self.pos += 1
            self.expect("(")
            reg = self.parse_vars()
            self.expect(")")
            return da.eq(reg.names)
        if name == "restrict_star":
            self.pos += 1
            self.expect("(")
            m = self.parse_meas_on()
            self.expect(",")
            side = self.parse_int()
            self.expect(",")
            outcome = self.parse_bool()
            self.expect(",")
            a = self.parse_expectation()
            self.expect(")")
            return self._guard(lambda: restrict_star(m, side, outcome, a, da), t)
        if name == "conj":
            self.pos += 1
            self.expect("(")
            b = self.parse_operator_on()
            self.expect(",")
            a = self.parse_expectation()
            self.expect(")")
            return conj_by(b, a)
        if name == "contract":
            self.pos += 1
            self.expect("(")
            reg = self.parse_doubled_vars()
            self.expect(":=")
            v = self.parse_vecexpr()(reg.dim)
            self.expect(",")
            a = self.parse_expectation()
            self.expect(")")
            return conj_by(PureState(reg, v), a)
        if name == "sum":
            self.pos += 1
            self.expect("(")
            total = self.parse_expectation()
            while self.accept(","):
                total = total + self.parse_expectation()
            self.expect(")")
            return total
        if name == "scale":
            self.pos += 1
            self.expect("(")
            k = self.parse_real()
            self.expect(",")
            a = self.parse_expectation()
            self.expect(")")
            return k * a
        if name in ("pre", "post"):
            self.pos += 1
            self.expect("(")
            d = self.parse_proof()
            self.expect(")")
            return d.pre if name == "pre" else d.post
        if self._call_follows() or name in ("rot", "shift", "proj_lt", "proj_state", "lit") or name in self.matrices:
            return da.extend(self.parse_operator_on())
        raise self.error(f"unknown expectation {name!r}")

    def _call_follows(self) -> bool:
        nxt = self.tokens[self.pos + 1]
        return nxt.kind == "sym" and nxt.value == "("

    def parse_real(self) -> float:
        t = self.tok
        k = self.parse_scalar()
        if isinstance(k, complex):
            raise self.error("expected a real number", t)
        return float(k)

    # -- programs --

    def parse_program_arg(self) -> Program:
        if self.at("{"):
            return self.parse_braced()
        t = self.tok
        name = self.expect_ident()
        if name not in self.programs:
            raise self.error(f"unknown program {name!r}", t)
        return self.programs[name]

    # -- proofs --

    def _guard(self, fn, tok):
        try:
            return fn()
        except RuleError:
            raise
        except ValueError as exc:
            raise ParseError(str(exc), tok.line, tok.col) from None

    def parse_proof(self) -> Derivation:
        t = self.tok
        name = self.expect_ident()
        if name not in RULES or not self.at("("):
            if name in self.proofs:
                return self.proofs[name]
            raise self.error(f"unknown proof or rule {name!r}", t)
        self.expect("(")
        d = self._rule(name, t)
        self.expect(")")
        return d

    def _rule(self, name: str, t) -> Derivation:
        pol = self.policy
        try:
            return self._rule_inner(name, pol)
        except RuleError as exc:
            if str(exc).startswith("line "):
                raise
            raise RuleError(f"line {t.line}, column {t.col}: {name}: {exc}") from None

    def _rule_inner(self, name: str, pol: Policy) -> Derivation:
        if name == "skip":
            return rules.rule_skip(self.parse_expectation())
        if name == "sym":
            return rules.rule_sym(self.parse_proof())
        if name == "mirror":
            return rules.mirror(self.parse_proof())
        if name == "seq":
            ds = [self.parse_proof()]
            while self.accept(","):
                ds.append(self.parse_proof())
            return rules.rule_seq(*ds)
        if name == "conseq":
            a = self.parse_expectation()
            self.expect(",")
            d = self.parse_proof()
            self.expect(",")
            b = self.parse_expectation()
            return rules.rule_conseq(a, d, b)
        if name == "exfalso":
            c = self.parse_program_arg()
            self.expect(",")
            d = self.parse_program_arg()
            self.expect(",")
            b = self.parse_expectation()
            return rules.rule_exfalso(c, d, b, pol)
        if name in ("apply1", "apply2"):
            mat = self.parse_matexpr()
            self.expect("on")
            reg = self.parse_vars()
            self.expect(",")
            a = self.parse_expectation()
            fn = rules.rule_apply1 if name == "apply1" else rules.rule_apply2
            return fn(mat(reg.dim), reg, a)
        if name in ("init1", "init2"):
            reg = self.parse_vars()
            self.expect(":=")
            v = self.parse_vecexpr()(reg.dim)
            self.expect(",")
            a = self.parse_expectation()
            fn = rules.rule_init1 if name == "init1" else rules.rule_init2
            return fn(reg, v, a)
        if name in ("if1", "if2"):
            m = self.parse_meas_on()
            self.expect(",")
            d1 = self.parse_proof()
            self.expect(",")
            d2 = self.parse_proof()
            fn = rules.rule_if1 if name == "if1" else rules.rule_if2
            return fn(m, d1, d2)
        if name in ("while1", "while2"):
            m = self.parse_meas_on()
            self.expect(",")
            body = self.parse_proof()
            self.expect(",")
            b = self.parse_expectation()
            fn = rules.rule_while1 if name == "while1" else rules.rule_while2
            return fn(m, body, b, pol)
        if name in ("jointif", "jointif4", "jointwhile"):
            m = self.parse_meas_on()
            self.expect(",")
            n = self.parse_meas_on()
            self.expect(",")
            if name == "jointwhile":
                body = self.parse_proof()
                self.expect(",")
                b = self.parse_expectation()
                return rules.rule_jointwhile(m, n, body, b, pol)
            count = 2 if name == "jointif" else 4
            ds = [self.parse_proof()]
            for _ in range(count - 1):
                self.expect(",")
                ds.append(self.parse_proof())
            if name == "jointif":
                return rules.rule_jointif(m, n, *ds, policy=pol)
            return rules.rule_jointif4(m, n, *ds)
        raise AssertionError(name)  # pragma: no cover

    # -- files --

    def parse_binding(self) -> bool:
        """One ``expect``/``program``/``proof``/``let`` statement; False at other input."""
        if self.accept("expect"):
            name = self.expect_ident()
            self.expect("=")
            self.expectations[name] = self.parse_expectation()
        elif self.accept("program"):
            name = self.expect_ident()
            self.expect("=")
            self.programs[name] = self.parse_braced()
        elif self.accept("proof"):
            name = self.expect_ident()
            self.expect("=")
            self.proofs[name] = self.parse_proof()
        elif self.accept("let"):
            name = self.expect_ident()
            self.expect("=")
            self.matrices[name] = self.parse_matexpr()
        else:
            return False
        self.expect(";")
        return True

    def parse_derivation_file(self) -> Derivation:
        self.parse_header()
        root = None
        while self.tok.kind != "eof":
            if self.parse_binding():
                continue
            if self.accept("conclude"):
                root = self.parse_proof()
                self.expect(";")
                continue
            raise self.error(f"expected expect, program, proof, let or conclude, found {self.describe(self.tok)}")
        if root is None:
            if not self.proofs:
                raise self.error("derivation file defines no proof")
            root = list(self.proofs.values())[-1]
        return root

    def parse_judgment_file(self) -> Judgment:
        self.parse_header()
        parts: dict[str, object] = {}
        while self.tok.kind != "eof":
            if self.parse_binding():
                continue
            t = self.tok
            key = self.expect_ident()
            if key in parts:
                raise self.error(f"{key} given twice", t)
            if key in ("pre", "post"):
                parts[key] = self.parse_expectation()
            elif key in ("left", "right"):
                parts[key] = self.parse_program_arg()
            else:
                raise self.error(f"expected pre, left, right or post, found {key!r}", t)
            self.expect(";")
        missing = [k for k in ("pre", "left", "right", "post") if k not in parts]
        if missing:
            raise self.error(f"judgment is missing {', '.join(missing)}")
        try:
            return Judgment(parts["pre"], parts["left"], parts["right"], parts["post"])
        except ValueError as exc:
            raise self.error(str(exc)) from None


def parse_derivation(text: str, ambient: Ambient | None = None, policy: Policy = DEFAULT_POLICY) -> Derivation:
    return ProofParser(text, ambient, policy).parse_derivation_file()


def parse_judgment(text: str, ambient: Ambient | None = None) -> Judgment:
    return ProofParser(text, ambient).parse_judgment_file()
