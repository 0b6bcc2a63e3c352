import numpy as np
import pytest

from eqrhl.expectations import DoubledAmbient
from eqrhl.lang import Ambient, Apply, ParseError, Skip, ket
from eqrhl.linalg import proj
from eqrhl.proofs import RuleError, parse_derivation, parse_judgment
from eqrhl.proofs import rules
from eqrhl.validator import check_witness

DA = DoubledAmbient(Ambient.of(y=2))
FLIP = np.array([[0, 1], [1, 0]])

SKIP_FILE = """
var y : dim 2;
expect E = eq(y);
proof p = skip(E);
proof q = conseq(scale(0.5, E), p, identity);
conclude q;
"""


def test_skip_conseq_file():
    d = parse_derivation(SKIP_FILE)
    assert d.rule == "Conseq"
    assert d.pre.close_to(0.5 * DA.eq("y"))
    assert d.post.close_to(DA.identity())
    assert check_witness(d, samples=5).passed


def test_root_defaults_to_last_proof():
    d = parse_derivation("var y : dim 2; proof p = skip(identity); proof q = sym(p);")
    assert d.rule == "Sym"


def test_apply_seq_file_matches_builder():
    text = """
    var y : dim 2;
    let X = lit([[0, 1], [1, 0]]);
    proof r = apply2(X on y, eq(y));
    proof l = apply1(X on y, pre(r));
    conclude seq(l, r);
    """
    d = parse_derivation(text)
    r = rules.rule_apply2(FLIP, "y", DA.eq("y"))
    want = rules.rule_seq(rules.rule_apply1(FLIP, "y", r.pre), r)
    assert d.conclusion.close_to(want.conclusion, 1e-12)
    # flipping both sides preserves ≡
    assert d.pre.close_to(DA.eq("y"), 1e-12)


def test_init_and_contract_expectations():
    text = """
    var y : dim 2;
    expect P = proj_state([1, 1]) on y1;
    proof i = init1(y := vec([sqrt(1/2), sqrt(1/2)]), P);
    """
    d = parse_derivation(text)
    assert d.pre.close_to(DA.identity(), 1e-12)
    c = parse_derivation("var y : dim 2; expect C = contract(y1 := ket(0), eq(y)); proof s = skip(C);")
    # ⟨0|≡|0⟩ on y1 leaves (I + proj|0⟩)/2 on y2
    assert c.pre.close_to(DA.on((np.eye(2) + proj([1, 0])) / 2, ("y2",)), 1e-12)


def test_restrict_star_and_if_file():
    text = """
    var y : dim 2;
    expect A = sum(lit([[1, 0], [0, 0]]) on y1 y2 , scalar(0));
    proof t = skip(eq(y));
    proof i = if1(meas(proj_lt(1)) on y, t, t);
    expect R = sum(restrict_star(meas(proj_lt(1)) on y, 1, true, eq(y)), restrict_star(meas(proj_lt(1)) on y, 1, false, eq(y)));
    proof c = conseq(R, i, eq(y));
    """
    with pytest.raises(ParseError):
        # a 2x2 literal does not fit the 4-dimensional register y1 y2
        parse_derivation(text)
    d = parse_derivation(text.replace("lit([[1, 0], [0, 0]]) on y1 y2 ", "lit([[1, 0], [0, 0]]) on y1"))
    assert d.rule == "Conseq"
    assert check_witness(d, samples=5).passed


def test_while_file():
    # while y = 1 { y := |0⟩ } ends in |0⟩ on y1: A = I is a fixed point of the body
    text = """
    var y : dim 2;
    let P1 = lit([[0, 0], [0, 1]]);
    expect B = lit([[1, 0], [0, 0]]) on y1;
    proof body = init1(y := ket(0), identity);
    proof loop = while1(meas(P1) on y, body, B);
    """
    d = parse_derivation(text)
    assert d.rule == "While1"
    assert d.pre.close_to(DA.identity(), 1e-12)
    assert check_witness(d, samples=5).passed


def test_unknown_rule_reports_position():
    with pytest.raises(ParseError) as info:
        parse_derivation("var y : dim 2;\nproof p = frobnicate(identity);")
    assert info.value.line == 2


def test_rule_error_has_line_prefix():
    text = "var y : dim 2;\nproof p = skip(identity);\nproof q = conseq(scale(2, identity), p, identity);"
    with pytest.raises(RuleError) as info:
        parse_derivation(text)
    msg = str(info.value)
    assert msg.startswith("line 3")
    assert msg.count("line ") == 1
    assert "conseq" in msg


def test_empty_derivation_file():
    with pytest.raises(ParseError, match="no proof"):
        parse_derivation("var y : dim 2;")


def test_judgment_file():
    j = parse_judgment(
        """
        var y : dim 2;
        pre identity;
        left { skip };
        right { apply lit([[0, 1], [1, 0]]) on y };
        post eq(y);
        """
    )
    assert j.left == Skip()
    assert isinstance(j.right, Apply)
    np.testing.assert_allclose(j.right.u, FLIP)
    assert j.pre.close_to(DA.identity()) and j.post.close_to(DA.eq("y"))


def test_judgment_named_programs():
    j = parse_judgment(
        """
        var y : dim 2;
        program c = { init y := ket(1) };
        pre zero; left c; right c; post eq(y);
        """
    )
    assert j.left == j.right


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("var y : dim 2; pre identity; left { skip }; right { skip };", "missing post"),
        ("var y : dim 2; pre identity; pre zero;", "given twice"),
        ("var y : dim 2; pre identity; middle { skip };", "expected pre"),
        ("var y : dim 2; pre bogus; left { skip }; right { skip }; post zero;", "unknown expectation"),
    ],
)
def test_judgment_errors(text, fragment):
    with pytest.raises(ParseError, match=fragment):
        parse_judgment(text)


def test_doubled_vars_checked():
    with pytest.raises(ParseError, match="doubled"):
        parse_judgment("var y : dim 2; pre lit([[1, 0], [0, 0]]) on y; left { skip }; right { skip }; post zero;")


def test_init_state_expression_matches_ket():
    d = parse_derivation("var y : dim 2; proof p = init2(y := ket(1), identity);")
    np.testing.assert_allclose(d.params["psi"], ket(1, 2))
