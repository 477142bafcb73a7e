import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CORPUS
from umbilic.exprlang import Binary, Call, Number, ParseError, Unary, Var, eval_jet, evaluate, parse, to_text
from umbilic.jets import DomainError, finite_difference_oracle


def test_parse_product():
    assert parse("u*v") == Binary("mul", Var("u"), Var("v"))


def test_parse_calls():
    assert parse("cosh(v)*cos(u)") == Binary("mul", Call("cosh", Var("v")), Call("cos", Var("u")))


def test_parse_error_position():
    with pytest.raises(ParseError) as exc:
        parse("2+*u")
    assert exc.value.position == 2
    assert "operand" in exc.value.expected
    assert exc.value.found == "'*'"


@pytest.mark.parametrize("text, tree", [
    ("-u^2", Unary("neg", Binary("pow", Var("u"), Number(2)))),
    ("u-v-u", Binary("sub", Binary("sub", Var("u"), Var("v")), Var("u"))),
    ("u/v*u", Binary("mul", Binary("div", Var("u"), Var("v")), Var("u"))),
    ("1+u*v", Binary("add", Number(1.0), Binary("mul", Var("u"), Var("v")))),
    ("  u\t*\nv ", Binary("mul", Var("u"), Var("v"))),
    ("2*-u", Binary("mul", Number(2.0), Unary("neg", Var("u")))),
    ("1.5e-3", Number(1.5e-3)),
])
def test_precedence_and_whitespace(text, tree):
    assert parse(text) == tree


@pytest.mark.parametrize("text, position", [
    ("", 0), ("u+", 2), ("w", 0), ("sin u", 4), ("foo(u)", 0), ("u^2.5", 2),
    ("u^2^3", 3), ("(u", 2), ("u)", 1), ("u^-2", 2), ("2u", 1), ("u $ v", 2),
    ("1e999", 0),
])
def test_parse_errors(text, position):
    with pytest.raises(ParseError) as exc:
        parse(text)
    assert exc.value.position == position
    assert 0 <= exc.value.position <= len(text.encode())


def test_parse_error_byte_offset_after_multibyte():
    with pytest.raises(ParseError) as exc:
        parse("é")
    assert exc.value.position == 0
    with pytest.raises(ParseError) as exc:
        parse("u+é")
    assert exc.value.position == 2
    with pytest.raises(ParseError) as exc:
        parse(b"u+\xff")
    assert exc.value.position == 2


def test_deep_nesting_is_a_parse_error():
    with pytest.raises(ParseError):
        parse("(" * 5000 + "u" + ")" * 5000)
    with pytest.raises(ParseError):
        parse("-" * 5000 + "u")


def test_eval_affine():
    j = eval_jet(parse("2+u"), 0.0, 0.0)
    np.testing.assert_array_equal(j.coefficients(), [2, 1, 0, 0, 0, 0, 0, 0, 0, 0])


def test_eval_stereographic_factor():
    j = eval_jet(parse("4/(1+u^2+v^2)^2"), 0.0, 0.0)
    fd = finite_difference_oracle(lambda u, v: 4 / (1 + u * u + v * v) ** 2, (0.0, 0.0), 1e-3)
    np.testing.assert_allclose([j.f, j.fu, j.fv, j.fuu, j.fuv, j.fvv], [4, 0, 0, -16, 0, -16])
    np.testing.assert_allclose([j.fuu, j.fvv], [fd.fuu, fd.fvv], atol=1e-4)


def test_eval_domain_error_carries_point():
    with pytest.raises(DomainError) as exc:
        eval_jet(parse("ln(u)"), -1.0, 0.0)
    assert exc.value.point == (-1.0, 0.0)


def test_eval_domain_error_on_grid_points_at_offender():
    u = np.array([0.5, 1.0, -0.5])
    with pytest.raises(DomainError) as exc:
        eval_jet(parse("sqrt(u)"), u, np.zeros(3))
    assert exc.value.point == (-0.5, 0.0)


@pytest.mark.parametrize("text", CORPUS)
def test_round_trip(text):
    ast = parse(text)
    assert parse(to_text(ast)) == ast


@pytest.mark.parametrize("text", CORPUS)
def test_eval_jet_matches_fd(text, rng):
    ast = parse(text)
    u = rng.uniform(-0.9, 0.9, 20)
    v = rng.uniform(-0.9, 0.9, 20)
    jet = eval_jet(ast, u, v).broadcast_to(u.shape).coefficients()
    field = lambda a, b: evaluate(ast, a, b)
    coarse = finite_difference_oracle(field, (u, v), 2e-3).coefficients()
    fine = finite_difference_oracle(field, (u, v), 1e-3).coefficients()
    fd = (4 * fine - coarse) / 3  # Richardson: cancels the h^2 term
    tol = np.maximum(1e-5, 1e-5 * np.abs(jet))
    assert np.all(np.abs(jet - fd) <= tol)


def test_plain_evaluation_agrees_with_jet_value(rng):
    for text in CORPUS:
        ast = parse(text)
        u, v = rng.uniform(-0.9, 0.9, 2)
        assert evaluate(ast, u, v) == pytest.approx(eval_jet(ast, u, v).f, rel=1e-13, abs=1e-13)


def test_negative_number_nodes_are_not_rendered():
    with pytest.raises(ValueError):
        to_text(Number(-1.0))


@settings(max_examples=500, deadline=None)
@given(st.binary(max_size=40))
def test_parse_is_total_on_bytes(data):
    try:
        parse(data)
    except ParseError as exc:
        assert 0 <= exc.position <= len(data)


_atoms = st.sampled_from(["u", "v", "1", "2.5", "(u+v)", "sin(u)", "exp(v)"])
_ops = st.sampled_from(["+", "-", "*", "/"])


@st.composite
def small_expressions(draw):
    parts = [draw(_atoms)]
    for _ in range(draw(st.integers(0, 4))):
        parts += [draw(_ops), draw(st.sampled_from(["", "-"])) + draw(_atoms)]
        if draw(st.booleans()):
            parts[-1] += "^" + str(draw(st.integers(0, 3)))
    return "".join(parts)


@settings(max_examples=300, deadline=None)
@given(small_expressions())
def test_round_trip_generated(text):
    ast = parse(text)
    assert parse(to_text(ast)) == ast
