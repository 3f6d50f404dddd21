import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fidstring.errors import (
    DomainError,
    ParseError,
    UnboundVariableError,
    UnknownFunctionError,
    UnknownVariableError,
)
from fidstring.expr import BinOp, Call, Dual, Expression, Neg, Num, Var, parse

from exprgen import random_expression


def test_parse_power_tree():
    assert parse("t^3", ["t"]).root == BinOp("^", Var("t"), Num(3.0))


def test_parse_and_eval_polynomial():
    assert parse("3*t^2 + 1", ["t"]).eval({"t": 2.0}) == 13.0


def test_incomplete_input_reports_offset():
    with pytest.raises(ParseError) as info:
        parse("2*", ["t"])
    assert info.value.position == 2


@pytest.mark.parametrize("source, tree", [
    ("-t^2", Neg(BinOp("^", Var("t"), Num(2.0)))),
    ("2^3^2", BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))),
    ("1 - 2 - 3", BinOp("-", BinOp("-", Num(1.0), Num(2.0)), Num(3.0))),
    ("1 + 2*3", BinOp("+", Num(1.0), BinOp("*", Num(2.0), Num(3.0)))),
    ("-2*t", BinOp("*", Neg(Num(2.0)), Var("t"))),
    ("t^-1", BinOp("^", Var("t"), Neg(Num(1.0)))),
    ("sin(t)/2", BinOp("/", Call("sin", Var("t")), Num(2.0))),
    ("1.5e-3", Num(1.5e-3)),
])
def test_precedence_and_associativity(source, tree):
    assert parse(source, ["t"]).root == tree


def test_implicit_multiplication_rejected():
    with pytest.raises(ParseError) as info:
        parse("2t", ["t"])
    assert info.value.position == 1


def test_unknown_names():
    with pytest.raises(UnknownVariableError) as info:
        parse("t + y", ["t"])
    assert info.value.position == 4
    with pytest.raises(UnknownFunctionError):
        parse("tan(t)", ["t"])


@pytest.mark.parametrize("source", ["", "   ", "(t", "t)", "t $ 2", "sin t", "3 +* 4"])
def test_syntax_errors(source):
    with pytest.raises(ParseError):
        parse(source, ["t"])


def test_eval_basic():
    assert parse("t^3", ["t"]).eval({"t": 2.0}) == 8.0
    e = parse("sin(t)^2 + cos(t)^2", ["t"])
    assert abs(e.eval({"t": 0.7}) - 1.0) <= 1e-15


@pytest.mark.parametrize("source, t", [
    ("sqrt(t)", -1.0),
    ("log(t)", 0.0),
    ("log(t)", -2.0),
    ("1/t", 0.0),
    ("t^0.5", -4.0),
    ("t^-2", 0.0),
])
def test_domain_errors(source, t):
    with pytest.raises(DomainError):
        parse(source, ["t"]).eval({"t": t})


def test_domain_error_on_any_array_element():
    with pytest.raises(DomainError):
        parse("sqrt(t)", ["t"]).eval({"t": np.array([1.0, 4.0, -1.0])})


def test_unbound_variable():
    with pytest.raises(UnboundVariableError):
        parse("t + s", ["t", "s"]).eval({"t": 1.0})


def test_integer_power_of_negative_base():
    assert parse("t^3", ["t"]).eval({"t": -2.0}) == -8.0
    assert parse("t^-1", ["t"]).eval({"t": -4.0}) == -0.25


def test_vectorized_eval_broadcasts_constants():
    out = parse("2", ["t"]).eval({"t": np.zeros(4)})
    assert out.shape == (4,) and np.all(out == 2.0)


def test_eval_deterministic_bitwise():
    e = parse("exp(sin(t)*t^3) / (1 + t^2)", ["t"])
    ts = np.linspace(-2, 2, 101)
    assert np.array_equal(e.eval({"t": ts}), e.eval({"t": ts}))
    assert e.eval({"t": 0.3}).hex() == e.eval({"t": 0.3}).hex()


# ------------------------------------------------------------ dual numbers

def test_eval_dual_polynomials():
    assert parse("t^3 + t", ["t"]).eval_dual({"t": 1.0}, "t") == (2.0, 4.0)
    assert parse("t^3", ["t"]).eval_dual({"t": 2.0}, "t") == (8.0, 12.0)


def test_eval_dual_gaussian_kernel():
    e = parse("exp(-t^2/2)", ["t"])
    value, deriv = e.eval_dual({"t": 1.0}, "t")
    assert abs(value - math.exp(-0.5)) <= 1e-12
    assert abs(deriv + math.exp(-0.5)) <= 1e-12
    h = 1e-5
    f = lambda t: e.eval({"t": t})
    fd = (f(1 + h) - f(1 - h)) / (2 * h)
    # truncation error of this difference quotient is h^2 |f'''| / 6 ~ 2e-11
    assert abs(deriv - fd) <= 1e-10


def test_abs_derivative_at_zero_is_zero():
    assert parse("abs(t)", ["t"]).eval_dual({"t": 0.0}, "t") == (0.0, 0.0)
    assert parse("abs(t)", ["t"]).eval_dual({"t": -3.0}, "t") == (3.0, -1.0)


def test_partial_derivatives_two_variables():
    e = parse("theta2 - theta1^2 + theta1*theta2", ["theta1", "theta2"])
    env = {"theta1": 1.5, "theta2": -0.5}
    assert e.eval_dual(env, "theta1") == (pytest.approx(-3.5), pytest.approx(-3.5))
    assert e.eval_dual(env, "theta2")[1] == pytest.approx(2.5)


def test_seed_not_in_expression_gives_zero():
    assert parse("3", ["t"]).eval_dual({"t": 1.0}, "t") == (3.0, 0.0)


def test_fractional_power_derivative():
    v, d = parse("t^1.5", ["t"]).eval_dual({"t": 4.0}, "t")
    assert v == pytest.approx(8.0) and d == pytest.approx(3.0)
    with pytest.raises(DomainError):
        parse("t^0.5", ["t"]).eval_dual({"t": 0.0}, "t")
    with pytest.raises(DomainError):
        parse("sqrt(t)", ["t"]).eval_dual({"t": 0.0}, "t")


def test_variable_exponent_derivative():
    v, d = parse("2^t", ["t"]).eval_dual({"t": 3.0}, "t")
    assert v == pytest.approx(8.0) and d == pytest.approx(8.0 * math.log(2.0))


def test_dual_arithmetic_chain_rule():
    x = Dual(2.0, 1.0)
    y = (x * x - Dual(1.0)) / x
    assert y.value == pytest.approx(1.5)
    assert y.deriv == pytest.approx(1.0 + 1.0 / 4.0)


def test_random_expressions_match_finite_differences():
    rng = np.random.default_rng(11)
    h = 1e-5
    for _ in range(50):
        e = parse(random_expression(rng, depth=4), ["t"])
        for t in rng.uniform(-1.5, 1.5, size=10):
            _, deriv = e.eval_dual({"t": t}, "t")
            fd = (e.eval({"t": t + h}) - e.eval({"t": t - h})) / (2 * h)
            assert abs(deriv - fd) <= 1e-6 * (1 + abs(deriv)), (str(e), t)


def test_high_frequency_derivative_matches_closed_form():
    # a central difference is poor here (truncation ~1e-3); the dual value is exact
    e = parse("log(2 + cos(((t + t)^2)^3))", ["t"])
    t = 1.0042141192133522
    u = (2 * t) ** 6
    expected = -math.sin(u) * 12 * (2 * t) ** 5 / (2 + math.cos(u))
    assert abs(e.eval_dual({"t": t}, "t")[1] - expected) <= 1e-12 * abs(expected)


# ----------------------------------------------------------- round trip

_leaf = st.one_of(
    st.just(Var("t")),
    st.just(Var("s")),
    st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Num),
)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda a: BinOp(*a)),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "log", "sqrt", "abs"]), children)
        .map(lambda a: Call(*a)),
    )


@settings(max_examples=200, deadline=None)
@given(st.recursive(_leaf, _extend, max_leaves=12))
def test_print_parse_round_trip(tree):
    first = Expression(tree)
    again = parse(str(first), ["t", "s"])
    assert again == first
    assert parse(str(again), ["t", "s"]) == again


def test_round_trip_of_parsed_source():
    e = parse("-t^2^3 / (1 - sin(t)) + exp(-t) * 2e-3", ["t"])
    assert parse(str(e), ["t"]) == e


def test_substitute_composes():
    mu = parse("t^3", ["t"])
    phi = parse("r + r^3/3", ["r"])
    composed = mu.substitute("t", phi)
    assert composed.free_vars == ("r",)
    r = 0.8
    assert composed.eval({"r": r}) == pytest.approx(phi.eval({"r": r}) ** 3, rel=1e-15)
