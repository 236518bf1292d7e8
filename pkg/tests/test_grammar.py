"""Parser and printer: grammar conformance and round trips."""

import random

import pytest

from conftest import assert_equivalent, default_symbols, random_expr
from noethercheck.expr import (
    Const,
    Context,
    Pow,
    Product,
    Sum,
    Var,
    quot,
    symbols,
    total_derivative,
)
from noethercheck.grammar import ParseError, parse, to_text, tokenize


@pytest.fixture
def ctx():
    return Context(n=1, r=1, k=1, m=2)


class TestParse:
    def test_worked_example_structure(self, ctx):
        e = parse("(dp1 + 1)^2 * x1", ctx)
        assert isinstance(e, Product)
        pw, x = e.factors
        assert isinstance(pw, Pow) and pw.exponent == 2
        assert isinstance(pw.base, Sum)
        assert pw.base.terms == (Var(ctx.jet(1, 1)), Const(1))
        assert x == Var(ctx.state(1))

    def test_atomic_time(self, ctx):
        from noethercheck.expr import TIME

        assert parse("t", ctx) == Var(TIME)

    def test_jet_order_above_m(self, ctx):
        with pytest.raises(ParseError, match="jet order 3"):
            parse("p1^(3)", ctx)

    def test_jet_order_general_form(self, ctx):
        assert parse("p1^(0)", ctx) == Var(ctx.jet(1, 0))
        assert parse("p1^(1)", ctx) == Var(ctx.jet(1, 1))
        assert parse("p1^(2)", ctx) == Var(ctx.jet(1, 2))
        relaxed = parse("p1^(3)", ctx, max_jet_order=3)
        assert relaxed == Var(ctx.jet(1, 3))

    def test_jet_form_requires_adjacency(self, ctx):
        # with whitespace this is a plain integer power
        assert parse("p1 ^(2)", ctx) == Pow(Var(ctx.jet(1, 0)), 2)
        assert parse("p1^2", ctx) == Pow(Var(ctx.jet(1, 0)), 2)

    def test_precedence(self, ctx):
        assert parse("1 + 2*3^2", ctx) == Const(19)
        assert parse("2^3^2", ctx) == Const(512)  # right-associative tower
        assert parse("-2^2", ctx) == Const(-4)  # power binds tighter than minus
        assert parse("6/3/2", ctx).value == 1  # division left-associates

    def test_negative_and_parenthesized_exponents(self, ctx):
        assert parse("2^-2", ctx).value * 4 == 1
        assert parse("x1^(-2)", ctx) == Pow(Var(ctx.state(1)), -2)

    def test_numbers(self, ctx):
        assert parse("42", ctx) == Const(42)
        assert parse("2.5", ctx) == Const(2.5)
        assert parse("1e-3", ctx) == Const(1e-3)
        assert parse("2.5E2", ctx) == Const(250.0)
        assert parse(".5", ctx) == Const(0.5)

    def test_functions(self, ctx):
        e = parse("sin(x1) + cos(t)", ctx)
        names = {s.name for s in symbols(e)}
        assert names == {"x1", "t"}

    def test_non_integer_exponent_rejected(self, ctx):
        with pytest.raises(ParseError, match="integer exponents"):
            parse("x1^2.5", ctx)
        with pytest.raises(ParseError, match="integer exponents"):
            parse("x1^u1", ctx)

    def test_unknown_symbol(self, ctx):
        with pytest.raises(ParseError, match="unknown symbol"):
            parse("y1", ctx)

    def test_index_out_of_range(self, ctx):
        with pytest.raises(ParseError, match="out of range"):
            parse("x2", ctx)
        with pytest.raises(ParseError, match="out of range"):
            parse("u2", ctx)
        with pytest.raises(ParseError, match="out of range"):
            parse("p2", ctx)

    def test_costates_gated(self, ctx):
        with pytest.raises(ParseError, match="costate"):
            parse("psi1", ctx)
        with pytest.raises(ParseError, match="costate"):
            parse("psi0", ctx)
        assert parse("psi0 + psi1", ctx, allow_costates=True) is not None

    def test_controldot_gated(self, ctx):
        with pytest.raises(ParseError, match="control-derivative"):
            parse("du1", ctx)
        assert parse("du1", ctx, allow_controldot=True) is not None

    def test_syntax_error_position(self, ctx):
        with pytest.raises(ParseError) as err:
            parse("x1 + \n* 2", ctx)
        assert err.value.line == 2
        assert err.value.col == 1

    def test_trailing_input(self, ctx):
        with pytest.raises(ParseError, match="trailing"):
            parse("x1 x1", ctx)

    def test_unbalanced_parens(self, ctx):
        with pytest.raises(ParseError):
            parse("(x1 + 1", ctx)

    def test_unexpected_character(self, ctx):
        with pytest.raises(ParseError, match="unexpected character"):
            parse("x1 & u1", ctx)

    def test_tokenizer_positions(self):
        toks = tokenize("a +\nbb")
        assert (toks[0].line, toks[0].col) == (1, 1)
        assert (toks[2].line, toks[2].col) == (2, 1)


class TestPrint:
    def test_atoms(self, ctx):
        assert to_text(Var(ctx.jet(1, 1))) == "dp1"
        assert to_text(Const(1)) == "1"
        assert to_text(Var(ctx.jet(1, 3))) == "p1^(3)"

    def test_fraction(self, ctx):
        half = quot(Const(1), Const(2))
        assert to_text(half) == "1/2"
        assert parse("1/2", ctx) == half

    def test_worked_example_roundtrip(self, ctx):
        e = parse("(dp1 + 1)^2 * x1", ctx)
        assert_equivalent(e, parse(to_text(e), ctx), envs=100, tol=1e-12)

    def test_subtraction_rendering(self, ctx):
        e = parse("x1 - (u1 + 1)", ctx)
        assert to_text(e) == "x1 - (u1 + 1)"
        assert_equivalent(e, parse(to_text(e), ctx), envs=20, tol=1e-12)

    def test_random_roundtrips(self, ctx):
        rng = random.Random(17)
        syms = default_symbols(ctx)
        for _ in range(100):
            e = random_expr(rng, syms, 5)
            text = to_text(e)
            back = parse(text, ctx, allow_costates=True)
            assert_equivalent(e, back, envs=5, tol=1e-12, seed=rng.randrange(10**6))

    def test_total_derivative_roundtrip(self, ctx):
        # printed derivatives contain du symbols and order m+1 jets; they
        # re-parse with the relaxed flags
        phi = (parse("x1 * u1", ctx),)
        e = parse("(dp1 + 1)^2 * x1 + u1 * ddp1", ctx)
        td = total_derivative(e, phi)
        back = parse(
            to_text(td), ctx, allow_controldot=True, max_jet_order=ctx.m + 1
        )
        assert_equivalent(td, back, envs=50, tol=1e-12)
