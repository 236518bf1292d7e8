"""Expression core: construction, calculus, evaluation, zero testing."""

import math
import random

import pytest

from conftest import (
    assert_equivalent,
    central_difference,
    default_symbols,
    draw_valid_env,
    random_expr,
)
from noethercheck.expr import (
    COSTATE0,
    Const,
    Context,
    EvalDomainError,
    MissingSymbolError,
    Neg,
    Pow,
    Product,
    SAMPLE_GUARD,
    SAMPLE_HIGH,
    SAMPLE_LOW,
    SamplerExhaustedError,
    Sum,
    SymbolRangeError,
    TIME,
    TotalDerivativeError,
    Var,
    ZeroDenominatorError,
    add,
    call,
    const,
    costate,
    evaluate,
    evaluate_scaled,
    is_zero,
    jet,
    mul,
    neg,
    partial,
    powi,
    quot,
    restrict_to_zero_jets,
    sample_env,
    sorted_symbols,
    sub,
    substitute,
    symbols,
    total_derivative,
)
from noethercheck.grammar import parse


@pytest.fixture
def ctx():
    return Context(n=2, r=1, k=1, m=2)


class TestSymbols:
    def test_names(self, ctx):
        assert TIME.name == "t"
        assert ctx.state(2).name == "x2"
        assert ctx.control(1).name == "u1"
        assert ctx.jet(1, 0).name == "p1"
        assert ctx.jet(1, 1).name == "dp1"
        assert ctx.jet(1, 2).name == "ddp1"
        assert ctx.jet(1, 3).name == "p1^(3)"
        assert COSTATE0.name == "psi0"
        assert ctx.costate(1).name == "psi1"

    def test_context_bounds(self, ctx):
        with pytest.raises(SymbolRangeError):
            ctx.state(3)
        with pytest.raises(SymbolRangeError):
            ctx.control(2)
        with pytest.raises(SymbolRangeError):
            ctx.jet(2, 0)
        with pytest.raises(SymbolRangeError):
            # one total derivative above m is the hard ceiling
            ctx.jet(1, 4)
        assert ctx.jet(1, 3) == jet(1, 3)

    def test_sort_order(self, ctx):
        syms = [ctx.costate(1), ctx.jet(1, 1), TIME, ctx.control(1), ctx.state(1)]
        names = [s.name for s in sorted_symbols(syms)]
        assert names == ["t", "x1", "u1", "dp1", "psi1"]


class TestConstructors:
    def test_constant_folding(self):
        assert add(const(1), const(2)) == Const(3)
        assert mul(const(2), const(3), const(4)) == Const(24)
        assert quot(const(1), const(3)).value == pytest.approx(1 / 3)
        assert powi(const(2), 10) == Const(1024)
        assert call("exp", const(0)) == Const(1.0)

    def test_exact_rationals(self):
        v = quot(const(1), const(3))
        assert isinstance(v, Const)
        assert v.value * 3 == 1  # exact Fraction, no rounding

    def test_neutral_elements(self):
        x = Var(jet(1, 0))
        assert add(x, const(0)) is x
        assert mul(x, const(1)) is x
        assert mul(x, const(0)) == Const(0)
        assert powi(x, 1) is x
        assert powi(x, 0) == Const(1)

    def test_flattening(self):
        x, y = Var(jet(1, 0)), Var(jet(1, 1))
        s = add(add(x, y), const(1), add(const(2), x))
        assert isinstance(s, Sum)
        assert len(s.terms) == 4  # x, y, x, folded constant 3
        assert Const(3) in s.terms

    def test_zero_denominator_rejected(self):
        with pytest.raises(ZeroDenominatorError):
            quot(Var(jet(1, 0)), const(0))
        with pytest.raises(ZeroDenominatorError):
            powi(const(0), -1)

    def test_non_finite_rejected(self):
        with pytest.raises(Exception):
            const(float("inf"))

    def test_operator_sugar(self):
        x = Var(jet(1, 0))
        assert (x + 1) == add(x, const(1))
        assert (2 * x) == mul(const(2), x)
        assert (x - x) == sub(x, x)
        assert (-x) == neg(x)
        assert (x / 2) == quot(x, const(2))
        assert (x**3) == powi(x, 3)


class TestPartial:
    def test_power_rule(self, ctx):
        e = parse("(dp1 + 1)^2 * x1", ctx)
        d = partial(e, ctx.jet(1, 1))
        ref = parse("2 * (dp1 + 1) * x1", ctx)
        assert_equivalent(d, ref)

    def test_product_rule(self, ctx):
        e = parse("x1 * u1", ctx)
        assert partial(e, ctx.state(1)) == Var(ctx.control(1))

    def test_jet_partial(self, ctx):
        e = parse("2*ddp1*x1 + (dp1 + 1)*u1", ctx)
        assert partial(e, ctx.jet(1, 2)) == mul(const(2), Var(ctx.state(1)))

    def test_symbol_free(self, ctx):
        assert partial(const(5), ctx.state(1)) == Const(0)

    def test_quotient_and_functions(self, ctx):
        x = Var(ctx.state(1))
        e = quot(call("sin", x), x)
        d = partial(e, ctx.state(1))
        # (x cos x - sin x) / x^2, checked numerically
        ref = quot(sub(mul(x, call("cos", x)), call("sin", x)), powi(x, 2))
        assert_equivalent(d, ref)

    def test_finite_difference_agreement(self, ctx):
        rng = random.Random(7)
        syms = default_symbols(ctx)
        checked = 0
        for _ in range(30):
            e = random_expr(rng, syms, 5)
            present = sorted_symbols(symbols(e))
            if not present:
                continue
            s = rng.choice(present)
            d = partial(e, s)
            for _ in range(5):
                env = draw_valid_env(e, rng)
                if env is None:
                    break
                try:
                    ds = evaluate(d, env)
                    fd = central_difference(e, s, env)
                except EvalDomainError:
                    continue
                if abs(ds) > 1e5 or abs(fd) > 1e5:
                    continue
                assert abs(ds - fd) <= 1e-6 * (1.0 + abs(ds) + abs(fd))
                checked += 1
        assert checked >= 30

    def test_linearity(self, ctx):
        rng = random.Random(11)
        syms = default_symbols(ctx)
        for _ in range(20):
            e1 = random_expr(rng, syms, 4)
            e2 = random_expr(rng, syms, 4)
            s = rng.choice(syms)
            a = round(rng.uniform(-2, 2), 3)
            lhs = partial(add(mul(const(a), e1), e2), s)
            rhs = add(mul(const(a), partial(e1, s)), partial(e2, s))
            combined = sub(lhs, rhs)
            env = draw_valid_env(combined, rng)
            if env is None:
                continue
            assert abs(evaluate(combined, env)) < 1e-10 * (
                1.0 + evaluate_scaled(combined, env)[1]
            )


class TestTotalDerivative:
    def test_chain_rule_along_dynamics(self, ctx):
        phi = (parse("u1", ctx), parse("x1", ctx))
        e = parse("(dp1 + 1)^2 * x1", ctx)
        td = total_derivative(e, phi)
        ref = parse(
            "2*ddp1*(dp1 + 1)*x1 + (dp1 + 1)^2 * u1", ctx, max_jet_order=3
        )
        assert_equivalent(td, ref)

    def test_time_alone(self, ctx):
        assert total_derivative(Var(TIME), (parse("u1", ctx), parse("0", ctx))) == Const(1)

    def test_jet_promotion(self, ctx):
        phi = (parse("u1", ctx), parse("0", ctx))
        td = total_derivative(parse("p1 + t", ctx), phi)
        assert td == add(Var(ctx.jet(1, 1)), const(1))

    def test_control_dot_is_free(self, ctx):
        phi = (parse("u1", ctx), parse("0", ctx))
        td = total_derivative(parse("u1 * x1", ctx), phi)
        assert any(s.kind == "du" for s in symbols(td))
        # u1*x1 along dx1/dt = u1:  du1*x1 + u1^2
        ref = parse("du1*x1 + u1^2", ctx, allow_controldot=True)
        assert_equivalent(td, ref)

    def test_rejects_costates_and_du(self, ctx):
        phi = (parse("u1", ctx), parse("0", ctx))
        with pytest.raises(TotalDerivativeError):
            total_derivative(Var(costate(1)), phi)
        with pytest.raises(TotalDerivativeError):
            total_derivative(
                parse("du1", ctx, allow_controldot=True), phi
            )

    def test_leibniz_rule(self, ctx):
        rng = random.Random(23)
        syms = [TIME, ctx.state(1), ctx.state(2), ctx.control(1), ctx.jet(1, 0), ctx.jet(1, 1)]
        phi = (parse("x2 * u1", ctx), parse("x1 + u1", ctx))
        for _ in range(15):
            e1 = random_expr(rng, syms, 3)
            e2 = random_expr(rng, syms, 3)
            lhs = total_derivative(mul(e1, e2), phi)
            rhs = add(
                mul(e1, total_derivative(e2, phi)),
                mul(e2, total_derivative(e1, phi)),
            )
            diff = sub(lhs, rhs)
            env = draw_valid_env(diff, rng)
            if env is None:
                continue
            v, scale = evaluate_scaled(diff, env)
            assert abs(v) < 1e-10 * (1.0 + scale)


class TestRestrict:
    def test_examples(self, ctx):
        e = parse("2*(dp1 + 1)*x1", ctx)
        assert restrict_to_zero_jets(e) == mul(const(2), Var(ctx.state(1)))
        jet_free = parse("x1 * u1", ctx)
        assert restrict_to_zero_jets(jet_free) is jet_free
        assert restrict_to_zero_jets(parse("ddp1 * x1", ctx)) == Const(0)

    def test_commutes_with_non_jet_partial(self, ctx):
        rng = random.Random(31)
        syms = default_symbols(ctx)
        non_jet = [s for s in syms if s.kind != "p"]
        for _ in range(20):
            e = random_expr(rng, syms, 4)
            s = rng.choice(non_jet)
            try:
                a = restrict_to_zero_jets(partial(e, s))
                b = partial(restrict_to_zero_jets(e), s)
            except ZeroDenominatorError:
                # a denominator restricted to the literal zero; the
                # restriction of this expression is genuinely undefined
                continue
            diff = sub(a, b)
            env = draw_valid_env(diff, rng)
            if env is None:
                continue
            v, scale = evaluate_scaled(diff, env)
            assert abs(v) <= 1e-10 * (1.0 + scale)


class TestEvaluate:
    def test_jets_at_zero(self, ctx):
        e = parse("(dp1 + 1)^2 * x1", ctx)
        env = {ctx.jet(1, 1): 0.0, ctx.state(1): 3.0}
        assert evaluate(e, env) == pytest.approx(3.0)

    def test_hamiltonian_difference(self, ctx):
        # psi0 - H for the unit-cost problem with dynamics u; hand expansion
        # psi0 - (psi0*1 + psi1*u1) vanishes when psi1 = 0
        e = parse("psi0 - (psi0*1 + psi1*u1)", ctx, allow_costates=True)
        env = {COSTATE0: -1.0, ctx.costate(1): 0.0, ctx.control(1): 0.7}
        hand = env[COSTATE0] - (env[COSTATE0] * 1 + env[costate(1)] * env[ctx.control(1)])
        assert hand == 0.0
        assert evaluate(e, env) == 0.0

    def test_division_by_zero(self, ctx):
        with pytest.raises(EvalDomainError):
            evaluate(parse("1/x1", ctx), {ctx.state(1): 0.0})

    def test_domain_errors(self, ctx):
        x = {ctx.state(1): -1.0}
        with pytest.raises(EvalDomainError):
            evaluate(parse("ln(x1)", ctx), x)
        with pytest.raises(EvalDomainError):
            evaluate(parse("sqrt(x1)", ctx), x)
        with pytest.raises(EvalDomainError):
            evaluate(parse("exp(x1^(-2))", ctx), {ctx.state(1): 1e-4})

    def test_missing_symbol(self, ctx):
        with pytest.raises(MissingSymbolError):
            evaluate(parse("x1 + u1", ctx), {ctx.state(1): 1.0})

    def test_scale_tracks_subterm_magnitude(self, ctx):
        x = Var(ctx.state(1))
        big = mul(const(1e5), x)
        e = Sum((big, Neg(big), Const(1)))
        v, scale = evaluate_scaled(e, {ctx.state(1): 1.0})
        assert v == pytest.approx(1.0)
        assert scale >= 1e5


class TestSampling:
    def test_box_and_guard(self, ctx):
        rng = random.Random(3)
        env = sample_env(default_symbols(ctx), rng)
        for v in env.values.values():
            assert SAMPLE_LOW <= v <= SAMPLE_HIGH
            assert abs(v) >= SAMPLE_GUARD

    def test_is_zero_on_folded_zero(self, ctx):
        assert is_zero(mul(const(0), Var(ctx.state(1))), trials=10, tol=1e-12, seed=0).is_zero

    def test_literal_zero_never_witnessed(self):
        for seed in range(50):
            assert is_zero(Const(0), trials=5, tol=1e-12, seed=seed).is_zero

    def test_nonzero_witness(self, ctx):
        verdict = is_zero(parse("dp1 * x1", ctx), trials=10, tol=1e-9, seed=0)
        assert not verdict.is_zero
        assert verdict.witness is not None
        w = verdict.witness.values
        assert verdict.witness_value == pytest.approx(
            w[ctx.jet(1, 1)] * w[ctx.state(1)]
        )
        assert abs(verdict.witness_value) > 1e-9

    def test_deterministic(self, ctx):
        e = parse("dp1 * x1 - x1 * dp1", ctx)
        a = is_zero(e, trials=50, tol=1e-9, seed=42)
        b = is_zero(e, trials=50, tol=1e-9, seed=42)
        assert a == b

    def test_redraw_on_domain_error(self, ctx):
        # 1/x1 is undefined only on a null set; sampling must cope
        verdict = is_zero(parse("1/x1 - 1/x1", ctx), trials=50, tol=1e-9, seed=0)
        assert verdict.is_zero

    def test_sampler_exhaustion(self, ctx):
        bad = call("ln", sub(const(-1), powi(Var(ctx.state(1)), 2)))
        with pytest.raises(SamplerExhaustedError):
            is_zero(bad, trials=5, tol=1e-9, seed=0)

    def test_validates_parameters(self, ctx):
        with pytest.raises(ValueError):
            is_zero(Const(0), trials=0)
        with pytest.raises(ValueError):
            is_zero(Const(0), tol=0.0)


class TestSubstitute:
    def test_simultaneous(self, ctx):
        # x1 -> u1, u1 -> x1 swaps without cascading
        e = parse("x1 + 2*u1", ctx)
        out = substitute(
            e, {ctx.state(1): Var(ctx.control(1)), ctx.control(1): Var(ctx.state(1))}
        )
        assert_equivalent(out, parse("u1 + 2*x1", ctx))

    def test_folds_after_substitution(self, ctx):
        e = parse("dp1 * x1", ctx)
        assert substitute(e, {ctx.jet(1, 1): Const(0)}) == Const(0)
