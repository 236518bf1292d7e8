"""Program compiler and the two interchangeable evaluation backends."""

import math
import random

import numpy as np
import pytest

from conftest import default_symbols, random_expr
from noethercheck import engine
from noethercheck import _evalpure
from noethercheck.expr import (
    Const,
    Context,
    MissingSymbolError,
    TIME,
    Var,
    call,
    evaluate,
    mul,
    powi,
    quot,
    sample_env,
    sorted_symbols,
    sub,
)
from noethercheck.grammar import parse

try:
    from noethercheck import _evalcore
except ImportError:
    _evalcore = None

BACKENDS = [("pure", _evalpure)] + ([("compiled", _evalcore)] if _evalcore else [])


@pytest.fixture
def ctx():
    return Context(n=2, r=1, k=1, m=2)


def test_backend_selected():
    assert engine.BACKEND in ("pure", "compiled")


def test_compile_is_deterministic(ctx):
    e = parse("(dp1 + 1)^2 * x1 + sin(t)", ctx)
    p1 = engine.compile_expr(e)
    p2 = engine.compile_expr(e)
    assert np.array_equal(p1.ops, p2.ops)
    assert np.array_equal(p1.args, p2.args)
    assert np.array_equal(p1.consts, p2.consts)
    assert p1.syms == p2.syms


def test_slot_order_is_canonical(ctx):
    e = parse("u1 + x1 + t + dp1", ctx)
    p = engine.compile_expr(e)
    assert [s.name for s in p.syms] == ["t", "x1", "u1", "dp1"]


def test_extra_slots_allowed(ctx):
    e = parse("x1", ctx)
    syms = tuple(sorted_symbols([ctx.state(1), ctx.control(1)]))
    p = engine.compile_expr(e, syms)
    assert engine.run(p, np.array([2.5, 99.0])) == 2.5


def test_compile_missing_slot(ctx):
    e = parse("x1 + u1", ctx)
    with pytest.raises(MissingSymbolError):
        engine.compile_expr(e, (ctx.state(1),))


@pytest.mark.parametrize("name,impl", BACKENDS)
def test_error_codes(ctx, name, impl):
    cases = [
        (quot(Const(1), Var(ctx.state(1))), 0.0, engine.ERR_DIV),
        (call("ln", Var(ctx.state(1))), -1.0, engine.ERR_LOG),
        (call("sqrt", Var(ctx.state(1))), -1.0, engine.ERR_SQRT),
        (call("exp", mul(Const(1000), Var(ctx.state(1)))), 1.0, engine.ERR_NONFINITE),
        (powi(Var(ctx.state(1)), -2), 0.0, engine.ERR_DIV),
    ]
    for e, x, expected in cases:
        p = engine.compile_expr(e)
        _, _, err = impl.run(p, np.array([x]))
        assert err == expected, f"{name}: {e!r}"


@pytest.mark.skipif(_evalcore is None, reason="compiled kernel not built")
def test_backend_agreement(ctx):
    rng = random.Random(5)
    syms = default_symbols(ctx)
    agreements = 0
    for _ in range(200):
        e = random_expr(rng, syms, 5)
        p = engine.compile_expr(e)
        env = sample_env(p.syms, rng).values
        slots = np.array([env[s] for s in p.syms])
        v_pure, s_pure, err_pure = _evalpure.run(p, slots)
        v_comp, s_comp, err_comp = _evalcore.run(p, slots)
        assert err_pure == err_comp
        if err_pure == engine.ERR_OK:
            assert v_comp == pytest.approx(v_pure, rel=1e-12, abs=1e-300)
            assert s_comp == pytest.approx(s_pure, rel=1e-12, abs=1e-300)
            agreements += 1
    assert agreements > 100


@pytest.mark.parametrize("name,impl", BACKENDS)
def test_run_bound_gathers(ctx, name, impl):
    e = parse("x1 * u1 + t", ctx)
    p = engine.compile_expr(e)
    cols = {ctx.state(1): 3, ctx.control(1): 1, TIME: 0}
    binding = engine.binding_for(p, cols)
    master = np.array([0.5, 2.0, -1.0, 4.0])
    v, _, err = impl.run_bound(p, master, binding)
    assert err == engine.ERR_OK
    assert v == pytest.approx(4.0 * 2.0 + 0.5)


@pytest.mark.parametrize("name,impl", BACKENDS)
def test_run_rows_matches_pointwise(ctx, name, impl):
    e = parse("x1^2 - u1", ctx)
    p = engine.compile_expr(e)
    cols = {ctx.state(1): 0, ctx.control(1): 1}
    binding = engine.binding_for(p, cols)
    table = np.array([[1.0, 2.0], [3.0, 4.0], [0.5, 0.25]])
    out = np.empty(3)
    err, row = impl.run_rows(p, table, binding, out)
    assert (err, row) == (engine.ERR_OK, -1)
    assert out == pytest.approx([-1.0, 5.0, 0.0])


def test_run_rows_reports_row(ctx):
    e = quot(Const(1), Var(ctx.state(1)))
    p = engine.compile_expr(e)
    binding = engine.binding_for(p, {ctx.state(1): 0})
    table = np.array([[1.0], [0.0], [2.0]])
    with pytest.raises(engine.RowEvalError) as err:
        engine.run_rows(p, table, binding)
    assert err.value.row == 1


def test_eval_uses_selected_backend(ctx):
    e = parse("sin(x1) + exp(u1)", ctx)
    env = {ctx.state(1): 0.3, ctx.control(1): -0.2}
    assert evaluate(e, env) == pytest.approx(math.sin(0.3) + math.exp(-0.2))


def test_deep_stack(ctx):
    # force a stack deeper than the kernel's fixed buffer
    e = Var(ctx.state(1))
    for _ in range(200):
        e = sub(mul(Const(1), e), Const(0.0))
    p = engine.compile_expr(e)
    assert p.max_stack > 128
    assert engine.run(p, np.array([1.25])) == pytest.approx(1.25)


def test_pow_semantics_match_math_pow(ctx):
    e = powi(Var(ctx.state(1)), 3)
    p = engine.compile_expr(e)
    for x in (-2.0, -0.5, 0.0, 1.5):
        assert engine.run(p, np.array([x])) == pytest.approx(math.pow(x, 3))
