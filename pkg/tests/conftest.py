"""Shared fixtures: the bundled example systems built programmatically, a
seeded random expression generator, and numeric comparison helpers."""

from __future__ import annotations

import math
import random

import pytest

from noethercheck.expr import (
    Context,
    EvalDomainError,
    Expr,
    ExprError,
    Sym,
    Var,
    add,
    call,
    const,
    evaluate,
    mul,
    neg,
    powi,
    quot,
    sample_env,
    sorted_symbols,
    symbols,
)
from noethercheck.grammar import parse
from noethercheck.problem import Bound, OcpProblem
from noethercheck.symmetry import GaugeSymmetry


@pytest.fixture
def ctx4():
    """Context of the time-optimal example: one state, one control, one
    arbitrary function with jets up to second order."""
    return Context(n=1, r=1, k=1, m=2)


@pytest.fixture
def time_optimal(ctx4):
    return OcpProblem(
        name="time_optimal",
        n=1,
        r=1,
        a=0.0,
        b=1.0,
        L=parse("1", ctx4),
        phi=(parse("u1", ctx4),),
        omega=(Bound(-1.0, 1.0),),
    )


@pytest.fixture
def time_optimal_symmetry(ctx4):
    return GaugeSymmetry(
        k=1,
        m=2,
        T=parse("p1 + t", ctx4),
        X=(parse("(dp1 + 1)^2 * x1", ctx4),),
        U=(parse("2*ddp1*x1 + (dp1 + 1)*u1", ctx4),),
        F=parse("p1", ctx4),
        lam=((0.0, 0.0, 0.0),),
    )


@pytest.fixture
def ctx_shift():
    return Context(n=1, r=1, k=1, m=1)


@pytest.fixture
def state_shift(ctx_shift):
    return OcpProblem(
        name="state_shift",
        n=1,
        r=1,
        a=0.0,
        b=1.0,
        L=parse("u1", ctx_shift),
        phi=(parse("u1", ctx_shift),),
        omega=(Bound(-5.0, 5.0),),
    )


@pytest.fixture
def state_shift_symmetry(ctx_shift):
    return GaugeSymmetry(
        k=1,
        m=1,
        T=parse("t", ctx_shift),
        X=(parse("x1 + p1", ctx_shift),),
        U=(parse("u1 + dp1", ctx_shift),),
        F=parse("p1", ctx_shift),
        lam=((0.0, 0.0),),
    )


@pytest.fixture
def scaling(ctx_shift):
    return OcpProblem(
        name="scaling",
        n=1,
        r=1,
        a=0.0,
        b=1.0,
        L=parse("u1", ctx_shift),
        phi=(parse("x1 * u1", ctx_shift),),
        omega=(Bound(-3.0, 3.0),),
    )


@pytest.fixture
def scaling_symmetry(ctx_shift):
    return GaugeSymmetry(
        k=1,
        m=1,
        T=parse("t", ctx_shift),
        X=(parse("exp(p1) * x1", ctx_shift),),
        U=(parse("u1 + dp1", ctx_shift),),
        F=parse("p1", ctx_shift),
        lam=((0.0, 0.0),),
    )


# ---------------------------------------------------------------------------
# Random expressions


def random_expr(rng: random.Random, syms: list[Sym], depth: int) -> Expr:
    """Random expression of bounded depth over the given symbols."""
    if depth <= 0 or rng.random() < 0.3:
        if rng.random() < 0.75:
            return Var(rng.choice(syms))
        return const(round(rng.uniform(-3.0, 3.0), 2))
    kind = rng.choices(
        ("sum", "prod", "neg", "quot", "pow", "call"),
        weights=(28, 28, 10, 12, 12, 10),
    )[0]
    try:
        if kind == "sum":
            return add(
                *(random_expr(rng, syms, depth - 1) for _ in range(rng.randint(2, 3)))
            )
        if kind == "prod":
            return mul(
                *(random_expr(rng, syms, depth - 1) for _ in range(rng.randint(2, 3)))
            )
        if kind == "neg":
            return neg(random_expr(rng, syms, depth - 1))
        if kind == "quot":
            return quot(
                random_expr(rng, syms, depth - 1), random_expr(rng, syms, depth - 1)
            )
        if kind == "pow":
            return powi(random_expr(rng, syms, depth - 1), rng.choice((-2, -1, 2, 3)))
        return call(
            rng.choice(("sin", "cos", "exp", "ln", "sqrt")),
            random_expr(rng, syms, depth - 1),
        )
    except ExprError:
        # constant folding hit a literal singularity; fall back to a leaf
        return Var(rng.choice(syms))


def default_symbols(ctx: Context) -> list[Sym]:
    syms: list[Sym] = [Sym("t")]
    syms += [ctx.state(i) for i in range(1, ctx.n + 1)]
    syms += [ctx.control(j) for j in range(1, ctx.r + 1)]
    for j in range(1, ctx.k + 1):
        syms += [ctx.jet(j, q) for q in range(ctx.m + 1)]
    return syms


def draw_valid_env(e: Expr, rng: random.Random, magnitude_cap: float = 1e6, attempts: int = 80):
    """A sample point where the expression evaluates to a sane magnitude, or
    None when the expression is ill-behaved almost everywhere."""
    syms = sorted_symbols(symbols(e))
    for _ in range(attempts):
        env = sample_env(syms, rng).values
        try:
            v = evaluate(e, env)
        except EvalDomainError:
            continue
        if abs(v) <= magnitude_cap:
            return env
    return None


def central_difference(e: Expr, s: Sym, env, h: float = 1e-6) -> float:
    hi = dict(env)
    lo = dict(env)
    hi[s] = env[s] + h
    lo[s] = env[s] - h
    return (evaluate(e, hi) - evaluate(e, lo)) / (2.0 * h)


def assert_equivalent(a: Expr, b: Expr, envs: int = 100, tol: float = 1e-9, seed: int = 0):
    """Numeric equivalence of two expressions at random sample points."""
    syms = sorted_symbols(symbols(a) | symbols(b))
    rng = random.Random(seed)
    checked = 0
    attempts = 0
    while checked < envs:
        attempts += 1
        assert attempts < 50 * envs, "could not find enough valid sample points"
        env = sample_env(syms, rng).values
        try:
            va = evaluate(a, env)
            vb = evaluate(b, env)
        except EvalDomainError:
            continue
        assert abs(va - vb) <= tol * (1.0 + max(abs(va), abs(vb))), (
            f"expressions differ: {va!r} vs {vb!r} at {env}"
        )
        checked += 1


def bundled(name: str) -> str:
    """Path of a bundled example document."""
    from importlib.resources import files

    return str(files("noethercheck") / "examples" / name)
