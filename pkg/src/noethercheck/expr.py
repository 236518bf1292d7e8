"""Symbolic expression core.

Expressions are immutable trees over a fixed vocabulary of scalar symbols:
time ``t``, states ``x1..xn``, controls ``u1..ur``, jet variables
``p1..pk`` with derivative orders up to ``m+1``, the control derivatives
``du1..dur`` (created only by :func:`total_derivative`), and the costates
``psi0, psi1..psin``.  The module provides symbolic partial derivatives,
the total time derivative along the control system, restriction of jet
variables to zero, numeric evaluation, and a randomized zero-identity test.

The only automatic simplification is constant folding inside the smart
constructors (:func:`add`, :func:`mul`, ...); semantic equality of
expressions is established numerically, never by canonical forms.

Everything here is pure and safe to share across threads.  Random sampling
is driven by explicit integer seeds so that identity checks are fully
deterministic.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Number = Union[int, float, Fraction]

UNARY_FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt")

# Sampling box for random evaluation: uniform on [-2, 2] with a guard band
# around zero so generic denominators stay away from singularities.
SAMPLE_LOW = -2.0
SAMPLE_HIGH = 2.0
SAMPLE_GUARD = 1e-3

_MAX_REDRAWS = 50


class ExprError(Exception):
    """Base class for expression-level failures."""


class SymbolRangeError(ExprError):
    """A symbol index or jet order lies outside the declared dimensions."""


class ZeroDenominatorError(ExprError):
    """A quotient was built with the literal zero constant as denominator."""


class TotalDerivativeError(ExprError):
    """Input of the total derivative contains costate or du symbols."""


class EvalError(ExprError):
    """Base class for evaluation failures."""


class MissingSymbolError(EvalError):
    """The evaluation environment does not cover a symbol."""


class EvalDomainError(EvalError):
    """Evaluation hit a singular point (division by zero, log/sqrt domain,
    or a non-finite intermediate)."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class SamplerExhaustedError(ExprError):
    """Random sampling failed repeatedly; the expression appears undefined
    almost everywhere on the sample box."""


# ---------------------------------------------------------------------------
# Symbols


_KIND_RANK = {"t": 0, "x": 1, "u": 2, "du": 3, "p": 4, "psi0": 5, "psi": 6}


@dataclass(frozen=True)
class Sym:
    """One scalar symbol.  ``kind`` is one of t, x, u, du, p, psi0, psi;
    ``index`` is 1-based for indexed kinds; ``order`` is the jet order and
    is meaningful only for kind ``p``."""

    kind: str
    index: int = 0
    order: int = 0

    @property
    def name(self) -> str:
        if self.kind == "t":
            return "t"
        if self.kind == "psi0":
            return "psi0"
        if self.kind == "p":
            if self.order == 0:
                return f"p{self.index}"
            if self.order == 1:
                return f"dp{self.index}"
            if self.order == 2:
                return f"ddp{self.index}"
            return f"p{self.index}^({self.order})"
        return f"{self.kind}{self.index}"

    def sort_key(self) -> tuple:
        return (_KIND_RANK[self.kind], self.index, self.order)

    def __repr__(self) -> str:
        return f"Sym({self.name})"


TIME = Sym("t")
COSTATE0 = Sym("psi0")


def state(i: int) -> Sym:
    if i < 1:
        raise SymbolRangeError(f"state index must be >= 1, got {i}")
    return Sym("x", i)


def control(j: int) -> Sym:
    if j < 1:
        raise SymbolRangeError(f"control index must be >= 1, got {j}")
    return Sym("u", j)


def control_dot(j: int) -> Sym:
    if j < 1:
        raise SymbolRangeError(f"control index must be >= 1, got {j}")
    return Sym("du", j)


def jet(j: int, order: int = 0) -> Sym:
    if j < 1:
        raise SymbolRangeError(f"jet function index must be >= 1, got {j}")
    if order < 0:
        raise SymbolRangeError(f"jet order must be >= 0, got {order}")
    return Sym("p", j, order)


def costate(i: int) -> Sym:
    if i < 1:
        raise SymbolRangeError(f"costate index must be >= 1, got {i}")
    return Sym("psi", i)


@dataclass(frozen=True)
class Context:
    """Symbol table dimensions: n states, r controls, k jet functions with
    derivative orders 0..m (total differentiation adds one extra order)."""

    n: int
    r: int
    k: int = 0
    m: int = 0

    def __post_init__(self):
        if self.n < 1 or self.r < 1:
            raise SymbolRangeError("context needs n >= 1 and r >= 1")
        if self.k < 0 or self.m < 0:
            raise SymbolRangeError("context needs k >= 0 and m >= 0")

    def state(self, i: int) -> Sym:
        if not 1 <= i <= self.n:
            raise SymbolRangeError(f"state index {i} out of range 1..{self.n}")
        return state(i)

    def control(self, j: int) -> Sym:
        if not 1 <= j <= self.r:
            raise SymbolRangeError(f"control index {j} out of range 1..{self.r}")
        return control(j)

    def control_dot(self, j: int) -> Sym:
        if not 1 <= j <= self.r:
            raise SymbolRangeError(f"control index {j} out of range 1..{self.r}")
        return control_dot(j)

    def jet(self, j: int, order: int = 0) -> Sym:
        if not 1 <= j <= self.k:
            raise SymbolRangeError(f"jet function index {j} out of range 1..{self.k}")
        if not 0 <= order <= self.m + 1:
            raise SymbolRangeError(
                f"jet order {order} out of range 0..{self.m + 1} (one total "
                f"derivative above the declared order m={self.m})"
            )
        return jet(j, order)

    def costate(self, i: int) -> Sym:
        if not 1 <= i <= self.n:
            raise SymbolRangeError(f"costate index {i} out of range 1..{self.n}")
        return costate(i)


# ---------------------------------------------------------------------------
# Expression nodes


class Expr:
    """Base class of all expression nodes.  Instances are immutable."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, _negated(as_expr(other)))

    def __rsub__(self, other):
        return add(other, _negated(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return quot(self, other)

    def __rtruediv__(self, other):
        return quot(other, self)

    def __pow__(self, exponent):
        return powi(self, exponent)

    def __neg__(self):
        return neg(self)

    def __str__(self) -> str:
        from .grammar import to_text

        return to_text(self)


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: Number

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, repr=False)
class Var(Expr):
    sym: Sym

    def __repr__(self):
        return f"Var({self.sym.name})"


@dataclass(frozen=True, repr=False)
class Sum(Expr):
    terms: tuple

    def __repr__(self):
        return f"Sum({', '.join(map(repr, self.terms))})"


@dataclass(frozen=True, repr=False)
class Product(Expr):
    factors: tuple

    def __repr__(self):
        return f"Product({', '.join(map(repr, self.factors))})"


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    arg: Expr

    def __repr__(self):
        return f"Neg({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Quot(Expr):
    num: Expr
    den: Expr

    def __repr__(self):
        return f"Quot({self.num!r}, {self.den!r})"


@dataclass(frozen=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: int

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exponent})"


@dataclass(frozen=True, repr=False)
class Call(Expr):
    fn: str
    arg: Expr

    def __repr__(self):
        return f"Call({self.fn}, {self.arg!r})"


# ---------------------------------------------------------------------------
# Smart constructors (constant folding only)


def _normalize_number(v: Number) -> Number:
    if isinstance(v, bool):
        raise TypeError("booleans are not expression constants")
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else v
    if isinstance(v, int):
        return v
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ExprError(f"constants must be finite, got {v!r}")
        return v
    raise TypeError(f"not a numeric constant: {v!r}")


def const(v: Number) -> Const:
    return Const(_normalize_number(v))


def var(sym: Sym) -> Var:
    return Var(sym)


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, Fraction)):
        return const(v)
    raise TypeError(f"cannot interpret {v!r} as an expression")


def _is_exact(v: Number) -> bool:
    return isinstance(v, (int, Fraction))


def _negated(e: Expr) -> Expr:
    if isinstance(e, Const):
        return const(-e.value)
    return Neg(e)


def add(*terms) -> Expr:
    flat: list[Expr] = []
    acc: Number = 0
    has_const = False
    stack = [as_expr(t) for t in terms]
    for t in stack:
        parts = t.terms if isinstance(t, Sum) else (t,)
        for p in parts:
            if isinstance(p, Const):
                acc = acc + p.value
                has_const = True
            else:
                flat.append(p)
    acc = _normalize_number(acc)
    if has_const and (acc != 0 or not flat):
        flat.append(Const(acc))
    if not flat:
        return Const(0)
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def mul(*factors) -> Expr:
    flat: list[Expr] = []
    acc: Number = 1
    has_const = False
    for f in (as_expr(f) for f in factors):
        parts = f.factors if isinstance(f, Product) else (f,)
        for p in parts:
            if isinstance(p, Const):
                acc = acc * p.value
                has_const = True
            else:
                flat.append(p)
    acc = _normalize_number(acc)
    if has_const and acc == 0:
        return Const(acc)
    if has_const and acc != 1:
        flat.insert(0, Const(acc))
    if not flat:
        return Const(acc if has_const else 1)
    if len(flat) == 1:
        return flat[0]
    return Product(tuple(flat))


def neg(e) -> Expr:
    e = as_expr(e)
    if isinstance(e, Const):
        return const(-e.value)
    return Neg(e)


def sub(a, b) -> Expr:
    return add(a, _negated(as_expr(b)))


def quot(num, den) -> Expr:
    num = as_expr(num)
    den = as_expr(den)
    if isinstance(den, Const):
        if den.value == 0:
            raise ZeroDenominatorError("denominator is the literal zero constant")
        if isinstance(num, Const):
            if _is_exact(num.value) and _is_exact(den.value):
                return const(Fraction(num.value) / Fraction(den.value))
            return const(num.value / den.value)
    return Quot(num, den)


def powi(base, exponent: int) -> Expr:
    base = as_expr(base)
    if isinstance(exponent, bool) or not isinstance(exponent, int):
        raise TypeError("exponents must be plain integers")
    if exponent == 0:
        return Const(1)
    if exponent == 1:
        return base
    if isinstance(base, Const):
        v = base.value
        if v == 0 and exponent < 0:
            raise ZeroDenominatorError("zero base with negative exponent")
        try:
            if _is_exact(v):
                return const(Fraction(v) ** exponent)
            return const(v**exponent)
        except OverflowError as exc:
            raise ExprError("constant power overflows") from exc
    return Pow(base, exponent)


_FOLD_FN = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
}


def call(fn: str, arg) -> Expr:
    if fn not in UNARY_FUNCTIONS:
        raise ExprError(f"unknown function {fn!r}")
    arg = as_expr(arg)
    if isinstance(arg, Const):
        try:
            return const(_FOLD_FN[fn](float(arg.value)))
        except (ValueError, OverflowError) as exc:
            raise ExprError(f"{fn} undefined at constant {arg.value}") from exc
    return Call(fn, arg)


# ---------------------------------------------------------------------------
# Structure queries


def symbols(e: Expr) -> frozenset[Sym]:
    """All symbols occurring in the expression."""
    out: set[Sym] = set()
    _collect_symbols(e, out)
    return frozenset(out)


def _collect_symbols(e: Expr, out: set) -> None:
    if isinstance(e, Var):
        out.add(e.sym)
    elif isinstance(e, Sum):
        for t in e.terms:
            _collect_symbols(t, out)
    elif isinstance(e, Product):
        for f in e.factors:
            _collect_symbols(f, out)
    elif isinstance(e, Neg):
        _collect_symbols(e.arg, out)
    elif isinstance(e, Quot):
        _collect_symbols(e.num, out)
        _collect_symbols(e.den, out)
    elif isinstance(e, Pow):
        _collect_symbols(e.base, out)
    elif isinstance(e, Call):
        _collect_symbols(e.arg, out)


def has_kind(e: Expr, *kinds: str) -> bool:
    return any(s.kind in kinds for s in symbols(e))


def sorted_symbols(syms: Iterable[Sym]) -> tuple[Sym, ...]:
    return tuple(sorted(syms, key=Sym.sort_key))


# ---------------------------------------------------------------------------
# Calculus


def substitute(e: Expr, mapping: Mapping[Sym, Expr]) -> Expr:
    """Simultaneous substitution of symbols by expressions, rebuilding the
    tree through the folding constructors."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return mapping.get(e.sym, e)
    if isinstance(e, Sum):
        return add(*(substitute(t, mapping) for t in e.terms))
    if isinstance(e, Product):
        return mul(*(substitute(f, mapping) for f in e.factors))
    if isinstance(e, Neg):
        return neg(substitute(e.arg, mapping))
    if isinstance(e, Quot):
        return quot(substitute(e.num, mapping), substitute(e.den, mapping))
    if isinstance(e, Pow):
        return powi(substitute(e.base, mapping), e.exponent)
    if isinstance(e, Call):
        return call(e.fn, substitute(e.arg, mapping))
    raise TypeError(f"not an expression node: {e!r}")


def partial(e: Expr, s: Sym) -> Expr:
    """Symbolic partial derivative treating all other symbols as independent."""
    if isinstance(e, Const):
        return Const(0)
    if isinstance(e, Var):
        return Const(1) if e.sym == s else Const(0)
    if isinstance(e, Sum):
        return add(*(partial(t, s) for t in e.terms))
    if isinstance(e, Product):
        terms = []
        for i, f in enumerate(e.factors):
            df = partial(f, s)
            if isinstance(df, Const) and df.value == 0:
                continue
            rest = e.factors[:i] + e.factors[i + 1 :]
            terms.append(mul(df, *rest))
        return add(*terms)
    if isinstance(e, Neg):
        return neg(partial(e.arg, s))
    if isinstance(e, Quot):
        dn = partial(e.num, s)
        dd = partial(e.den, s)
        return quot(sub(mul(dn, e.den), mul(e.num, dd)), powi(e.den, 2))
    if isinstance(e, Pow):
        return mul(const(e.exponent), powi(e.base, e.exponent - 1), partial(e.base, s))
    if isinstance(e, Call):
        inner = partial(e.arg, s)
        if e.fn == "sin":
            outer = call("cos", e.arg)
        elif e.fn == "cos":
            outer = neg(call("sin", e.arg))
        elif e.fn == "exp":
            outer = call("exp", e.arg)
        elif e.fn == "ln":
            return quot(inner, e.arg)
        else:  # sqrt
            return quot(inner, mul(const(2), call("sqrt", e.arg)))
        return mul(outer, inner)
    raise TypeError(f"not an expression node: {e!r}")


def total_derivative(e: Expr, phi: Sequence[Expr]) -> Expr:
    """Total time derivative along the control system.

    The chain rule is applied with the state derivatives replaced by the
    dynamics right-hand sides ``phi`` (the expressions hold along admissible
    pairs), the control derivatives entering as free ``du`` symbols, and
    each jet variable of order q promoted to order q+1.
    """
    syms = symbols(e)
    for s in syms:
        if s.kind in ("psi0", "psi", "du"):
            raise TotalDerivativeError(
                f"total derivative input must not contain {s.name}"
            )
    terms = [partial(e, TIME)]
    for s in sorted_symbols(syms):
        if s.kind == "x":
            if s.index > len(phi):
                raise TotalDerivativeError(
                    f"no dynamics component for state x{s.index}"
                )
            terms.append(mul(phi[s.index - 1], partial(e, s)))
        elif s.kind == "u":
            terms.append(mul(Var(control_dot(s.index)), partial(e, s)))
        elif s.kind == "p":
            terms.append(mul(Var(jet(s.index, s.order + 1)), partial(e, s)))
    return add(*terms)


def restrict_to_zero_jets(e: Expr) -> Expr:
    """Replace every jet variable (all orders) by the zero constant."""
    mapping = {s: Const(0) for s in symbols(e) if s.kind == "p"}
    if not mapping:
        return e
    return substitute(e, mapping)


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(e: Expr, env: Mapping[Sym, float]) -> float:
    """Evaluate at a point.  Raises :class:`MissingSymbolError` or
    :class:`EvalDomainError` on failure."""
    from . import engine

    return engine.eval_in_env(e, env)


def evaluate_scaled(e: Expr, env: Mapping[Sym, float]) -> tuple[float, float]:
    """Evaluate and also return the largest absolute value reached by any
    subterm, used to scale zero-test tolerances."""
    from . import engine

    return engine.eval_in_env_scaled(e, env)


# ---------------------------------------------------------------------------
# Random sampling and the zero-identity test


@dataclass(frozen=True)
class SampleEnv:
    """One random evaluation point together with the seed that produced it."""

    values: Mapping[Sym, float]
    seed: int | None = None

    def named(self) -> dict[str, float]:
        return {s.name: v for s, v in sorted(self.values.items(), key=lambda kv: kv[0].sort_key())}


def _sample_value(rng: random.Random) -> float:
    while True:
        v = rng.uniform(SAMPLE_LOW, SAMPLE_HIGH)
        if abs(v) >= SAMPLE_GUARD:
            return v


def sample_env(syms: Iterable[Sym], rng: random.Random, seed: int | None = None) -> SampleEnv:
    values = {s: _sample_value(rng) for s in sorted_symbols(syms)}
    return SampleEnv(values=values, seed=seed)


def _trial_seed(seed: int, trial: int, attempt: int) -> int:
    return (seed * 1_000_003 + trial) * 101 + attempt


@dataclass(frozen=True)
class ZeroVerdict:
    """Outcome of the randomized zero-identity test.  ``is_zero`` means every
    sampled residual stayed below tol scaled by the subterm magnitude; a
    witness records the first sample where it did not."""

    is_zero: bool
    trials: int
    tol: float
    seed: int
    max_scaled_residual: float
    witness: SampleEnv | None = None
    witness_value: float | None = None


def is_zero(e: Expr, trials: int = 200, tol: float = 1e-9, seed: int = 0) -> ZeroVerdict:
    """Test whether an expression is identically zero by evaluating it at
    ``trials`` random sample points.

    Sample points where evaluation hits a domain error are redrawn a bounded
    number of times; running out of redraws raises
    :class:`SamplerExhaustedError`.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    syms = sorted_symbols(symbols(e))
    worst = 0.0
    for trial in range(trials):
        env = None
        value = scale = 0.0
        for attempt in range(_MAX_REDRAWS):
            s = _trial_seed(seed, trial, attempt)
            candidate = sample_env(syms, random.Random(s), seed=s)
            try:
                value, scale = evaluate_scaled(e, candidate.values)
            except EvalDomainError:
                continue
            env = candidate
            break
        if env is None:
            raise SamplerExhaustedError(
                f"no valid sample point found in {_MAX_REDRAWS} draws; the "
                "expression appears undefined almost everywhere on the sample box"
            )
        scaled = abs(value) / (1.0 + scale)
        if abs(value) > tol * (1.0 + scale):
            return ZeroVerdict(
                is_zero=False,
                trials=trials,
                tol=tol,
                seed=seed,
                max_scaled_residual=max(worst, scaled),
                witness=env,
                witness_value=value,
            )
        worst = max(worst, scaled)
    return ZeroVerdict(
        is_zero=True,
        trials=trials,
        tol=tol,
        seed=seed,
        max_scaled_residual=worst,
    )
