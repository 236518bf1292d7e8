"""Expression text format: lexer, recursive-descent parser, and printer.

Grammar (ASCII): numbers (integer, decimal, scientific); operators
``+ - * / ^`` with conventional precedence, ``^`` binding tightest and
right-associating with integer exponents only; parentheses; function calls
``sin cos exp ln sqrt``; variables ``t``, ``x1..xn``, ``u1..ur``, jets
``p1..pk`` with ``dp1``/``ddp1`` shorthands and the general order form
``p1^(q)`` (no whitespace between the jet name and ``^(q)``), costates
``psi0``, ``psi1..psin``.

Costates are accepted only where a caller opts in (control laws, tool
output); ``du1..dur`` likewise exist only in tool output, so re-parsing
printed derivatives requires ``allow_controldot=True``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .expr import (
    Call,
    Const,
    Context,
    Expr,
    ExprError,
    Neg,
    Pow,
    Product,
    Quot,
    Sum,
    SymbolRangeError,
    UNARY_FUNCTIONS,
    Var,
    add,
    call,
    mul,
    powi,
    quot,
    var,
)


class ParseError(ExprError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # NUM, IDENT, JET, OP, LPAREN, RPAREN, EOF
    text: str
    line: int
    col: int
    value: object = None


_NUMBER = re.compile(r"(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_JET_SUFFIX = re.compile(r"\^\((\d+)\)")
_P_NAME = re.compile(r"^p(\d+)$")


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        m = _NUMBER.match(text, i)
        if m and c.isdigit() or (c == "." and m):
            s = m.group(0)
            value = float(s) if ("." in s or "e" in s or "E" in s) else int(s)
            tokens.append(Token("NUM", s, line, col, value))
            i = m.end()
            col += len(s)
            continue
        m = _IDENT.match(text, i)
        if m:
            name = m.group(0)
            end = m.end()
            jm = _P_NAME.match(name)
            if jm is not None:
                # p<j> immediately followed by ^(q) is a jet-order token,
                # not a power; whitespace breaks the jet form.
                sm = _JET_SUFFIX.match(text, end)
                if sm is not None:
                    order = int(sm.group(1))
                    tok_text = text[i : sm.end()]
                    tokens.append(
                        Token("JET", tok_text, line, col, (int(jm.group(1)), order))
                    )
                    i = sm.end()
                    col += len(tok_text)
                    continue
            tokens.append(Token("IDENT", name, line, col))
            i = end
            col += len(name)
            continue
        if c in "+-*/^":
            tokens.append(Token("OP", c, line, col))
        elif c == "(":
            tokens.append(Token("LPAREN", c, line, col))
        elif c == ")":
            tokens.append(Token("RPAREN", c, line, col))
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
        i += 1
        col += 1
    tokens.append(Token("EOF", "", line, col))
    return tokens


class _Parser:
    def __init__(
        self,
        text: str,
        ctx: Context,
        allow_costates: bool,
        allow_controldot: bool,
        max_jet_order: int,
    ):
        self.tokens = tokenize(text)
        self.pos = 0
        self.ctx = ctx
        self.allow_costates = allow_costates
        self.allow_controldot = allow_controldot
        self.max_jet_order = max_jet_order

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        tok = self.peek()
        if tok.kind == kind and (text is None or tok.text == text):
            return self.next()
        return None

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    # expr := term (('+'|'-') term)*
    def parse_expr(self) -> Expr:
        terms = [self.parse_term()]
        while True:
            if self.accept("OP", "+"):
                terms.append(self.parse_term())
            elif self.accept("OP", "-"):
                t = self.parse_term()
                terms.append(Const(-t.value) if isinstance(t, Const) else Neg(t))
            else:
                break
        return add(*terms)

    # term := unary (('*'|'/') unary)*
    def parse_term(self) -> Expr:
        left = self.parse_unary()
        while True:
            if self.accept("OP", "*"):
                left = mul(left, self.parse_unary())
            elif self.accept("OP", "/"):
                tok = self.peek()
                den = self.parse_unary()
                try:
                    left = quot(left, den)
                except ExprError as exc:
                    self.error(str(exc), tok)
            else:
                break
        return left

    # unary := '-' unary | power
    def parse_unary(self) -> Expr:
        if self.accept("OP", "-"):
            inner = self.parse_unary()
            return Const(-inner.value) if isinstance(inner, Const) else Neg(inner)
        return self.parse_power()

    # power := atom ['^' int_exponent]
    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.accept("OP", "^"):
            tok = self.peek()
            exponent = self.parse_int_exponent()
            try:
                return powi(base, exponent)
            except ExprError as exc:
                self.error(str(exc), tok)
        return base

    def parse_int_exponent(self) -> int:
        if self.accept("LPAREN"):
            v = self.parse_int_exponent()
            if not self.accept("RPAREN"):
                self.error("expected ')' in exponent")
        elif self.accept("OP", "-"):
            v = -self.parse_int_exponent()
        else:
            tok = self.peek()
            if tok.kind != "NUM" or not isinstance(tok.value, int):
                self.error("integer exponents only")
            self.next()
            v = tok.value
        if self.accept("OP", "^"):  # right-associative integer tower
            e = self.parse_int_exponent()
            if e < 0 or abs(v) > 1 and e * len(str(abs(v))) > 9:
                self.error("exponent too large")
            v = v**e
        return v

    def parse_atom(self) -> Expr:
        tok = self.next()
        if tok.kind == "NUM":
            return Const(tok.value)
        if tok.kind == "LPAREN":
            inner = self.parse_expr()
            if not self.accept("RPAREN"):
                self.error("expected ')'")
            return inner
        if tok.kind == "JET":
            j, order = tok.value
            return var(self._jet(j, order, tok))
        if tok.kind == "IDENT":
            if tok.text in UNARY_FUNCTIONS:
                if not self.accept("LPAREN"):
                    self.error(f"function {tok.text} needs an argument in parentheses", tok)
                arg = self.parse_expr()
                if not self.accept("RPAREN"):
                    self.error("expected ')'")
                try:
                    return call(tok.text, arg)
                except ExprError as exc:
                    self.error(str(exc), tok)
            return var(self._symbol(tok))
        self.error("expected a number, variable, function, or '('", tok)

    def _jet(self, j: int, order: int, tok: Token):
        ctx = self.ctx
        if ctx.k < 1:
            self.error("jet variables are not available in this context", tok)
        if not 1 <= j <= ctx.k:
            self.error(f"jet function index {j} out of range 1..{ctx.k}", tok)
        if order > self.max_jet_order:
            self.error(
                f"jet order {order} above the allowed order {self.max_jet_order}", tok
            )
        try:
            return ctx.jet(j, order)
        except SymbolRangeError as exc:
            self.error(str(exc), tok)

    def _symbol(self, tok: Token):
        name = tok.text
        ctx = self.ctx
        if name == "t":
            from .expr import TIME

            return TIME
        if name == "psi0":
            if not self.allow_costates:
                self.error("costate symbols are not allowed here", tok)
            from .expr import COSTATE0

            return COSTATE0
        for prefix, maker, bound, label in (
            ("ddp", "jet2", ctx.k, "jet function"),
            ("dp", "jet1", ctx.k, "jet function"),
            ("psi", "costate", ctx.n, "costate"),
            ("du", "controldot", ctx.r, "control"),
            ("x", "state", ctx.n, "state"),
            ("u", "control", ctx.r, "control"),
            ("p", "jet0", ctx.k, "jet function"),
        ):
            if name.startswith(prefix) and name[len(prefix) :].isdigit():
                idx = int(name[len(prefix) :])
                if not 1 <= idx <= bound:
                    self.error(f"{label} index {idx} out of range 1..{bound}", tok)
                if maker == "jet2" and self.max_jet_order < 2:
                    self.error(f"jet order 2 above the allowed order {self.max_jet_order}", tok)
                if maker == "jet1" and self.max_jet_order < 1:
                    self.error(f"jet order 1 above the allowed order {self.max_jet_order}", tok)
                if maker == "costate" and not self.allow_costates:
                    self.error("costate symbols are not allowed here", tok)
                if maker == "controldot" and not self.allow_controldot:
                    self.error("control-derivative symbols are not allowed here", tok)
                return {
                    "jet0": lambda: ctx.jet(idx, 0),
                    "jet1": lambda: ctx.jet(idx, 1),
                    "jet2": lambda: ctx.jet(idx, 2),
                    "costate": lambda: ctx.costate(idx),
                    "controldot": lambda: ctx.control_dot(idx),
                    "state": lambda: ctx.state(idx),
                    "control": lambda: ctx.control(idx),
                }[maker]()
        self.error(f"unknown symbol {name!r}", tok)


def parse(
    text: str,
    ctx: Context,
    *,
    allow_costates: bool = False,
    allow_controldot: bool = False,
    max_jet_order: int | None = None,
) -> Expr:
    """Parse an expression string against a symbol context.

    ``max_jet_order`` defaults to the context's declared order m; pass
    ``ctx.m + 1`` together with ``allow_controldot=True`` to re-read printed
    total derivatives.
    """
    p = _Parser(
        text,
        ctx,
        allow_costates=allow_costates,
        allow_controldot=allow_controldot,
        max_jet_order=ctx.m if max_jet_order is None else max_jet_order,
    )
    e = p.parse_expr()
    if p.peek().kind != "EOF":
        p.error("unexpected trailing input")
    return e


# ---------------------------------------------------------------------------
# Printing

_PREC_SUM = 1
_PREC_NEG = 2
_PREC_TERM = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _prec(e: Expr) -> int:
    if isinstance(e, Sum):
        return _PREC_SUM
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, (Product, Quot)):
        return _PREC_TERM
    if isinstance(e, Pow):
        return _PREC_POW
    if isinstance(e, Const):
        if isinstance(e.value, Fraction):
            return _PREC_NEG if e.value < 0 else _PREC_TERM
        return _PREC_NEG if e.value < 0 else _PREC_ATOM
    return _PREC_ATOM


def _render(e: Expr, parent_prec: int) -> str:
    s = _render_raw(e)
    if _prec(e) < parent_prec:
        return f"({s})"
    return s


def _render_raw(e: Expr) -> str:
    if isinstance(e, Const):
        v = e.value
        if isinstance(v, Fraction):
            return f"{v.numerator}/{v.denominator}"
        return repr(v) if isinstance(v, float) else str(v)
    if isinstance(e, Var):
        return e.sym.name
    if isinstance(e, Sum):
        parts = [_render(e.terms[0], _PREC_SUM)]
        for t in e.terms[1:]:
            if isinstance(t, Neg):
                parts.append(" - " + _render(t.arg, _PREC_TERM))
            elif isinstance(t, Const) and t.value < 0:
                parts.append(" - " + _render(Const(-t.value), _PREC_TERM))
            else:
                parts.append(" + " + _render(t, _PREC_TERM))
        return "".join(parts)
    if isinstance(e, Product):
        return "*".join(_render(f, _PREC_TERM) for f in e.factors)
    if isinstance(e, Quot):
        return _render(e.num, _PREC_TERM) + "/" + _render(e.den, _PREC_POW)
    if isinstance(e, Neg):
        return "-" + _render(e.arg, _PREC_TERM)
    if isinstance(e, Pow):
        exp = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        return _render(e.base, _PREC_ATOM) + "^" + exp
    if isinstance(e, Call):
        return f"{e.fn}({_render(e.arg, _PREC_SUM)})"
    raise TypeError(f"not an expression node: {e!r}")


def to_text(e: Expr) -> str:
    """Print an expression in the grammar of :func:`parse`; round-trips are
    semantically (not structurally) identical."""
    return _render(e, _PREC_SUM)
