"""Expression-to-program compiler and evaluation backend selection.

Expressions are flattened once into postfix programs (opcode/argument
arrays over a float constant pool and a slot vector of symbol values) and
then interpreted by one of two interchangeable backends:

* ``_evalcore`` - Cython extension, built by ``setup.py`` (the hot kernel);
* ``_evalpure`` - pure Python, always available.

The compiled backend is preferred when importable; set the environment
variable ``NOETHERCHECK_PURE=1`` before import to force the fallback.
``benchmarks/bench_eval.py`` compares the two on representative workloads.

Opcodes: 0 CONST, 1 VAR, 2 ADD, 3 MUL, 4 NEG, 5 DIV, 6 POW(int arg),
7 SIN, 8 COS, 9 EXP, 10 LN, 11 SQRT.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .expr import (
    Call,
    Const,
    EvalDomainError,
    Expr,
    MissingSymbolError,
    Neg,
    Pow,
    Product,
    Quot,
    Sum,
    Sym,
    Var,
    sorted_symbols,
    symbols,
)

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_MUL = 3
OP_NEG = 4
OP_DIV = 5
OP_POW = 6
OP_SIN = 7
OP_COS = 8
OP_EXP = 9
OP_LN = 10
OP_SQRT = 11

_FN_OPS = {"sin": OP_SIN, "cos": OP_COS, "exp": OP_EXP, "ln": OP_LN, "sqrt": OP_SQRT}

ERR_OK = 0
ERR_DIV = 1
ERR_LOG = 2
ERR_SQRT = 3
ERR_NONFINITE = 4

_ERR_REASON = {
    ERR_DIV: "division by zero",
    ERR_LOG: "ln of a non-positive value",
    ERR_SQRT: "sqrt of a negative value",
    ERR_NONFINITE: "non-finite intermediate value",
}

if os.environ.get("NOETHERCHECK_PURE") == "1":
    from . import _evalpure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _evalcore as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _evalpure as _impl

        BACKEND = "pure"


@dataclass(frozen=True, eq=False)
class Program:
    """A compiled expression: postfix opcode stream plus its slot layout."""

    ops: np.ndarray
    args: np.ndarray
    consts: np.ndarray
    syms: tuple[Sym, ...]
    max_stack: int
    _lists: list = field(default_factory=list, compare=False, repr=False)

    def as_lists(self):
        # cached plain-list view for the pure backend
        if not self._lists:
            self._lists.append(
                (self.ops.tolist(), self.args.tolist(), self.consts.tolist())
            )
        return self._lists[0]

    @property
    def slot_index(self) -> dict[Sym, int]:
        return {s: i for i, s in enumerate(self.syms)}


def compile_expr(e: Expr, syms: tuple[Sym, ...] | None = None) -> Program:
    """Flatten an expression into a postfix program.

    ``syms`` fixes the slot order; by default the expression's symbols in
    canonical order.  Symbols in ``syms`` beyond those used are allowed.
    """
    if syms is None:
        syms = sorted_symbols(symbols(e))
    slot = {s: i for i, s in enumerate(syms)}
    ops: list[int] = []
    args: list[int] = []
    consts: list[float] = []
    const_ix: dict[float, int] = {}

    depth = 0
    max_depth = 0

    def push(op: int, arg: int = 0, pops: int = 0):
        nonlocal depth, max_depth
        depth -= pops
        ops.append(op)
        args.append(arg)
        depth += 1
        max_depth = max(max_depth, depth)

    def emit(node: Expr):
        if isinstance(node, Const):
            v = float(node.value)
            ix = const_ix.setdefault(v, len(consts))
            if ix == len(consts):
                consts.append(v)
            push(OP_CONST, ix)
        elif isinstance(node, Var):
            try:
                push(OP_VAR, slot[node.sym])
            except KeyError:
                raise MissingSymbolError(
                    f"symbol {node.sym.name} has no slot in this program"
                ) from None
        elif isinstance(node, Sum):
            emit(node.terms[0])
            for t in node.terms[1:]:
                emit(t)
                push(OP_ADD, 0, pops=2)
        elif isinstance(node, Product):
            emit(node.factors[0])
            for f in node.factors[1:]:
                emit(f)
                push(OP_MUL, 0, pops=2)
        elif isinstance(node, Neg):
            emit(node.arg)
            push(OP_NEG, 0, pops=1)
        elif isinstance(node, Quot):
            emit(node.num)
            emit(node.den)
            push(OP_DIV, 0, pops=2)
        elif isinstance(node, Pow):
            emit(node.base)
            push(OP_POW, node.exponent, pops=1)
        elif isinstance(node, Call):
            emit(node.arg)
            push(_FN_OPS[node.fn], 0, pops=1)
        else:
            raise TypeError(f"not an expression node: {node!r}")

    emit(e)
    return Program(
        ops=np.asarray(ops, dtype=np.int32),
        args=np.asarray(args, dtype=np.int32),
        consts=np.asarray(consts, dtype=np.float64),
        syms=tuple(syms),
        max_stack=max(max_depth, 1),
    )


@lru_cache(maxsize=4096)
def _compiled(e: Expr, syms: tuple[Sym, ...] | None) -> Program:
    return compile_expr(e, syms)


def compile_cached(e: Expr, syms: tuple[Sym, ...] | None = None) -> Program:
    return _compiled(e, syms)


def _raise_on(err: int):
    if err != ERR_OK:
        raise EvalDomainError(_ERR_REASON[err])


def run(program: Program, slots: np.ndarray) -> float:
    value, _, err = _impl.run(program, slots)
    _raise_on(err)
    return value


def run_scaled(program: Program, slots: np.ndarray) -> tuple[float, float]:
    value, scale, err = _impl.run(program, slots)
    _raise_on(err)
    return value, scale


def run_bound(program: Program, master: np.ndarray, binding: np.ndarray) -> float:
    """Evaluate with slots gathered from a master value vector."""
    value, _, err = _impl.run_bound(program, master, binding)
    _raise_on(err)
    return value


class RowEvalError(EvalDomainError):
    """Domain error while sweeping a table; carries the offending row."""

    def __init__(self, reason: str, row: int):
        super().__init__(reason)
        self.row = row


def run_rows(program: Program, table: np.ndarray, binding: np.ndarray) -> np.ndarray:
    """Evaluate the program on every row of a (rows, columns) table."""
    out = np.empty(table.shape[0], dtype=np.float64)
    err, row = _impl.run_rows(program, table, binding, out)
    if err != ERR_OK:
        raise RowEvalError(_ERR_REASON[err], int(row))
    return out


def binding_for(program: Program, columns: Mapping[Sym, int]) -> np.ndarray:
    """Map each program slot to a table column index."""
    idx = []
    for s in program.syms:
        if s not in columns:
            raise MissingSymbolError(f"no value column for symbol {s.name}")
        idx.append(columns[s])
    return np.asarray(idx, dtype=np.int32)


def _slots_for(program: Program, env: Mapping[Sym, float]) -> np.ndarray:
    vals = np.empty(len(program.syms), dtype=np.float64)
    for i, s in enumerate(program.syms):
        try:
            vals[i] = env[s]
        except KeyError:
            raise MissingSymbolError(f"no value for symbol {s.name}") from None
    return vals


def eval_in_env(e: Expr, env: Mapping[Sym, float]) -> float:
    program = compile_cached(e, None)
    return run(program, _slots_for(program, env))


def eval_in_env_scaled(e: Expr, env: Mapping[Sym, float]) -> tuple[float, float]:
    program = compile_cached(e, None)
    return run_scaled(program, _slots_for(program, env))
