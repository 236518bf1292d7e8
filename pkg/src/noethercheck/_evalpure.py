"""Pure-Python interpreter for compiled expression programs.

Fallback backend with the same semantics and entry points as the compiled
extension ``_evalcore``; the engine picks whichever is importable.  Opcodes
and error codes are defined in :mod:`noethercheck.engine`.
"""

from __future__ import annotations

import math

ERR_OK = 0
ERR_DIV = 1
ERR_LOG = 2
ERR_SQRT = 3
ERR_NONFINITE = 4

_isfinite = math.isfinite


def _run(ops, args, consts, slots):
    stack = [0.0] * 32
    sp = 0
    scale = 0.0
    n = len(ops)
    i = 0
    while i < n:
        op = ops[i]
        a = args[i]
        if op == 0:  # CONST
            v = consts[a]
        elif op == 1:  # VAR
            v = slots[a]
        elif op == 2:  # ADD
            sp -= 1
            v = stack[sp - 1] + stack[sp]
            sp -= 1
        elif op == 3:  # MUL
            sp -= 1
            v = stack[sp - 1] * stack[sp]
            sp -= 1
        elif op == 4:  # NEG
            v = -stack[sp - 1]
            sp -= 1
        elif op == 5:  # DIV
            den = stack[sp - 1]
            num = stack[sp - 2]
            if den == 0.0:
                return 0.0, scale, ERR_DIV
            v = num / den
            sp -= 2
        elif op == 6:  # POW (integer exponent in args)
            base = stack[sp - 1]
            if base == 0.0 and a < 0:
                return 0.0, scale, ERR_DIV
            try:
                v = math.pow(base, a)
            except (OverflowError, ValueError):
                return 0.0, scale, ERR_NONFINITE
            sp -= 1
        elif op == 7:  # SIN
            v = math.sin(stack[sp - 1])
            sp -= 1
        elif op == 8:  # COS
            v = math.cos(stack[sp - 1])
            sp -= 1
        elif op == 9:  # EXP
            arg = stack[sp - 1]
            try:
                v = math.exp(arg)
            except OverflowError:
                return 0.0, scale, ERR_NONFINITE
            sp -= 1
        elif op == 10:  # LN
            arg = stack[sp - 1]
            if arg <= 0.0:
                return 0.0, scale, ERR_LOG
            v = math.log(arg)
            sp -= 1
        else:  # 11 SQRT
            arg = stack[sp - 1]
            if arg < 0.0:
                return 0.0, scale, ERR_SQRT
            v = math.sqrt(arg)
            sp -= 1
        if not _isfinite(v):
            return 0.0, scale, ERR_NONFINITE
        av = v if v >= 0.0 else -v
        if av > scale:
            scale = av
        if sp == len(stack):
            stack.extend([0.0] * len(stack))
        stack[sp] = v
        sp += 1
        i += 1
    return stack[0], scale, ERR_OK


def run(program, slots):
    """Evaluate one program at one slot vector -> (value, scale, err)."""
    ops, args, consts = program.as_lists()
    return _run(ops, args, consts, slots)


def run_bound(program, master, binding):
    """Evaluate with slot values gathered from ``master`` via ``binding``."""
    ops, args, consts = program.as_lists()
    slots = [master[b] for b in binding]
    return _run(ops, args, consts, slots)


def run_rows(program, table, binding, out):
    """Evaluate one row of ``table`` per entry of ``out``.

    Returns ``(err, row)``; row is -1 when everything succeeded.
    """
    ops, args, consts = program.as_lists()
    nrows = table.shape[0]
    for i in range(nrows):
        row = table[i]
        slots = [row[b] for b in binding]
        v, _, err = _run(ops, args, consts, slots)
        if err != ERR_OK:
            return err, i
        out[i] = v
    return ERR_OK, -1
