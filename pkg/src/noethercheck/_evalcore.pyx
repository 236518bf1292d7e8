# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled interpreter for expression programs (hot evaluation kernel).

Mirrors :mod:`noethercheck._evalpure` exactly: same opcodes, same error
codes, same scale tracking.  Selected automatically by the engine when the
extension built.
"""

from libc.math cimport sin, cos, exp, log, sqrt, pow, isfinite
from libc.stdlib cimport malloc, free

cdef enum:
    C_ERR_OK = 0
    C_ERR_DIV = 1
    C_ERR_LOG = 2
    C_ERR_SQRT = 3
    C_ERR_NONFINITE = 4

ERR_OK = 0
ERR_DIV = 1
ERR_LOG = 2
ERR_SQRT = 3
ERR_NONFINITE = 4

cdef int _run(const int[:] ops, const int[:] args, const double[:] consts,
              const double* slots, double* stack, double* value,
              double* scale) nogil:
    cdef Py_ssize_t n = ops.shape[0]
    cdef Py_ssize_t i
    cdef int op, a
    cdef int sp = 0
    cdef double v, den, num, arg, av
    cdef double sc = 0.0
    for i in range(n):
        op = ops[i]
        a = args[i]
        if op == 0:      # CONST
            v = consts[a]
        elif op == 1:    # VAR
            v = slots[a]
        elif op == 2:    # ADD
            sp -= 1
            v = stack[sp - 1] + stack[sp]
            sp -= 1
        elif op == 3:    # MUL
            sp -= 1
            v = stack[sp - 1] * stack[sp]
            sp -= 1
        elif op == 4:    # NEG
            v = -stack[sp - 1]
            sp -= 1
        elif op == 5:    # DIV
            den = stack[sp - 1]
            num = stack[sp - 2]
            if den == 0.0:
                scale[0] = sc
                return C_ERR_DIV
            v = num / den
            sp -= 2
        elif op == 6:    # POW (integer exponent in args)
            arg = stack[sp - 1]
            if arg == 0.0 and a < 0:
                scale[0] = sc
                return C_ERR_DIV
            v = pow(arg, <double> a)
            sp -= 1
        elif op == 7:    # SIN
            v = sin(stack[sp - 1])
            sp -= 1
        elif op == 8:    # COS
            v = cos(stack[sp - 1])
            sp -= 1
        elif op == 9:    # EXP
            v = exp(stack[sp - 1])
            sp -= 1
        elif op == 10:   # LN
            arg = stack[sp - 1]
            if arg <= 0.0:
                scale[0] = sc
                return C_ERR_LOG
            v = log(arg)
            sp -= 1
        else:            # 11 SQRT
            arg = stack[sp - 1]
            if arg < 0.0:
                scale[0] = sc
                return C_ERR_SQRT
            v = sqrt(arg)
            sp -= 1
        if not isfinite(v):
            scale[0] = sc
            return C_ERR_NONFINITE
        av = v if v >= 0.0 else -v
        if av > sc:
            sc = av
        stack[sp] = v
        sp += 1
    value[0] = stack[0]
    scale[0] = sc
    return C_ERR_OK


def run(program, slots):
    """Evaluate one program at one slot vector -> (value, scale, err)."""
    cdef const int[:] ops = program.ops
    cdef const int[:] args = program.args
    cdef const double[:] consts = program.consts
    cdef double[:] sl = slots
    cdef double stack_buf[128]
    cdef double* stack = stack_buf
    cdef double* heap = NULL
    cdef double value = 0.0, scale = 0.0
    cdef int err
    cdef double* slot_ptr = NULL
    if sl.shape[0] > 0:
        slot_ptr = &sl[0]
    if program.max_stack > 128:
        heap = <double*> malloc(program.max_stack * sizeof(double))
        stack = heap
    try:
        err = _run(ops, args, consts, slot_ptr, stack, &value, &scale)
    finally:
        if heap != NULL:
            free(heap)
    return value, scale, err


def run_bound(program, master, binding):
    """Evaluate with slot values gathered from ``master`` via ``binding``."""
    cdef const int[:] ops = program.ops
    cdef const int[:] args = program.args
    cdef const double[:] consts = program.consts
    cdef const double[:] mv = master
    cdef const int[:] bind = binding
    cdef double slots_buf[128]
    cdef double stack_buf[128]
    cdef double* slots = slots_buf
    cdef double* stack = stack_buf
    cdef double* heap_slots = NULL
    cdef double* heap_stack = NULL
    cdef Py_ssize_t ns = bind.shape[0]
    cdef Py_ssize_t i
    cdef double value = 0.0, scale = 0.0
    cdef int err
    if ns > 128:
        heap_slots = <double*> malloc(ns * sizeof(double))
        slots = heap_slots
    if program.max_stack > 128:
        heap_stack = <double*> malloc(program.max_stack * sizeof(double))
        stack = heap_stack
    try:
        for i in range(ns):
            slots[i] = mv[bind[i]]
        err = _run(ops, args, consts, slots, stack, &value, &scale)
    finally:
        if heap_slots != NULL:
            free(heap_slots)
        if heap_stack != NULL:
            free(heap_stack)
    return value, scale, err


def run_rows(program, table, binding, out):
    """Evaluate one row of ``table`` per entry of ``out``.

    Returns ``(err, row)``; row is -1 when everything succeeded.
    """
    cdef const int[:] ops = program.ops
    cdef const int[:] args = program.args
    cdef const double[:] consts = program.consts
    cdef const double[:, :] tv = table
    cdef const int[:] bind = binding
    cdef double[:] ov = out
    cdef double slots_buf[128]
    cdef double stack_buf[128]
    cdef double* slots = slots_buf
    cdef double* stack = stack_buf
    cdef double* heap_slots = NULL
    cdef double* heap_stack = NULL
    cdef Py_ssize_t ns = bind.shape[0]
    cdef Py_ssize_t nrows = tv.shape[0]
    cdef Py_ssize_t i, j
    cdef double value = 0.0, scale = 0.0
    cdef int err = ERR_OK
    cdef Py_ssize_t bad_row = -1
    if ns > 128:
        heap_slots = <double*> malloc(ns * sizeof(double))
        slots = heap_slots
    if program.max_stack > 128:
        heap_stack = <double*> malloc(program.max_stack * sizeof(double))
        stack = heap_stack
    try:
        with nogil:
            for i in range(nrows):
                for j in range(ns):
                    slots[j] = tv[i, bind[j]]
                err = _run(ops, args, consts, slots, stack, &value, &scale)
                if err != C_ERR_OK:
                    bad_row = i
                    break
                ov[i] = value
    finally:
        if heap_slots != NULL:
            free(heap_slots)
        if heap_stack != NULL:
            free(heap_stack)
    if err != C_ERR_OK:
        return err, bad_row
    return ERR_OK, -1
