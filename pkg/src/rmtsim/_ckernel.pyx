# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled simulation kernel.  Mirrors _pykernel.py instruction for instruction."""

from libc.stdint cimport int32_t, int64_t, uint32_t
from libc.string cimport memcpy
import numpy as np

cdef enum:
    OP_CONST = 0
    OP_PHV = 1
    OP_MUXPHV = 2
    OP_STATE = 3
    OP_MCVAL = 4
    OP_LOCAL = 5
    OP_SETLOCAL = 6
    OP_SETSTATE = 7
    OP_ADD = 8
    OP_SUB = 9
    OP_NE = 10
    OP_LT = 11
    OP_GT = 12
    OP_EQ = 13
    OP_AND = 14
    OP_OR = 15
    OP_NOT = 16
    OP_ARITH = 17
    OP_REL = 18
    OP_LOGIC = 19
    OP_OPT = 20
    OP_MUX = 21
    OP_JUMPF = 22
    OP_JUMP = 23
    OP_RET = 24
    OP_ADDK = 25
    OP_SUBK = 26
    OP_NEK = 27
    OP_LTK = 28
    OP_GTK = 29
    OP_EQK = 30

MODE_TICK = 0
MODE_SEQUENTIAL = 1


cdef inline int64_t wrap32(int64_t x) noexcept nogil:
    # modular narrowing; gcc and clang define the out-of-range conversion
    return <int32_t><uint32_t>x


cdef int64_t eval_alu(const int64_t* code, int64_t pc, const int64_t* phv, int64_t* state,
                      const int64_t* mc, int64_t* stack, int64_t* locs) noexcept nogil:
    cdef int64_t sp = 0
    cdef int64_t op, a, b, x, y, r, sel
    while True:
        op = code[3 * pc]
        a = code[3 * pc + 1]
        pc += 1
        if op == OP_CONST:
            stack[sp] = a
            sp += 1
        elif op == OP_PHV:
            stack[sp] = phv[a]
            sp += 1
        elif op == OP_MUXPHV:
            stack[sp] = phv[mc[a]]
            sp += 1
        elif op == OP_STATE:
            stack[sp] = state[a]
            sp += 1
        elif op == OP_MCVAL:
            stack[sp] = mc[a]
            sp += 1
        elif op == OP_LOCAL:
            stack[sp] = locs[a]
            sp += 1
        elif op == OP_SETLOCAL:
            sp -= 1
            locs[a] = stack[sp]
        elif op == OP_SETSTATE:
            sp -= 1
            state[a] = stack[sp]
        elif op == OP_ADD:
            sp -= 1
            stack[sp - 1] = wrap32(stack[sp - 1] + stack[sp])
        elif op == OP_SUB:
            sp -= 1
            stack[sp - 1] = wrap32(stack[sp - 1] - stack[sp])
        elif op == OP_NE:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] != stack[sp]
        elif op == OP_LT:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] < stack[sp]
        elif op == OP_GT:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] > stack[sp]
        elif op == OP_EQ:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] == stack[sp]
        elif op == OP_AND:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] != 0 and stack[sp] != 0
        elif op == OP_OR:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] != 0 or stack[sp] != 0
        elif op == OP_NOT:
            stack[sp - 1] = stack[sp - 1] == 0
        elif op == OP_ARITH:
            sp -= 1
            x = stack[sp - 1]
            y = stack[sp]
            if mc[a] == 0:
                r = wrap32(x + y)
            else:
                r = wrap32(x - y)
            stack[sp - 1] = r
        elif op == OP_REL:
            sp -= 1
            x = stack[sp - 1]
            y = stack[sp]
            sel = mc[a]
            if sel == 0:
                r = x != y
            elif sel == 1:
                r = x < y
            elif sel == 2:
                r = x > y
            else:
                r = x == y
            stack[sp - 1] = r
        elif op == OP_LOGIC:
            sp -= 1
            x = stack[sp - 1]
            y = stack[sp]
            if mc[a] == 0:
                r = x != 0 and y != 0
            else:
                r = x != 0 or y != 0
            stack[sp - 1] = r
        elif op == OP_OPT:
            if mc[a] == 0:
                stack[sp - 1] = 0
        elif op == OP_MUX:
            b = code[3 * pc - 1]
            sp -= b
            stack[sp] = stack[sp + mc[a]]
            sp += 1
        elif op == OP_JUMPF:
            sp -= 1
            if stack[sp] == 0:
                pc = a
        elif op == OP_JUMP:
            pc = a
        elif op == OP_RET:
            return stack[sp - 1]
        elif op == OP_ADDK:
            stack[sp - 1] = wrap32(stack[sp - 1] + a)
        elif op == OP_SUBK:
            stack[sp - 1] = wrap32(stack[sp - 1] - a)
        elif op == OP_NEK:
            stack[sp - 1] = stack[sp - 1] != a
        elif op == OP_LTK:
            stack[sp - 1] = stack[sp - 1] < a
        elif op == OP_GTK:
            stack[sp - 1] = stack[sp - 1] > a
        else:
            stack[sp - 1] = stack[sp - 1] == a


cdef void run_stage_c(const int64_t* code, const int64_t* entry, const int64_t* start,
                      const int64_t* omux, int dyn, const int64_t* mc, int64_t s,
                      const int64_t* phv_in, int64_t* phv_out, int64_t L, int64_t* state,
                      int64_t* stack, int64_t* locs, int64_t* alu_out) noexcept nogil:
    cdef int64_t lo = start[s]
    cdef int64_t hi = start[s + 1]
    cdef int64_t k, c, sel, pc
    for k in range(hi - lo):
        pc = entry[lo + k]
        if pc >= 0:
            alu_out[k] = eval_alu(code, pc, phv_in, state, mc, stack, locs)
    for c in range(L):
        sel = omux[s * L + c]
        if dyn:
            sel = mc[sel]
        phv_out[c] = alu_out[sel]


def run_stage(const int64_t[::1] code, const int64_t[::1] alu_entry,
              const int64_t[::1] stage_start, const int64_t[::1] omux, int omux_dynamic,
              const int64_t[::1] mc, int64_t max_stack, int64_t n_locals, int64_t stage,
              const int64_t[::1] phv_in, int64_t[::1] phv_out, int64_t[::1] state):
    cdef int64_t[::1] stack = np.zeros(max_stack, dtype=np.int64)
    cdef int64_t[::1] locs = np.zeros(max(n_locals, 1), dtype=np.int64)
    cdef int64_t[::1] alu_out = np.zeros(max(alu_entry.shape[0], 1), dtype=np.int64)
    cdef int64_t[::1] st = np.zeros(max(state.shape[0], 1), dtype=np.int64)
    cdef int64_t i
    for i in range(state.shape[0]):
        st[i] = state[i]
    run_stage_c(&code[0], &alu_entry[0], &stage_start[0], &omux[0], omux_dynamic,
                &mc[0] if mc.shape[0] else NULL, stage, &phv_in[0], &phv_out[0],
                phv_out.shape[0], &st[0], &stack[0], &locs[0], &alu_out[0])
    for i in range(state.shape[0]):
        state[i] = st[i]


def run(const int64_t[::1] code, const int64_t[::1] alu_entry, const int64_t[::1] stage_start,
        const int64_t[::1] omux, int omux_dynamic, const int64_t[::1] mc,
        const int64_t[::1] stage_state, int64_t max_stack, int64_t n_locals,
        const int64_t[:, ::1] phvs, int64_t[::1] state, int mode,
        int64_t[:, ::1] out_phvs, int64_t[:, ::1] entry_state, int64_t[:, ::1] exit_state):
    cdef int64_t n = phvs.shape[0]
    cdef int64_t L = phvs.shape[1]
    cdef int64_t depth = stage_start.shape[0] - 1
    cdef int64_t S = state.shape[0]
    cdef int64_t[::1] stack = np.zeros(max_stack, dtype=np.int64)
    cdef int64_t[::1] locs = np.zeros(max(n_locals, 1), dtype=np.int64)
    cdef int64_t[::1] alu_out = np.zeros(max(alu_entry.shape[0], 1), dtype=np.int64)
    cdef int64_t[::1] st = np.zeros(max(S, 1), dtype=np.int64)
    cdef int64_t[:, ::1] buf = np.zeros((depth + 1, L), dtype=np.int64)
    cdef const int64_t* mcp = &mc[0] if mc.shape[0] else NULL
    cdef int64_t t, s, i, lo, hi
    for i in range(S):
        st[i] = state[i]
    if n == 0:
        return
    with nogil:
        if mode == 0:  # MODE_TICK
            for t in range(n + depth - 1):
                if t < n:
                    if S:
                        memcpy(&entry_state[t, 0], &st[0], S * sizeof(int64_t))
                    memcpy(&buf[0, 0], &phvs[t, 0], L * sizeof(int64_t))
                s = depth - 1
                while s >= 0:
                    i = t - s
                    if 0 <= i < n:
                        run_stage_c(&code[0], &alu_entry[0], &stage_start[0], &omux[0],
                                    omux_dynamic, mcp, s, &buf[s, 0], &buf[s + 1, 0], L,
                                    &st[0], &stack[0], &locs[0], &alu_out[0])
                        lo = stage_state[2 * s]
                        hi = stage_state[2 * s + 1]
                        if hi > lo:
                            memcpy(&exit_state[i, lo], &st[lo], (hi - lo) * sizeof(int64_t))
                    s -= 1
                i = t - depth + 1
                if 0 <= i < n:
                    memcpy(&out_phvs[i, 0], &buf[depth, 0], L * sizeof(int64_t))
        else:
            for i in range(n):
                if S:
                    memcpy(&entry_state[i, 0], &st[0], S * sizeof(int64_t))
                memcpy(&buf[0, 0], &phvs[i, 0], L * sizeof(int64_t))
                for s in range(depth):
                    run_stage_c(&code[0], &alu_entry[0], &stage_start[0], &omux[0],
                                omux_dynamic, mcp, s, &buf[s, 0], &buf[s + 1, 0], L,
                                &st[0], &stack[0], &locs[0], &alu_out[0])
                    lo = stage_state[2 * s]
                    hi = stage_state[2 * s + 1]
                    if hi > lo:
                        memcpy(&exit_state[i, lo], &st[lo], (hi - lo) * sizeof(int64_t))
                memcpy(&out_phvs[i, 0], &buf[depth, 0], L * sizeof(int64_t))
    for i in range(S):
        state[i] = st[i]
