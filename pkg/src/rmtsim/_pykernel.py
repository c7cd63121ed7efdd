"""Pure-Python simulation kernel.

Same entry points and semantics as the compiled ``_ckernel`` extension; used
when the extension is not built or ``RMTSIM_BACKEND=python`` is set.
"""

MODE_TICK = 0
MODE_SEQUENTIAL = 1


def _wrap(x):
    return ((x + 0x80000000) & 0xFFFFFFFF) - 0x80000000


def _eval(code, pc, phv, state, mc, stack, locs):
    sp = 0
    while True:
        i = 3 * pc
        op = code[i]
        a = code[i + 1]
        pc += 1
        if op == 0:
            stack[sp] = a
            sp += 1
        elif op == 1:
            stack[sp] = phv[a]
            sp += 1
        elif op == 2:
            stack[sp] = phv[mc[a]]
            sp += 1
        elif op == 3:
            stack[sp] = state[a]
            sp += 1
        elif op == 4:
            stack[sp] = mc[a]
            sp += 1
        elif op == 5:
            stack[sp] = locs[a]
            sp += 1
        elif op == 6:
            sp -= 1
            locs[a] = stack[sp]
        elif op == 7:
            sp -= 1
            state[a] = stack[sp]
        elif op <= 15:
            sp -= 1
            y = stack[sp]
            x = stack[sp - 1]
            if op == 8:
                r = _wrap(x + y)
            elif op == 9:
                r = _wrap(x - y)
            elif op == 10:
                r = int(x != y)
            elif op == 11:
                r = int(x < y)
            elif op == 12:
                r = int(x > y)
            elif op == 13:
                r = int(x == y)
            elif op == 14:
                r = int(x != 0 and y != 0)
            else:
                r = int(x != 0 or y != 0)
            stack[sp - 1] = r
        elif op == 16:
            stack[sp - 1] = int(stack[sp - 1] == 0)
        elif op <= 19:
            sp -= 1
            y = stack[sp]
            x = stack[sp - 1]
            sel = mc[a]
            if op == 17:
                r = _wrap(x + y) if sel == 0 else _wrap(x - y)
            elif op == 18:
                if sel == 0:
                    r = int(x != y)
                elif sel == 1:
                    r = int(x < y)
                elif sel == 2:
                    r = int(x > y)
                else:
                    r = int(x == y)
            else:
                r = int(x != 0 and y != 0) if sel == 0 else int(x != 0 or y != 0)
            stack[sp - 1] = r
        elif op == 20:
            if mc[a] == 0:
                stack[sp - 1] = 0
        elif op == 21:
            b = code[i + 2]
            sp -= b
            stack[sp] = stack[sp + mc[a]]
            sp += 1
        elif op == 22:
            sp -= 1
            if stack[sp] == 0:
                pc = a
        elif op == 23:
            pc = a
        elif op == 24:
            return stack[sp - 1]
        else:
            x = stack[sp - 1]
            if op == 25:
                r = _wrap(x + a)
            elif op == 26:
                r = _wrap(x - a)
            elif op == 27:
                r = int(x != a)
            elif op == 28:
                r = int(x < a)
            elif op == 29:
                r = int(x > a)
            else:
                r = int(x == a)
            stack[sp - 1] = r


def _stage(code, entry, start, omux, dyn, mc, s, phv_in, phv_out, state, stack, locs, alu_out):
    lo = start[s]
    for k in range(start[s + 1] - lo):
        pc = entry[lo + k]
        if pc >= 0:
            alu_out[k] = _eval(code, pc, phv_in, state, mc, stack, locs)
    L = len(phv_out)
    base = s * L
    for c in range(L):
        sel = omux[base + c]
        phv_out[c] = alu_out[mc[sel] if dyn else sel]


def run_stage(code, alu_entry, stage_start, omux, omux_dynamic, mc, max_stack, n_locals,
              stage, phv_in, phv_out, state):
    code_l = code.tolist()
    state_l = state.tolist()
    out = [0] * len(phv_out)
    _stage(code_l, alu_entry.tolist(), stage_start.tolist(), omux.tolist(), omux_dynamic,
           mc.tolist(), stage, phv_in.tolist(), out, state_l,
           [0] * max_stack, [0] * n_locals, [0] * max(1, len(alu_entry)))
    phv_out[:] = out
    state[:] = state_l


def run(code, alu_entry, stage_start, omux, omux_dynamic, mc, stage_state, max_stack, n_locals,
        phvs, state, mode, out_phvs, entry_state, exit_state):
    code_l = code.tolist()
    entry = alu_entry.tolist()
    start = stage_start.tolist()
    omux_l = omux.tolist()
    mc_l = mc.tolist()
    ranges = stage_state.tolist()
    depth = len(start) - 1
    L = phvs.shape[1]
    n = phvs.shape[0]
    st = state.tolist()
    stack = [0] * max_stack
    locs = [0] * n_locals
    alu_out = [0] * max(1, len(entry))
    inputs = phvs.tolist()
    outs = [None] * n
    entries = [None] * n
    exits = [list(st) for _ in range(n)]
    buf = [[0] * L for _ in range(depth + 1)]

    def step_stage(s, i):
        _stage(code_l, entry, start, omux_l, omux_dynamic, mc_l, s, buf[s], buf[s + 1],
               st, stack, locs, alu_out)
        lo, hi = ranges[2 * s], ranges[2 * s + 1]
        exits[i][lo:hi] = st[lo:hi]

    if mode == MODE_TICK:
        for t in range(n + depth - 1):
            if t < n:
                entries[t] = list(st)
                buf[0][:] = inputs[t]
            for s in range(depth - 1, -1, -1):
                i = t - s
                if 0 <= i < n:
                    step_stage(s, i)
            i = t - depth + 1
            if 0 <= i < n:
                outs[i] = list(buf[depth])
    else:
        for i in range(n):
            entries[i] = list(st)
            buf[0][:] = inputs[i]
            for s in range(depth):
                step_stage(s, i)
            outs[i] = list(buf[depth])

    if n:
        out_phvs[:] = outs
        if st:
            entry_state[:] = entries
            exit_state[:] = exits
    state[:] = st
