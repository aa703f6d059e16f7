"""Compiled inner loops for exact counting and cycle censuses."""

import numpy as np
from numba import njit, types
from numba.typed import Dict


@njit(cache=True)
def _ctz(x):
    c = 0
    while (x & 1) == 0:
        x >>= 1
        c += 1
    return c


@njit(cache=True)
def _initial_state(m, k, sign):
    # All variables false: a slot is true iff its literal is negative.
    cnt = np.zeros(m, dtype=np.int32)
    code = np.zeros(m, dtype=np.int64)
    for s in range(m * k):
        if sign[s] < 0:
            i = s // k
            cnt[i] += 1
            code[i] |= 1 << (s - i * k)
    unsat = 0
    for i in range(m):
        if cnt[i] == 0:
            unsat += 1
    return cnt, code, unsat


@njit(cache=True)
def gray_count(n, m, k, sign, var_slots):
    """Number of satisfying assignments by reflected Gray-code enumeration."""
    cnt, code, unsat = _initial_state(m, k, sign)
    bits = np.zeros(n, dtype=np.int8)
    z = np.int64(1) if unsat == 0 else np.int64(0)
    width = var_slots.shape[1]
    for g in range(1, np.int64(1) << n):
        v = _ctz(g)
        bits[v] ^= 1
        for r in range(width):
            s = var_slots[v, r]
            i = s // k
            now_true = (sign[s] > 0) == (bits[v] == 1)
            if now_true:
                cnt[i] += 1
                if cnt[i] == 1:
                    unsat -= 1
            else:
                cnt[i] -= 1
                if cnt[i] == 0:
                    unsat += 1
        if unsat == 0:
            z += 1
    return z


@njit(cache=True)
def gray_histogram(n, m, k, sign, var_slots, salts):
    """Satisfying assignments grouped by the histogram of clause pattern codes.

    The histogram key is hashed incrementally as ``sum_c hist[c] * salts[c]``
    (wrapping uint64); every hash hit is verified against the stored key.
    Returns ``(keys, values)`` with one row of ``keys`` per distinct key.
    """
    ncodes = 1 << k
    cnt, code, unsat = _initial_state(m, k, sign)
    hist = np.zeros(ncodes, dtype=np.int64)
    h = np.uint64(0)
    for i in range(m):
        hist[code[i]] += 1
        h += salts[code[i]]
    bits = np.zeros(n, dtype=np.int8)
    cap = 16
    keys = np.zeros((cap, ncodes), dtype=np.int64)
    vals = np.zeros(cap, dtype=np.int64)
    used = 0
    table = Dict.empty(key_type=types.uint64, value_type=types.int64)
    total = np.int64(1) << n
    for g in range(total):
        if g > 0:
            v = _ctz(g)
            bits[v] ^= 1
            for r in range(var_slots.shape[1]):
                s = var_slots[v, r]
                i = s // k
                j = s - i * k
                old = code[i]
                new = old ^ (1 << j)
                code[i] = new
                hist[old] -= 1
                hist[new] += 1
                h += salts[new] - salts[old]
                if new > old:
                    cnt[i] += 1
                    if cnt[i] == 1:
                        unsat -= 1
                else:
                    cnt[i] -= 1
                    if cnt[i] == 0:
                        unsat += 1
        if unsat != 0:
            continue
        probe = h
        while True:
            if probe in table:
                idx = table[probe]
                same = True
                for c in range(ncodes):
                    if keys[idx, c] != hist[c]:
                        same = False
                        break
                if same:
                    vals[idx] += 1
                    break
                probe += np.uint64(1)
            else:
                if used == cap:
                    cap *= 2
                    nk = np.zeros((cap, ncodes), dtype=np.int64)
                    nk[:used] = keys[:used]
                    keys = nk
                    nv = np.zeros(cap, dtype=np.int64)
                    nv[:used] = vals[:used]
                    vals = nv
                keys[used] = hist
                vals[used] = 1
                table[probe] = used
                used += 1
                break
    return keys[:used].copy(), vals[:used].copy()


@njit(cache=True)
def gray_solutions(n, m, k, sign, var_slots, cap):
    """Bitmasks (bit ``v`` = variable ``v`` true) of all satisfying assignments.

    Stops once ``cap + 1`` solutions are found; the caller treats that as overflow.
    """
    cnt, code, unsat = _initial_state(m, k, sign)
    bits = np.zeros(n, dtype=np.int8)
    out = np.zeros(min(cap + 1, 1 << 16), dtype=np.int64)
    found = 0
    mask = np.int64(0)
    total = np.int64(1) << n
    for g in range(total):
        if g > 0:
            v = _ctz(g)
            bits[v] ^= 1
            mask ^= np.int64(1) << v
            for r in range(var_slots.shape[1]):
                s = var_slots[v, r]
                i = s // k
                now_true = (sign[s] > 0) == (bits[v] == 1)
                if now_true:
                    cnt[i] += 1
                    if cnt[i] == 1:
                        unsat -= 1
                else:
                    cnt[i] -= 1
                    if cnt[i] == 0:
                        unsat += 1
        if unsat == 0:
            if found == out.shape[0]:
                grown = np.zeros(min(2 * out.shape[0], cap + 1), dtype=np.int64)
                grown[:found] = out[:found]
                out = grown
            out[found] = mask
            found += 1
            if found > cap:
                break
    return out[:found].copy()


@njit(cache=True)
def overlap_pairs(sols, n):
    """``N[a]`` = ordered pairs of solutions agreeing on exactly ``a`` variables."""
    res = np.zeros(n + 1, dtype=np.int64)
    z = sols.shape[0]
    for a in range(z):
        res[n] += 1
        for b in range(a + 1, z):
            x = sols[a] ^ sols[b]
            pc = 0
            while x:
                x &= x - 1
                pc += 1
            res[n - pc] += 2
    return res


# Recursive kernels are not cached: reloading them from the disk cache crashes.
@njit
def _extend(c0, j2, var_v, in_slot, depth, code, L, k, var, sign, var_slots,
            clause_seen, var_seen, counts):
    for r in range(var_slots.shape[1]):
        s = var_slots[var_v, r]
        if s == in_slot:
            continue
        c = s // k
        j = s - c * k
        bit = 1 if sign[s] > 0 else 0
        code2 = (code << 1) | bit
        if c == c0:
            if j > j2:
                counts[depth - 1, code2] += 1
            continue
        if depth == L or c < c0 or clause_seen[c]:
            continue
        clause_seen[c] = True
        for j_out in range(k):
            if j_out == j:
                continue
            s_out = c * k + j_out
            v2 = var[s_out]
            if var_seen[v2]:
                continue
            var_seen[v2] = True
            bit_out = 1 if sign[s_out] > 0 else 0
            _extend(c0, j2, v2, s_out, depth + 1, (code2 << 1) | bit_out, L, k,
                    var, sign, var_slots, clause_seen, var_seen, counts)
            var_seen[v2] = False
        clause_seen[c] = False


@njit
def census_dfs(m, k, n, L, var, sign, var_slots, c_lo, c_hi):
    """Cycle counts for start clauses ``c_lo <= c0 < c_hi``.

    Row ``l-1`` of the result is indexed by the ``2l``-bit pattern code.
    """
    counts = np.zeros((L, 1 << (2 * L)), dtype=np.int64)
    clause_seen = np.zeros(m, dtype=np.bool_)
    var_seen = np.zeros(n, dtype=np.bool_)
    for c0 in range(c_lo, c_hi):
        clause_seen[c0] = True
        for j2 in range(k):
            s0 = c0 * k + j2
            v = var[s0]
            var_seen[v] = True
            _extend(c0, j2, v, s0, 1, 1 if sign[s0] > 0 else 0, L, k, var, sign,
                    var_slots, clause_seen, var_seen, counts)
            var_seen[v] = False
        clause_seen[c0] = False
    return counts
