"""Compiled inner loops.

Everything here is ``nogil`` so the harness can fan replications out over
threads. Accumulations use Neumaier's compensated summation; a running sum
is carried as a ``(s, c)`` pair and read back as ``s + c``.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)

DRIFT_CONSTANT = 0
DRIFT_MEAN_REVERTING = 1
DRIFT_VOL_SCALED = 2


@njit(**_JIT)
def _two_add(s, c, x):
    t = s + x
    if abs(s) >= abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    return t, c


@njit(**_JIT)
def abs_pow(x, p, p_int):
    """|x|**p, by repeated multiplication when ``p_int > 0`` (p integral)."""
    ax = abs(x)
    if p_int > 0:
        r = 1.0
        for _ in range(p_int):
            r *= ax
        return r
    return ax**p


@njit(**_JIT)
def euler_path(x0, dw, sigma, jump_add, drift_kind, drift_a, drift_b, h):
    """Euler scheme for X; returns (x, continuous part, first bad step or -1)."""
    m = dw.shape[0]
    x = np.empty(m + 1)
    xc = np.empty(m + 1)
    x[0] = x0
    xc[0] = x0
    cum_jump = 0.0
    for j in range(1, m + 1):
        s = sigma[j - 1]
        if drift_kind == DRIFT_CONSTANT:
            b = drift_a
        elif drift_kind == DRIFT_MEAN_REVERTING:
            b = drift_a * (drift_b - x[j - 1])
        else:
            b = drift_a * s * s
        step = b * h + s * dw[j - 1]
        xc[j] = xc[j - 1] + step
        cum_jump += jump_add[j]
        x[j] = xc[j] + cum_jump
        if not np.isfinite(x[j]):
            return x, xc, j
    return x, xc, -1


@njit(**_JIT)
def log_ou_sigma(sigma0, kappa, log_mean, xi, dw, h):
    """Euler on log(sigma) driven by Brownian increments ``dw``."""
    m = dw.shape[0]
    out = np.empty(m + 1)
    y = np.log(sigma0)
    out[0] = sigma0
    for j in range(m):
        y = y + kappa * (log_mean - y) * h + xi * dw[j]
        out[j + 1] = np.exp(y)
    return out


@njit(**_JIT)
def window_sums(vals, k):
    """Sums of ``vals[i:i+k]`` for every i, updated by sliding (compensated)."""
    n = vals.shape[0]
    out = np.empty(n - k + 1)
    s = 0.0
    c = 0.0
    for j in range(k):
        s, c = _two_add(s, c, vals[j])
    out[0] = s + c
    for i in range(1, n - k + 1):
        s, c = _two_add(s, c, -vals[i - 1])
        s, c = _two_add(s, c, vals[i + k - 1])
        out[i] = s + c
    return out


@njit(**_JIT)
def sum_squares_of_diff(a, b):
    s = 0.0
    c = 0.0
    for i in range(a.shape[0]):
        d = a[i] - b[i]
        s, c = _two_add(s, c, d * d)
    return s + c


@njit(**_JIT)
def vhat_sum(obs, fvals, k, p, p_int, block_scale):
    """Sum over windows of (block increment power - theta_hat)^2."""
    n = fvals.shape[0]
    s = 0.0
    c = 0.0
    ts = 0.0
    tc = 0.0
    for j in range(k):
        ts, tc = _two_add(ts, tc, fvals[j])
    for i in range(n - k + 1):
        if i > 0:
            ts, tc = _two_add(ts, tc, -fvals[i - 1])
            ts, tc = _two_add(ts, tc, fvals[i + k - 1])
        u = block_scale * abs_pow(obs[i + k] - obs[i], p, p_int)
        d = u - (ts + tc)
        s, c = _two_add(s, c, d * d)
    return s + c


@njit(**_JIT)
def vtilde_pair_sum(incr, fvals, k, p, p_int, pair_scale):
    """Sum over windows of the pair terms, via per-pair window multiplicities.

    Pair (u, v), u < v (0-based increments), lies in window i iff
    i <= u and v <= i + k - 1, for i in [0, n - k].
    """
    n = incr.shape[0]
    last = n - k
    s = 0.0
    c = 0.0
    for u in range(n):
        vmax = min(u + k - 1, n - 1)
        for v in range(u + 1, vmax + 1):
            lo = v - k + 1
            if lo < 0:
                lo = 0
            hi = u if u < last else last
            w = hi - lo + 1
            if w <= 0:
                continue
            g = pair_scale * abs_pow(incr[u] + incr[v], p, p_int) - fvals[u] - fvals[v]
            s, c = _two_add(s, c, w * (g * g))
    return s + c


@njit(**_JIT)
def revolving_door_sequence(k, l):
    """All l-subsets of range(k) in revolving-door order, one row per subset.

    Consecutive rows differ by exactly one element swapped in and out.
    """
    total = 1
    for j in range(l):
        total = total * (k - j) // (j + 1)
    out = np.empty((total, l), dtype=np.int64)
    c = np.empty(l + 2, dtype=np.int64)
    for j in range(1, l + 1):
        c[j] = j - 1
    c[l + 1] = k
    row = 0
    while True:
        for j in range(l):
            out[row, j] = c[j + 1]
        row += 1
        stepped, _, _ = _revolve(c, l)
        if not stepped:
            break
    return out


@njit(**_JIT)
def _revolve(c, l):
    """One step of Knuth's revolving-door algorithm on ``c[1..l]``.

    Returns (stepped, element removed, element added).
    """
    if l % 2 == 1:
        if c[1] + 1 < c[2]:
            c[1] += 1
            return True, c[1] - 1, c[1]
        j = 2
        go_r4 = True
    else:
        if c[1] > 0:
            c[1] -= 1
            return True, c[1] + 1, c[1]
        j = 2
        go_r4 = False
    while j <= l:
        if go_r4:
            if c[j] >= j:
                out = c[j]
                c[j] = c[j - 1]
                c[j - 1] = j - 2
                return True, out, j - 2
            j += 1
            go_r4 = False
        else:
            if c[j] + 1 < c[j + 1]:
                out = c[j - 1]
                c[j - 1] = c[j]
                c[j] += 1
                return True, out, c[j]
            j += 1
            go_r4 = True
    return False, -1, -1


@njit(**_JIT)
def universal_enumerate_sum(incr, fvals, k, l, p, p_int, sub_scale, inv_count):
    """Sum over windows of the exact subset average, by revolving-door order."""
    n = incr.shape[0]
    c = np.empty(l + 2, dtype=np.int64)
    ts = 0.0
    tc = 0.0
    for i in range(n - k + 1):
        for j in range(1, l + 1):
            c[j] = j - 1
        c[l + 1] = k
        ps = 0.0
        pc = 0.0
        fs = 0.0
        fc = 0.0
        for j in range(l):
            ps, pc = _two_add(ps, pc, incr[i + j])
            fs, fc = _two_add(fs, fc, fvals[i + j])
        ws = 0.0
        wc = 0.0
        while True:
            g = sub_scale * abs_pow(ps + pc, p, p_int) - (fs + fc)
            ws, wc = _two_add(ws, wc, g * g)
            stepped, out, new = _revolve(c, l)
            if not stepped:
                break
            ps, pc = _two_add(ps, pc, -incr[i + out])
            ps, pc = _two_add(ps, pc, incr[i + new])
            fs, fc = _two_add(fs, fc, -fvals[i + out])
            fs, fc = _two_add(fs, fc, fvals[i + new])
        ts, tc = _two_add(ts, tc, (ws + wc) * inv_count)
    return ts + tc


@njit(**_JIT)
def _rank(sorted_idx, binom):
    r = 0
    for j in range(sorted_idx.shape[0]):
        r += binom[sorted_idx[j], j + 1]
    return r


@njit(**_JIT)
def universal_sample_sum(incr, fvals, k, l, p, p_int, sub_scale, budget, seed, binom, dedupe):
    """Sum over windows of a sampled subset average (distinct subsets per window).

    ``binom[m, j]`` holds C(m, j); duplicates are rejected by rank when
    ``dedupe`` is set.
    """
    np.random.seed(seed)
    n = incr.shape[0]
    perm = np.arange(k)
    chosen = np.empty(l, dtype=np.int64)
    ts = 0.0
    tc = 0.0
    for i in range(n - k + 1):
        seen = set()
        seen.add(np.int64(-1))
        ws = 0.0
        wc = 0.0
        got = 0
        while got < budget:
            for j in range(l):
                r = j + np.random.randint(0, k - j)
                tmp = perm[j]
                perm[j] = perm[r]
                perm[r] = tmp
            chosen[:] = np.sort(perm[:l])
            if dedupe:
                key = _rank(chosen, binom)
                if key in seen:
                    continue
                seen.add(key)
            ps = 0.0
            pc = 0.0
            fs = 0.0
            fc = 0.0
            for j in range(l):
                ps, pc = _two_add(ps, pc, incr[i + chosen[j]])
                fs, fc = _two_add(fs, fc, fvals[i + chosen[j]])
            g = sub_scale * abs_pow(ps + pc, p, p_int) - (fs + fc)
            ws, wc = _two_add(ws, wc, g * g)
            got += 1
        ts, tc = _two_add(ts, tc, (ws + wc) / budget)
    return ts + tc


# --- exact subset averages for even integer powers -------------------------
#
# For a multiset of window values a_1..a_k and P1 = sum_S a, Pp = sum_S a^p,
# A[s, d] = rho^s * sum_{|S|=s} P1^d / d!        (d <= 2p)
# B[s, d] = rho^s * sum_{|S|=s} Pp * P1^d / d!   (d <= p)
# C[s]    = rho^s * sum_{|S|=s} Pp^2
# Including element a multiplies the generating function by (1 + rho t e^{za}).
# rho keeps A[l, 0] = rho^l C(k, l) near one.


@njit(**_JIT)
def _poly_include(A, B, C, a, p, rho, sign, l, e, fact):
    D = 2 * p
    ap = 1.0
    for _ in range(p):
        ap *= a
    x = 1.0
    for r in range(D + 1):
        e[r] = rho * x / fact[r]
        x *= a
    if sign > 0:
        for s in range(l, 0, -1):
            _poly_step(A, B, C, s, e, ap, rho, D, p, 1.0)
    else:
        for s in range(1, l + 1):
            _poly_step(A, B, C, s, e, ap, rho, D, p, -1.0)


@njit(**_JIT)
def _poly_step(A, B, C, s, e, ap, rho, D, p, sign):
    C[s] += sign * rho * (C[s - 1] + 2.0 * ap * B[s - 1, 0] + ap * ap * A[s - 1, 0])
    for d in range(p, -1, -1):
        acc = 0.0
        for r in range(d + 1):
            acc += (B[s - 1, d - r] + ap * A[s - 1, d - r]) * e[r]
        B[s, d] += sign * acc
    for d in range(D, -1, -1):
        acc = 0.0
        for r in range(d + 1):
            acc += A[s - 1, d - r] * e[r]
        A[s, d] += sign * acc


@njit(**_JIT)
def _poly_reset(A, B, C, incr, start, k, p, rho, l, e, fact):
    A[:, :] = 0.0
    B[:, :] = 0.0
    C[:] = 0.0
    A[0, 0] = 1.0
    for j in range(start, start + k):
        _poly_include(A, B, C, incr[j], p, rho, 1, l, e, fact)


@njit(**_JIT)
def universal_poly_sum(incr, k, l, p, sub_scale, unit_scale, rho):
    """Sum over windows of the exact subset average for even integer p.

    The window term is (sub_scale * P1^p - unit_scale * Pp)^2. The
    generating arrays slide with the window; they are rebuilt from scratch
    when the departing increment is the largest in magnitude (so no large
    value is ever subtracted out of small ones) and at least every k steps.
    """
    n = incr.shape[0]
    D = 2 * p
    A = np.zeros((l + 1, D + 1))
    B = np.zeros((l + 1, p + 1))
    C = np.zeros(l + 1)
    e = np.empty(D + 1)
    fact = np.empty(D + 1)
    fact[0] = 1.0
    for r in range(1, D + 1):
        fact[r] = fact[r - 1] * r
    _poly_reset(A, B, C, incr, 0, k, p, rho, l, e, fact)
    since = 0
    ts = 0.0
    tc = 0.0
    for i in range(n - k + 1):
        if i > 0:
            out = incr[i - 1]
            biggest = 0.0
            for j in range(i, i + k):
                if abs(incr[j]) > biggest:
                    biggest = abs(incr[j])
            since += 1
            if abs(out) >= biggest or since >= k:
                _poly_reset(A, B, C, incr, i, k, p, rho, l, e, fact)
                since = 0
            else:
                _poly_include(A, B, C, out, p, rho, -1, l, e, fact)
                _poly_include(A, B, C, incr[i + k - 1], p, rho, 1, l, e, fact)
        m1 = fact[D] * A[l, D]
        m2 = fact[p] * B[l, p]
        m3 = C[l]
        val = (sub_scale * sub_scale * m1 - 2.0 * sub_scale * unit_scale * m2
               + unit_scale * unit_scale * m3) / A[l, 0]
        if val < 0.0:
            val = 0.0
        ts, tc = _two_add(ts, tc, val)
    return ts + tc
