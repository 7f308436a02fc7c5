"""Compiled inner loops.

All randomness is supplied by the caller as pre-drawn uniform arrays so the
kernels stay pure functions of their inputs.
"""

import numpy as np
from numba import njit, types
from numba.typed import Dict

# Arm directions at a dual vertex; north is decreasing row.
N, E, S, W = 0, 1, 2, 3
_DA = np.array([-1, 0, 1, 0], dtype=np.int64)
_DB = np.array([0, 1, 0, -1], dtype=np.int64)
# South/east and north/west arms are paired at a four-valent vertex.
_PARTNER = np.array([W, S, E, N], dtype=np.int64)


@njit(cache=True)
def _field(spins, i, j, bval):
    L = spins.shape[0]
    h = 0
    h += spins[i - 1, j] if i > 0 else bval
    h += spins[i + 1, j] if i < L - 1 else bval
    h += spins[i, j - 1] if j > 0 else bval
    h += spins[i, j + 1] if j < L - 1 else bval
    return h


@njit(cache=True)
def metropolis_kernel(spins, beta, bval, u_site, u_acc):
    """Single-site Metropolis proposals at uniformly random sites."""
    L = spins.shape[0]
    n = L * L
    for t in range(u_site.size):
        k = int(u_site[t] * n)
        if k >= n:
            k = n - 1
        i = k // L
        j = k - i * L
        s = spins[i, j]
        dE = 2 * s * _field(spins, i, j, bval)
        if dE <= 0 or u_acc[t] < np.exp(-beta * dE):
            spins[i, j] = -s


@njit(cache=True)
def kawasaki_kernel(spins, beta, bval, plus_idx, minus_idx, where, u_a, u_b, u_acc):
    """Nonlocal spin exchanges: a uniform plus site swaps with a uniform minus site.

    ``plus_idx``/``minus_idx`` list the flat indices of each species and
    ``where`` maps a flat index to its slot; all three are kept in sync.
    """
    L = spins.shape[0]
    n_plus = plus_idx.size
    n_minus = minus_idx.size
    if n_plus == 0 or n_minus == 0:
        return 0
    accepted = 0
    for t in range(u_a.size):
        pa = int(u_a[t] * n_plus)
        if pa >= n_plus:
            pa = n_plus - 1
        pb = int(u_b[t] * n_minus)
        if pb >= n_minus:
            pb = n_minus - 1
        a = plus_idx[pa]
        b = minus_idx[pb]
        ai = a // L
        aj = a - ai * L
        bi = b // L
        bj = b - bi * L
        dE = 2 * _field(spins, ai, aj, bval)  # flip a: +1 -> -1
        spins[ai, aj] = -1
        dE += -2 * _field(spins, bi, bj, bval)  # then flip b: -1 -> +1
        if dE <= 0 or u_acc[t] < np.exp(-beta * dE):
            spins[bi, bj] = 1
            plus_idx[pa] = b
            minus_idx[pb] = a
            where[b] = pa
            where[a] = pb
            accepted += 1
        else:
            spins[ai, aj] = 1
    return accepted


@njit(cache=True)
def wolff_kernel(spins, beta, bval, u, max_steps, stack, in_cluster):
    """Wolff cluster steps with a frozen boundary.

    Bonds to the boundary are activated like ordinary bonds; a cluster that
    activates one is not flipped.  Stops early when fewer than 4L^2+1
    uniforms remain.  Returns (steps done, uniforms consumed, flips).
    """
    L = spins.shape[0]
    n = L * L
    p_add = 1.0 - np.exp(-2.0 * beta)
    pos = 0
    flips = 0
    steps = 0
    need = 4 * n + 1
    while steps < max_steps and u.size - pos >= need:
        k = int(u[pos] * n)
        pos += 1
        if k >= n:
            k = n - 1
        s0 = spins[k // L, k % L]
        top = 0
        stack[top] = k
        top += 1
        in_cluster[k] = True
        members = 1
        frozen = False
        head = 0
        while head < top:
            c = stack[head]
            head += 1
            ci = c // L
            cj = c - ci * L
            for d in range(4):
                ni = ci + _DA[d]
                nj = cj + _DB[d]
                if ni < 0 or ni >= L or nj < 0 or nj >= L:
                    if bval == s0 and not frozen:
                        if u[pos] < p_add:
                            frozen = True
                        pos += 1
                    continue
                m = ni * L + nj
                if in_cluster[m] or spins[ni, nj] != s0:
                    continue
                if u[pos] < p_add:
                    in_cluster[m] = True
                    stack[top] = m
                    top += 1
                    members += 1
                pos += 1
        for t in range(top):
            c = stack[t]
            in_cluster[c] = False
            if not frozen:
                spins[c // L, c % L] = -s0
        if not frozen:
            flips += members
        steps += 1
    return steps, pos, flips


@njit(cache=True)
def bonds_from_padded(P):
    """Dual bonds of a padded spin array.

    hb[a, b]: bond between dual vertices (a, b) and (a, b+1), separating
    sites (a-1, b) and (a, b).  vb[a, b]: bond between vertices (a, b) and
    (a+1, b), separating sites (a, b-1) and (a, b).  Dual vertex (a, b) sits
    at (a - 1/2, b - 1/2).
    """
    L = P.shape[0] - 2
    hb = np.zeros((L + 1, L), dtype=np.bool_)
    vb = np.zeros((L, L + 1), dtype=np.bool_)
    for a in range(L + 1):
        for b in range(L):
            hb[a, b] = P[a, b + 1] != P[a + 1, b + 1]
    for a in range(L):
        for b in range(L + 1):
            vb[a, b] = P[a + 1, b] != P[a + 1, b + 1]
    return hb, vb


@njit(cache=True)
def _arm_present(hb, vb, a, b, d):
    L = vb.shape[0]
    if d == N:
        return a >= 1 and vb[a - 1, b]
    if d == S:
        return a <= L - 1 and vb[a, b]
    if d == W:
        return b >= 1 and hb[a, b - 1]
    return b <= L - 1 and hb[a, b]


@njit(cache=True)
def _arm_used(hu, vu, a, b, d):
    if d == N:
        return vu[a - 1, b]
    if d == S:
        return vu[a, b]
    if d == W:
        return hu[a, b - 1]
    return hu[a, b]


@njit(cache=True)
def _mark(hu, vu, a, b, d):
    if d == N:
        vu[a - 1, b] = True
    elif d == S:
        vu[a, b] = True
    elif d == W:
        hu[a, b - 1] = True
    else:
        hu[a, b] = True


@njit(cache=True)
def trace_kernel(hb, vb, verts, starts, diam2):
    """Decompose a dual bond set into closed curves.

    Curves start at their row-major smallest vertex and are oriented to have
    positive signed area in doubled (row, col) coordinates.  Vertices are
    written in doubled coordinates (2a-1, 2b-1).  Returns the number of
    curves; curve c occupies verts[starts[c]:starts[c+1]] and has squared
    doubled diameter diam2[c].
    """
    L = vb.shape[0]
    hu = np.zeros(hb.shape, dtype=np.bool_)
    vu = np.zeros(vb.shape, dtype=np.bool_)
    nv = 0
    nc = 0
    starts[0] = 0
    for a0 in range(L + 1):
        for b0 in range(L + 1):
            while True:
                d0 = -1
                for d in (E, S, N, W):
                    if _arm_present(hb, vb, a0, b0, d) and not _arm_used(hu, vu, a0, b0, d):
                        d0 = d
                        break
                if d0 < 0:
                    break
                first = nv
                a, b, d = a0, b0, d0
                while True:
                    verts[nv, 0] = 2 * a - 1
                    verts[nv, 1] = 2 * b - 1
                    nv += 1
                    _mark(hu, vu, a, b, d)
                    a += _DA[d]
                    b += _DB[d]
                    came = (d + 2) % 4
                    deg = 0
                    for q in range(4):
                        if _arm_present(hb, vb, a, b, q):
                            deg += 1
                    if deg == 4:
                        nd = _PARTNER[came]
                    else:
                        nd = -1
                        for q in range(4):
                            if q != came and _arm_present(hb, vb, a, b, q):
                                nd = q
                                break
                    if _arm_used(hu, vu, a, b, nd):
                        break
                    d = nd
                # orientation: positive shoelace area
                area2 = 0
                m = nv - first
                for t in range(m):
                    u = first + t
                    w = first + (t + 1) % m
                    area2 += verts[u, 0] * verts[w, 1] - verts[w, 0] * verts[u, 1]
                if area2 < 0:
                    lo = first + 1
                    hi = nv - 1
                    while lo < hi:
                        for c in range(2):
                            tmp = verts[lo, c]
                            verts[lo, c] = verts[hi, c]
                            verts[hi, c] = tmp
                        lo += 1
                        hi -= 1
                best = 0
                for t in range(first, nv):
                    for r in range(t + 1, nv):
                        dx = verts[t, 0] - verts[r, 0]
                        dy = verts[t, 1] - verts[r, 1]
                        q2 = dx * dx + dy * dy
                        if q2 > best:
                            best = q2
                diam2[nc] = best
                nc += 1
                starts[nc] = nv
    return nc


@njit(cache=True)
def padded_from_code(code, L, bval, P):
    """Fill padded array P with configuration ``code`` (bit k set means site k is +1)."""
    for i in range(L + 2):
        for j in range(L + 2):
            P[i, j] = bval
    for k in range(L * L):
        i = k // L
        j = k - i * L
        P[i + 1, j + 1] = 1 if (code >> k) & 1 else -1


@njit(cache=True)
def density_of_states(L, bval):
    """Integer counts of configurations by (number of minus spins, bond sum)."""
    n = L * L
    nb = 2 * L * (L + 1)
    counts = np.zeros((n + 1, 2 * nb + 1), dtype=np.int64)
    P = np.empty((L + 2, L + 2), dtype=np.int8)
    for code in range(1 << n):
        padded_from_code(code, L, bval, P)
        bsum = 0
        kminus = 0
        for i in range(1, L + 1):
            for j in range(1, L + 1):
                s = P[i, j]
                if s < 0:
                    kminus += 1
                bsum += s * P[i, j + 1] + s * P[i + 1, j]
        for j in range(1, L + 1):
            bsum += P[0, j] * P[1, j]
        for i in range(1, L + 1):
            bsum += P[i, 0] * P[i, 1]
        counts[kminus, bsum + nb] += 1
    return counts


@njit(cache=True)
def large_contour_census(L, bval, beta, diam2_min, allowed, required, n_target):
    """Boltzmann weight grouped by the bond set of the s-large contours.

    Only configurations that pass at least one event prefilter are kept.
    Event ``e`` asks for exactly ``n_target[e]`` s-large contours whose bonds
    all lie in the mask ``allowed[e]`` and touch every nonzero mask in
    ``required[e]``.  Returns parallel arrays (keys, weights, n_large, flags):
    key packs the union of the s-large contours' bonds (h bonds first, then
    v bonds), weights are exp(beta*(bond_sum - n_bonds)) and bit e of flags
    records which prefilters the key passed.
    """
    n = L * L
    nb = 2 * L * (L + 1)
    n_ev = allowed.shape[0]
    P = np.empty((L + 2, L + 2), dtype=np.int8)
    verts = np.empty((nb + 1, 2), dtype=np.int64)
    starts = np.empty(nb + 2, dtype=np.int64)
    diam2 = np.empty(nb + 1, dtype=np.int64)
    acc = Dict.empty(key_type=types.int64, value_type=types.float64)
    nlarge = Dict.empty(key_type=types.int64, value_type=types.int64)
    flag_of = Dict.empty(key_type=types.int64, value_type=types.int64)
    for code in range(1 << n):
        padded_from_code(code, L, bval, P)
        hb, vb = bonds_from_padded(P)
        nc = trace_kernel(hb, vb, verts, starts, diam2)
        key = np.int64(0)
        cnt = 0
        for c in range(nc):
            if diam2[c] >= diam2_min:
                cnt += 1
                for t in range(starts[c], starts[c + 1]):
                    r = t + 1 if t + 1 < starts[c + 1] else starts[c]
                    a1 = (verts[t, 0] + 1) // 2
                    b1 = (verts[t, 1] + 1) // 2
                    a2 = (verts[r, 0] + 1) // 2
                    b2 = (verts[r, 1] + 1) // 2
                    if a1 == a2:
                        bit = a1 * L + min(b1, b2)
                    else:
                        bit = L * (L + 1) + min(a1, a2) * (L + 1) + b1
                    key |= np.int64(1) << bit
        flags = np.int64(0)
        for e in range(n_ev):
            if cnt != n_target[e] or (key & ~allowed[e]) != 0:
                continue
            ok = True
            for q in range(required.shape[1]):
                if required[e, q] != 0 and (key & required[e, q]) == 0:
                    ok = False
                    break
            if ok:
                flags |= np.int64(1) << e
        if flags == 0:
            continue
        bsum = 0
        for i in range(1, L + 1):
            for j in range(1, L + 1):
                s = P[i, j]
                bsum += s * P[i, j + 1] + s * P[i + 1, j]
        for j in range(1, L + 1):
            bsum += P[0, j] * P[1, j]
        for i in range(1, L + 1):
            bsum += P[i, 0] * P[i, 1]
        wgt = np.exp(beta * (bsum - nb))
        if key in acc:
            acc[key] += wgt
        else:
            acc[key] = wgt
            nlarge[key] = cnt
            flag_of[key] = flags
    m = len(acc)
    keys = np.empty(m, dtype=np.int64)
    weights = np.empty(m, dtype=np.float64)
    counts = np.empty(m, dtype=np.int64)
    fl = np.empty(m, dtype=np.int64)
    t = 0
    for k, w in acc.items():
        keys[t] = k
        weights[t] = w
        counts[t] = nlarge[k]
        fl[t] = flag_of[k]
        t += 1
    return keys, weights, counts, fl
