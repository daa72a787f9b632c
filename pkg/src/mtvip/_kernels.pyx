# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled assignment kernels; ``_kernels_py`` holds the reference versions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()


def lap_max(benefit):
    """Full-cardinality maximum-weight rectangular assignment (row -> col or -1)."""
    b = np.asarray(benefit, dtype=np.float64)
    cdef Py_ssize_t nr0 = b.shape[0], nc0 = b.shape[1]
    if nr0 == 0 or nc0 == 0:
        return np.full(nr0, -1, dtype=np.int64)
    cdef bint transposed = nr0 > nc0
    c_arr = np.ascontiguousarray(-(b.T if transposed else b))
    c_arr -= c_arr.min()
    cdef double[:, ::1] cost = c_arr
    cdef Py_ssize_t nr = cost.shape[0], nc = cost.shape[1]

    u_arr = np.zeros(nr)
    v_arr = np.zeros(nc)
    spc_arr = np.empty(nc)
    c4r_arr = np.full(nr, -1, dtype=np.int64)
    r4c_arr = np.full(nc, -1, dtype=np.int64)
    path_arr = np.full(nc, -1, dtype=np.int64)
    rem_arr = np.empty(nc, dtype=np.int64)
    sr_arr = np.zeros(nr, dtype=np.uint8)
    sc_arr = np.zeros(nc, dtype=np.uint8)
    cdef double[::1] u = u_arr, v = v_arr, spc = spc_arr
    cdef long long[::1] col4row = c4r_arr, row4col = r4c_arr, path = path_arr, remaining = rem_arr
    cdef unsigned char[::1] SR = sr_arr, SC = sc_arr

    cdef Py_ssize_t cur, i, j, it, index, num_rem, sink, tmp
    cdef double min_val, lowest, r

    for cur in range(nr):
        for j in range(nc):
            spc[j] = INFINITY
            SC[j] = 0
            remaining[j] = nc - j - 1
        for i in range(nr):
            SR[i] = 0
        num_rem = nc
        min_val = 0.0
        sink = -1
        i = cur
        while sink == -1:
            SR[i] = 1
            index = -1
            lowest = INFINITY
            for it in range(num_rem):
                j = remaining[it]
                r = min_val + cost[i, j] - u[i] - v[j]
                if r < spc[j]:
                    path[j] = i
                    spc[j] = r
                if spc[j] < lowest or (spc[j] == lowest and row4col[j] == -1):
                    lowest = spc[j]
                    index = it
            min_val = lowest
            j = remaining[index]
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]
            SC[j] = 1
            num_rem -= 1
            remaining[index] = remaining[num_rem]

        u[cur] += min_val
        for i in range(nr):
            if SR[i] and i != cur:
                u[i] += min_val - spc[col4row[i]]
        for j in range(nc):
            if SC[j]:
                v[j] -= min_val - spc[j]
        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            tmp = col4row[i]
            col4row[i] = j
            j = tmp
            if i == cur:
                break

    if not transposed:
        return c4r_arr
    out = np.full(nr0, -1, dtype=np.int64)
    for j in range(nr):
        out[col4row[j]] = j
    return out


cdef inline bint _gt(double a, double a2, double b, double b2) nogil:
    return a > b or (a == b and a2 > b2)


cdef void _tiered_core(double[:, ::1] b, double[:, ::1] sec, long long[::1] cap,
                       long long[:, ::1] order, long long[::1] tier) noexcept nogil:
    cdef Py_ssize_t K = b.shape[0], J = b.shape[1]
    cdef Py_ssize_t j, j2, k, p, rnd, best, pj, a, nas = 0
    cdef double g, g2, c, c2
    cdef bint changed
    # J is tiny (a handful of tiers); fixed-size scratch avoids allocation
    cdef double d[16]
    cdef double d2[16]
    cdef long long pred_obj[16]
    cdef long long pred_tier[16]
    cdef long long load[16]
    cdef long long ptr[16]
    cdef double mg[16][16]
    cdef double mg2[16][16]
    cdef long long mo[16][16]

    for j in range(J):
        load[j] = 0
        ptr[j] = 0
    for k in range(K):
        tier[k] = -1
    # objects never leave the placement during augmentation, so the move
    # scan only needs the ones assigned so far
    cdef long long* assigned = <long long*> malloc(K * sizeof(long long))
    if assigned == NULL:
        return
    while True:
        for j in range(J):
            d[j] = -INFINITY
            d2[j] = 0.0
            pred_obj[j] = -1
            pred_tier[j] = -1
            p = ptr[j]
            while p < K and tier[order[j, p]] >= 0:
                p += 1
            ptr[j] = p
            if p < K:
                d[j] = b[order[j, p], j]
                d2[j] = sec[order[j, p], j]
                pred_obj[j] = order[j, p]
            for j2 in range(J):
                mo[j][j2] = -1
        for a in range(nas):
            k = assigned[a]
            j = tier[k]
            for j2 in range(J):
                if j2 == j:
                    continue
                g = b[k, j2] - b[k, j]
                g2 = sec[k, j2] - sec[k, j]
                if mo[j][j2] < 0 or _gt(g, g2, mg[j][j2], mg2[j][j2]):
                    mg[j][j2] = g
                    mg2[j][j2] = g2
                    mo[j][j2] = k
        for rnd in range(J - 1):
            changed = False
            for j in range(J):
                if d[j] == -INFINITY:
                    continue
                for j2 in range(J):
                    if mo[j][j2] < 0:
                        continue
                    c = d[j] + mg[j][j2]
                    c2 = d2[j] + mg2[j][j2]
                    if _gt(c, c2, d[j2], d2[j2]):
                        d[j2] = c
                        d2[j2] = c2
                        pred_obj[j2] = mo[j][j2]
                        pred_tier[j2] = j
                        changed = True
            if not changed:
                break
        best = -1
        for j in range(J):
            if load[j] < cap[j] and (best < 0 or _gt(d[j], d2[j], d[best], d2[best])):
                best = j
        if best < 0 or not _gt(d[best], d2[best], 0.0, 0.0):
            break
        j = best
        load[j] += 1
        while True:
            k = pred_obj[j]
            pj = pred_tier[j]
            tier[k] = j
            if pj < 0:
                assigned[nas] = k
                nas += 1
                break
            j = pj
    free(assigned)


def tiered_max(benefit, capacity, prefer=None):
    """Exact object-to-tier placement under per-tier capacities (tier or -1).

    Same algorithm and tie rules as ``_kernels_py.tiered_max``.
    """
    b_arr = np.ascontiguousarray(benefit, dtype=np.float64)
    cap_arr = np.ascontiguousarray(capacity, dtype=np.int64)
    cdef Py_ssize_t K = b_arr.shape[0], J = b_arr.shape[1]
    tier_arr = np.full(K, -1, dtype=np.int64)
    if K == 0 or J == 0:
        return tier_arr
    if J > 16:
        raise ValueError("at most 16 tiers are supported")
    sec_arr = np.zeros((K, J))
    if prefer is not None:
        pref = np.asarray(prefer, dtype=np.int64)
        held = np.flatnonzero(pref >= 0)
        sec_arr[held, pref[held]] = 1.0
    order_arr = np.empty((J, K), dtype=np.int64)
    for jj in range(J):
        order_arr[jj] = np.lexsort((-sec_arr[:, jj], -b_arr[:, jj]))
    _tiered_core(b_arr, sec_arr, cap_arr, order_arr, tier_arr)
    return tier_arr


def tiered_max_batch(benefits, capacities, prefer, allowed):
    """Run :func:`tiered_max` for every node; ``benefits`` is ``(N, K, J)``."""
    from ._kernels_py import candidates
    cdef Py_ssize_t N = benefits.shape[0], K = benefits.shape[1]
    out = np.full((N, K), -1, dtype=np.int64)
    for n in range(N):
        idx = candidates(benefits[n], capacities[n], prefer[n], allowed[n])
        if len(idx):
            out[n, idx] = tiered_max(benefits[n, idx], capacities[n], prefer[n, idx])
    return out


# sort context for ``_cmp_desc``: one tier column of the candidate block
cdef double* _sb
cdef double* _ss
cdef Py_ssize_t _stride


cdef int _cmp_desc(const void* x, const void* y) noexcept nogil:
    # larger benefit first, then preferred pair, then lower index (stable)
    cdef long long a = (<long long*> x)[0], c = (<long long*> y)[0]
    cdef double ba = _sb[a * _stride], bc = _sb[c * _stride]
    if ba != bc:
        return -1 if ba > bc else 1
    ba = _ss[a * _stride]
    bc = _ss[c * _stride]
    if ba != bc:
        return -1 if ba > bc else 1
    return -1 if a < c else (1 if a > c else 0)


cdef void _sorted_orders(double[:, ::1] b, double[:, ::1] s, long long[:, ::1] order) noexcept nogil:
    global _sb, _ss, _stride
    cdef Py_ssize_t K = b.shape[0], J = b.shape[1], j, k
    _stride = J
    for j in range(J):
        for k in range(K):
            order[j, k] = k
        _sb = &b[0, j]
        _ss = &s[0, j]
        qsort(&order[j, 0], K, sizeof(long long), _cmp_desc)


def vip_cache_phase(double[:, ::1] V, long long[:, ::1] tier_of, double[:, ::1] rates,
                    double[:, ::1] ca, double[:, ::1] ce, long long[:, ::1] caps,
                    double omega, unsigned char[:, ::1] allowed):
    """Caching decisions for all nodes in one call; returns ``(N, K)`` new tiers."""
    from ._kernels_py import prune_candidates
    cdef Py_ssize_t N = V.shape[0], K = V.shape[1], J = rates.shape[1]
    cdef Py_ssize_t n, k, j, c, Kc, total
    cdef long long held
    cdef double x
    cdef bint ok
    if J > 16:
        raise ValueError("at most 16 tiers are supported")
    out_arr = np.full((N, K), -1, dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    b_arr = np.empty((K, J))
    s_arr = np.zeros((K, J))
    idx_arr = np.empty(K, dtype=np.int64)
    cdef double[:, ::1] bb = b_arr
    cdef double[:, ::1] ss = s_arr
    cdef long long[::1] idx = idx_arr
    cdef long long[:, ::1] order = np.empty((J, K), dtype=np.int64)
    cdef long long[::1] tt = np.empty(K, dtype=np.int64)
    cdef double[:, ::1] pb
    cdef double[:, ::1] ps
    cdef long long[::1] pi
    for n in range(N):
        total = 0
        for j in range(J):
            total += caps[n, j]
        if total == 0:
            continue
        Kc = 0
        for k in range(K):
            if not allowed[n, k]:
                continue
            held = tier_of[n, k]
            ok = False
            for j in range(J):
                x = V[n, k] * rates[n, j] - omega * ca[n, j]
                if held == j:
                    x += omega * (ca[n, j] + ce[n, j])
                bb[Kc, j] = x
                ss[Kc, j] = 1.0 if held == j else 0.0
                if caps[n, j] > 0 and (x > 0 or (held == j and x >= 0)):
                    ok = True
            if ok:
                idx[Kc] = k
                Kc += 1
        if Kc == 0:
            continue
        if Kc > total * J:
            keep = prune_candidates(b_arr[:Kc], total)
            pb = np.ascontiguousarray(b_arr[:Kc][keep])
            ps = np.ascontiguousarray(s_arr[:Kc][keep])
            pi = idx_arr[:Kc][keep]
            Kc = pb.shape[0]
        else:
            pb = bb[:Kc]
            ps = ss[:Kc]
            pi = idx[:Kc]
        _sorted_orders(pb, ps, order[:, :Kc])
        _tiered_core(pb, ps, caps[n], order[:, :Kc], tt[:Kc])
        for c in range(Kc):
            out[n, pi[c]] = tt[c]
    return out_arr


def vip_forward(double[:, ::1] V, long long[::1] la, long long[::1] lb,
                unsigned char[:, ::1] perm, double[::1] rev_cap):
    """Per link: object with the largest positive differential (lowest id on ties)."""
    cdef Py_ssize_t L = la.shape[0], K = V.shape[1], l, k, best
    cdef double w, bw
    obj_arr = np.full(L, -1, dtype=np.int64)
    mu_arr = np.zeros(L)
    w_arr = np.zeros(L)
    cdef long long[::1] obj = obj_arr
    cdef double[::1] mu = mu_arr, ww = w_arr
    for l in range(L):
        best = -1
        bw = 0.0
        for k in range(K):
            if not perm[l, k]:
                continue
            w = V[la[l], k] - V[lb[l], k]
            if best < 0 or w > bw:
                best = k
                bw = w
        if best >= 0 and bw > 0:
            obj[l] = best
            mu[l] = rev_cap[l]
            ww[l] = bw
    return obj_arr, mu_arr, w_arr
