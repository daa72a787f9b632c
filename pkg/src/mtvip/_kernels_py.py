"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same functions with the same results; ``rap`` picks
the compiled one when it imports.
"""
import numpy as np


def lap_max(benefit):
    """Full-cardinality maximum-weight rectangular assignment.

    Shortest augmenting paths with dual prices (Jonker-Volgenant style, the
    rectangular variant described by Crouse, 2016). Returns, for each row, the
    matched column or -1. Exactly ``min(nrows, ncols)`` pairs are matched.
    """
    b = np.asarray(benefit, dtype=float)
    nr, nc = b.shape
    if nr == 0 or nc == 0:
        return np.full(nr, -1, dtype=np.int64)
    transposed = nr > nc
    cost = -(b.T if transposed else b)
    nr, nc = cost.shape
    cost = cost - cost.min()  # non-negative costs keep reduced costs tidy

    u = np.zeros(nr)
    v = np.zeros(nc)
    col4row = np.full(nr, -1, dtype=np.int64)
    row4col = np.full(nc, -1, dtype=np.int64)
    path = np.full(nc, -1, dtype=np.int64)

    for cur in range(nr):
        spc = np.full(nc, np.inf)
        sc = np.zeros(nc, dtype=bool)
        sr_rows = []
        min_val = 0.0
        i = cur
        sink = -1
        while sink == -1:
            sr_rows.append(i)
            rem = ~sc
            r = min_val + cost[i] - u[i] - v
            better = rem & (r < spc)
            spc[better] = r[better]
            path[better] = i
            cand = np.flatnonzero(rem)
            vals = spc[cand]
            lowest = vals.min()
            ties = cand[vals == lowest]
            free = ties[row4col[ties] == -1]
            j = int(free[0]) if len(free) else int(ties[0])
            min_val = lowest
            sc[j] = True
            if row4col[j] == -1:
                sink = j
            else:
                i = int(row4col[j])
        u[cur] += min_val
        for r_ in sr_rows:
            if r_ != cur:
                u[r_] += min_val - spc[col4row[r_]]
        v[sc] -= min_val - spc[sc]
        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur:
                break

    if not transposed:
        return col4row
    out = np.full(b.shape[0], -1, dtype=np.int64)
    for col, row in enumerate(col4row):
        out[row] = col
    return out


def _gt(a, a2, b, b2):
    return a > b or (a == b and a2 > b2)


def tiered_max(benefit, capacity, prefer=None):
    """Exact object-to-tier placement with per-tier capacities.

    Equivalent to solving the slot-expanded assignment, where every tier owns
    ``capacity[j]`` interchangeable slots: slots of one tier share a dual
    price, so each augmenting path only has to be found over the tier nodes.
    Paths are augmented in order of decreasing gain and the search stops at
    the first non-positive gain (the gain sequence is non-increasing).

    ``prefer[k]`` (tier or -1) adds a secondary, lexicographically smaller
    objective: among optimal placements, keep as many ``(k, prefer[k])``
    pairs as possible.

    Returns the tier index per object, or -1 for uncached.
    """
    b = np.asarray(benefit, dtype=float)
    cap = np.asarray(capacity, dtype=np.int64)
    K, J = b.shape
    tier = np.full(K, -1, dtype=np.int64)
    if K == 0 or J == 0:
        return tier
    sec = np.zeros((K, J))
    if prefer is not None:
        prefer = np.asarray(prefer, dtype=np.int64)
        held = np.flatnonzero(prefer >= 0)
        sec[held, prefer[held]] = 1.0
    load = np.zeros(J, dtype=np.int64)
    order = [np.lexsort((-sec[:, j], -b[:, j])) for j in range(J)]
    ptr = [0] * J
    assigned = []  # objects never leave the placement once in it
    neg = -np.inf
    while True:
        d = [neg] * J
        d2 = [0.0] * J
        pred_obj = [-1] * J
        pred_tier = [-1] * J
        for j in range(J):
            o = order[j]
            p = ptr[j]
            while p < K and tier[o[p]] >= 0:
                p += 1
            ptr[j] = p
            if p < K:
                d[j], d2[j] = b[o[p], j], sec[o[p], j]
                pred_obj[j] = int(o[p])
        # best single move j -> j2 for an object already in j
        mg = {}
        for k in assigned:
            j = tier[k]
            for j2 in range(J):
                if j2 == j:
                    continue
                g, g2 = b[k, j2] - b[k, j], sec[k, j2] - sec[k, j]
                cur = mg.get((j, j2))
                if cur is None or _gt(g, g2, cur[0], cur[1]):
                    mg[(j, j2)] = (g, g2, int(k))
        for _ in range(J - 1):
            changed = False
            for j in range(J):
                if d[j] == neg:
                    continue
                for j2 in range(J):
                    m = mg.get((j, j2))
                    if m is None:
                        continue
                    c, c2 = d[j] + m[0], d2[j] + m[1]
                    if _gt(c, c2, d[j2], d2[j2]):
                        d[j2], d2[j2] = c, c2
                        pred_obj[j2] = m[2]
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
                assigned.append(k)
                break
            j = pj
    return tier


def candidates(benefit, capacity, prefer=None, allowed=None):
    """Objects that can appear in some optimal placement.

    An object whose benefits are all non-positive (and not a zero-benefit
    preferred pair) never helps. Of the rest, only the ``sum(capacity)``
    best of each tier column are needed: any optimum using a lower-ranked
    object can swap in an unused higher-ranked one.
    """
    b = np.asarray(benefit, dtype=float)
    K, J = b.shape
    ok = b.max(axis=1) > 0 if J else np.zeros(K, dtype=bool)
    if prefer is not None:
        held = np.flatnonzero(prefer >= 0)
        ok[held] |= b[held, prefer[held]] >= 0
    if allowed is not None:
        ok &= allowed
    idx = np.flatnonzero(ok)
    total = int(np.sum(capacity))
    if len(idx) > total * J:
        sub = b[idx]
        keep = np.zeros(len(idx), dtype=bool)
        for j in range(J):
            # ties at the boundary are kept whole so preferred pairs survive
            thresh = np.partition(sub[:, j], len(idx) - total)[len(idx) - total]
            keep |= sub[:, j] >= thresh
        idx = idx[keep]
    return idx


def tiered_max_batch(benefits, capacities, prefer, allowed):
    """Run :func:`tiered_max` for every node; ``benefits`` is ``(N, K, J)``."""
    N, K, J = benefits.shape
    out = np.full((N, K), -1, dtype=np.int64)
    for n in range(N):
        idx = candidates(benefits[n], capacities[n], prefer[n], allowed[n])
        if len(idx):
            out[n, idx] = tiered_max(benefits[n, idx], capacities[n], prefer[n, idx])
    return out


def prune_candidates(b, total):
    """Row mask keeping, per column, every entry at or above the ``total``-th largest."""
    n = b.shape[0]
    keep = np.zeros(n, dtype=bool)
    for j in range(b.shape[1]):
        thresh = np.partition(b[:, j], n - total)[n - total]
        keep |= b[:, j] >= thresh
    return keep


def vip_cache_phase(V, tier_of, rates, ca, ce, caps, omega, allowed):
    """Caching decisions for all nodes in one call; returns ``(N, K)`` new tiers."""
    N, K = V.shape
    J = rates.shape[1]
    out = np.full((N, K), -1, dtype=np.int64)
    jj = np.arange(J)
    for n in range(N):
        total = int(caps[n].sum())
        if total == 0:
            continue
        held = tier_of[n][:, None] == jj[None, :]
        b = V[n][:, None] * rates[n][None, :] - omega * ca[n][None, :]
        b = np.where(held, b + omega * (ca[n] + ce[n])[None, :], b)
        usable = caps[n][None, :] > 0
        ok = np.any(usable & ((b > 0) | (held & (b >= 0))), axis=1) & allowed[n].astype(bool)
        idx = np.flatnonzero(ok)
        if len(idx) == 0:
            continue
        sub_b = b[idx]
        if len(idx) > total * J:
            keep = prune_candidates(sub_b, total)
            idx, sub_b = idx[keep], sub_b[keep]
        out[n, idx] = tiered_max(sub_b, caps[n], tier_of[n, idx])
    return out


def vip_forward(V, la, lb, perm, rev_cap):
    """Per link: object with the largest positive differential (lowest id on ties)."""
    L = len(la)
    obj = np.full(L, -1, dtype=np.int64)
    mu = np.zeros(L)
    w = np.zeros(L)
    if V.shape[1] == 0:
        return obj, mu, w
    W = np.where(perm.astype(bool), V[la] - V[lb], -np.inf)
    kstar = np.argmax(W, axis=1)
    wmax = W[np.arange(L), kstar]
    active = wmax > 0
    obj[active] = kstar[active]
    mu[active] = rev_cap[active]
    w[active] = wmax[active]
    return obj, mu, w
