"""Compiled inner loops shared by the search and sketch modules.

All searches run on the transposed graph from a target and work in "key"
space where larger is stronger: key = t for reach, key = -d for distance.
Heap entries are compared lexicographically; see the ``_less*`` helpers.
"""
import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True, inline="always")
def combine(key, e, v, is_middle, edge_val, node_val, is_reach):
    if is_reach:
        c = key
        if is_middle and node_val[v] < c:
            c = node_val[v]
        if edge_val[e] < c:
            c = edge_val[e]
        return c
    c = key
    if is_middle:
        c = c - node_val[v]
    return c - edge_val[e]


# -- binary heap over (a, b) pairs, smallest first --------------------------

@njit(cache=True, inline="always")
def _less2(a1, b1, a2, b2):
    return a1 < a2 or (a1 == a2 and b1 < b2)


@njit(cache=True)
def _push2(ha, hb, size, a, b):
    if size == ha.shape[0]:
        na = np.empty(2 * size + 16, ha.dtype)
        nb = np.empty(2 * size + 16, hb.dtype)
        na[:size] = ha[:size]
        nb[:size] = hb[:size]
        ha, hb = na, nb
    i = size
    ha[i] = a
    hb[i] = b
    while i > 0:
        p = (i - 1) // 2
        if _less2(ha[i], hb[i], ha[p], hb[p]):
            ha[i], ha[p] = ha[p], ha[i]
            hb[i], hb[p] = hb[p], hb[i]
            i = p
        else:
            break
    return ha, hb, size + 1


@njit(cache=True)
def _pop2(ha, hb, size):
    a, b = ha[0], hb[0]
    size -= 1
    ha[0] = ha[size]
    hb[0] = hb[size]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        m = l
        r = l + 1
        if r < size and _less2(ha[r], hb[r], ha[l], hb[l]):
            m = r
        if _less2(ha[m], hb[m], ha[i], hb[i]):
            ha[i], ha[m] = ha[m], ha[i]
            hb[i], hb[m] = hb[m], hb[i]
            i = m
        else:
            break
    return a, b, size


@njit(cache=True)
def reverse_search(rev_indptr, rev_edges, tail, edge_val, node_val, is_reach, source, n):
    """Full (unpruned) search toward ``source``; returns key per node, -inf if unreachable."""
    best = np.full(n, NEG_INF)
    done = np.zeros(n, np.bool_)
    ha = np.empty(64, np.float64)
    hb = np.empty(64, np.int64)
    start = np.inf if is_reach else 0.0
    best[source] = start
    ha, hb, size = _push2(ha, hb, 0, -start, source)
    while size > 0:
        nk, v, size = _pop2(ha, hb, size)
        if done[v] or -nk < best[v]:
            continue
        done[v] = True
        key = -nk
        for idx in range(rev_indptr[v], rev_indptr[v + 1]):
            e = rev_edges[idx]
            h = tail[e]
            if done[h]:
                continue
            c = combine(key, e, v, v != source, edge_val, node_val, is_reach)
            if c > best[h]:
                best[h] = c
                ha, hb, size = _push2(ha, hb, size, -c, h)
    return best


# -- k closest seeds --------------------------------------------------------

@njit(cache=True, inline="always")
def _less3(a1, b1, c1, a2, b2, c2):
    if a1 != a2:
        return a1 < a2
    if b1 != b2:
        return b1 < b2
    return c1 < c2


@njit(cache=True)
def _push3(ha, hb, hc, size, a, b, c):
    if size == ha.shape[0]:
        cap = 2 * size + 16
        na = np.empty(cap, ha.dtype)
        nb = np.empty(cap, hb.dtype)
        nc = np.empty(cap, hc.dtype)
        na[:size] = ha[:size]
        nb[:size] = hb[:size]
        nc[:size] = hc[:size]
        ha, hb, hc = na, nb, nc
    i = size
    ha[i], hb[i], hc[i] = a, b, c
    while i > 0:
        p = (i - 1) // 2
        if _less3(ha[i], hb[i], hc[i], ha[p], hb[p], hc[p]):
            ha[i], ha[p] = ha[p], ha[i]
            hb[i], hb[p] = hb[p], hb[i]
            hc[i], hc[p] = hc[p], hc[i]
            i = p
        else:
            break
    return ha, hb, hc, size + 1


@njit(cache=True)
def _pop3(ha, hb, hc, size):
    a, b, c = ha[0], hb[0], hc[0]
    size -= 1
    ha[0], hb[0], hc[0] = ha[size], hb[size], hc[size]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        m = l
        r = l + 1
        if r < size and _less3(ha[r], hb[r], hc[r], ha[l], hb[l], hc[l]):
            m = r
        if _less3(ha[m], hb[m], hc[m], ha[i], hb[i], hc[i]):
            ha[i], ha[m] = ha[m], ha[i]
            hb[i], hb[m] = hb[m], hb[i]
            hc[i], hc[m] = hc[m], hc[i]
            i = m
        else:
            break
    return a, b, c, size


@njit(cache=True)
def closest_seeds(rev_indptr, rev_edges, tail, edge_val, node_val, is_reach, seeds, k, n):
    """Each node settles up to ``k`` distinct seeds, strongest first.

    Returns (seed ids, keys), both (n, k); unused slots hold -1 / -inf.
    Pops are ordered by (key desc, seed id asc, node id asc).
    """
    found = np.full((n, k), -1, np.int64)
    fkey = np.full((n, k), NEG_INF)
    cnt = np.zeros(n, np.int64)
    ha = np.empty(64, np.float64)
    hb = np.empty(64, np.int64)
    hc = np.empty(64, np.int64)
    size = 0
    start = np.inf if is_reach else 0.0
    for s in seeds:
        ha, hb, hc, size = _push3(ha, hb, hc, size, -start, s, s)
    while size > 0:
        nk, s, v, size = _pop3(ha, hb, hc, size)
        if cnt[v] == k:
            continue
        dup = False
        for q in range(cnt[v]):
            if found[v, q] == s:
                dup = True
                break
        if dup:
            continue
        found[v, cnt[v]] = s
        fkey[v, cnt[v]] = -nk
        cnt[v] += 1
        key = -nk
        for idx in range(rev_indptr[v], rev_indptr[v + 1]):
            e = rev_edges[idx]
            h = tail[e]
            if cnt[h] == k:
                continue
            c = combine(key, e, v, v != s, edge_val, node_val, is_reach)
            if c == NEG_INF:
                continue
            ha, hb, hc, size = _push3(ha, hb, hc, size, -c, s, h)
    return found, fkey


# -- bottom-k all-distances sketches ---------------------------------------

@njit(cache=True, inline="always")
def _sk_less(k1, p1, k2, p2):
    # lexicographic (key, -pi): equal keys put the larger pi first
    return k1 < k2 or (k1 == k2 and p1 > p2)


@njit(cache=True)
def _sk_siftdown(hk, hp, hm, base, size, i):
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        m = l
        r = l + 1
        if r < size and _sk_less(hk[base + r], hp[base + r], hk[base + l], hp[base + l]):
            m = r
        if _sk_less(hk[base + m], hp[base + m], hk[base + i], hp[base + i]):
            a, b = base + m, base + i
            hk[a], hk[b] = hk[b], hk[a]
            hp[a], hp[b] = hp[b], hp[a]
            hm[a], hm[b] = hm[b], hm[a]
            i = m
        else:
            break


@njit(cache=True)
def _sk_push(hk, hp, hm, base, size, key, pi, member):
    i = size
    hk[base + i], hp[base + i], hm[base + i] = key, pi, member
    while i > 0:
        p = (i - 1) // 2
        if _sk_less(hk[base + i], hp[base + i], hk[base + p], hp[base + p]):
            a, b = base + i, base + p
            hk[a], hk[b] = hk[b], hk[a]
            hp[a], hp[b] = hp[b], hp[a]
            hm[a], hm[b] = hm[b], hm[a]
            i = p
        else:
            break


@njit(cache=True)
def _grow_i(a, need):
    if need <= a.shape[0]:
        return a
    b = np.empty(max(need, 2 * a.shape[0]), a.dtype)
    b[:a.shape[0]] = a
    return b


@njit(cache=True)
def _grow_f(a, need):
    if need <= a.shape[0]:
        return a
    b = np.empty(max(need, 2 * a.shape[0]), a.dtype)
    b[:a.shape[0]] = a
    return b


@njit(cache=True)
def _g_push(gk, base, size, key):
    i = size
    gk[base + i] = key
    while i > 0:
        p = (i - 1) // 2
        if gk[base + i] < gk[base + p]:
            gk[base + i], gk[base + p] = gk[base + p], gk[base + i]
            i = p
        else:
            break


@njit(cache=True)
def _g_siftdown(gk, base, size, i):
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        m = l
        if l + 1 < size and gk[base + l + 1] < gk[base + l]:
            m = l + 1
        if gk[base + m] < gk[base + i]:
            gk[base + m], gk[base + i] = gk[base + i], gk[base + m]
            i = m
        else:
            break


@njit(cache=True)
def build_sketches(rev_indptr, rev_edges, tail, edge_val, node_val, is_reach,
                   order, u_size, k, n, prune):
    """Sketch every node against base set ``order`` (nodes listed by increasing rank).

    ``prune``: 0 expands every reached node (reference construction);
    1 stops at nodes whose sketch was not modified; 2 additionally expands
    nodes where the update enters a bottom-(k+1) guard heap. Mode 1 keeps
    membership exact but can miss tie updates upstream, so probabilities may
    differ; mode 2 reproduces mode 0 exactly.
    Returns CSR (indptr, member, key, rank, prob), per-node update counts
    (|S ∪ Z|) and the number of edge traversals.
    """
    hk = np.empty(n * k, np.float64)
    hp = np.empty(n * k, np.int64)
    hm = np.empty(n * k, np.int64)
    hs = np.zeros(n, np.int64)
    prev = np.full(n, NEG_INF)
    lastp = np.full(n, np.nan)
    modcount = np.zeros(n, np.int64)
    k1 = k + 1
    gk = np.empty(n * k1, np.float64)  # guard heap keys (min-heap)
    gs = np.zeros(n, np.int64)

    cap = 4 * n + 16
    e_node = np.empty(cap, np.int64)
    e_mem = np.empty(cap, np.int64)
    e_key = np.empty(cap, np.float64)
    e_pi = np.empty(cap, np.int64)
    ne = 0
    pcap = 2 * n + 16
    p_node = np.empty(pcap, np.int64)
    p_key = np.empty(pcap, np.float64)
    p_val = np.empty(pcap, np.float64)
    npset = 0

    best = np.full(n, NEG_INF)
    stamp = np.full(n, -1, np.int64)
    done = np.full(n, -1, np.int64)
    ha = np.empty(64, np.float64)
    hb = np.empty(64, np.int64)
    traversals = 0
    start = np.inf if is_reach else 0.0

    for r in range(order.shape[0]):
        j = order[r]
        pi = r + 1
        u = (pi - 1) / u_size
        best[j] = start
        stamp[j] = r
        ha, hb, size = _push2(ha, hb, 0, -start, j)
        while size > 0:
            nk, v, size = _pop2(ha, hb, size)
            if done[v] == r or -nk < best[v]:
                continue
            done[v] = r
            key = -nk
            # sketch update, Algorithm "maintain S(i)"
            base = v * k
            modified = False
            if hs[v] < k:
                _sk_push(hk, hp, hm, base, hs[v], key, pi, j)
                hs[v] += 1
                modified = True
                add_entry = True
            else:
                add_entry = False
                ykey = hk[base]
                if key > ykey:
                    add_entry = True
                    modified = True
                    prev[v] = ykey
                    if lastp[v] != ykey:
                        if npset == p_node.shape[0]:
                            p_node = _grow_i(p_node, npset + 1)
                            p_key = _grow_f(p_key, npset + 1)
                            p_val = _grow_f(p_val, npset + 1)
                        p_node[npset], p_key[npset], p_val[npset] = v, ykey, u
                        npset += 1
                        lastp[v] = ykey
                    hk[base], hp[base], hm[base] = key, pi, j
                    _sk_siftdown(hk, hp, hm, base, k, 0)
                elif key == ykey and ykey > prev[v]:
                    modified = True
                    if npset == p_node.shape[0]:
                        p_node = _grow_i(p_node, npset + 1)
                        p_key = _grow_f(p_key, npset + 1)
                        p_val = _grow_f(p_val, npset + 1)
                    p_node[npset], p_key[npset], p_val[npset] = v, key, u
                    npset += 1
                    lastp[v] = key
                    prev[v] = ykey
            if add_entry:
                if ne == e_node.shape[0]:
                    e_node = _grow_i(e_node, ne + 1)
                    e_mem = _grow_i(e_mem, ne + 1)
                    e_key = _grow_f(e_key, ne + 1)
                    e_pi = _grow_i(e_pi, ne + 1)
                e_node[ne], e_mem[ne], e_key[ne], e_pi[ne] = v, j, key, pi
                ne += 1
            if modified:
                modcount[v] += 1
            if prune == 2:
                gb = v * k1
                if gs[v] < k1:
                    _g_push(gk, gb, gs[v], key)
                    gs[v] += 1
                    modified = True
                elif key > gk[gb]:
                    gk[gb] = key
                    _g_siftdown(gk, gb, k1, 0)
                    modified = True
            # the source is always expanded: paths through it pay its pass-through
            if not modified and prune != 0 and v != j:
                continue
            for idx in range(rev_indptr[v], rev_indptr[v + 1]):
                traversals += 1
                e = rev_edges[idx]
                h = tail[e]
                if done[h] == r:
                    continue
                c = combine(key, e, v, v != j, edge_val, node_val, is_reach)
                if c == NEG_INF:
                    continue
                if stamp[h] != r or c > best[h]:
                    stamp[h] = r
                    best[h] = c
                    ha, hb, size = _push2(ha, hb, size, -c, h)

    # finalize: heap members whose threshold has no probability yet get 1.
    # Probabilities are only ever set at the running eviction threshold, so a
    # heap key is already covered exactly when it equals the last one set.
    for v in range(n):
        base = v * k
        first_new = npset
        for q in range(hs[v]):
            kq = hk[base + q]
            if lastp[v] == kq:
                continue
            seen = False
            for t in range(first_new, npset):
                if p_key[t] == kq:
                    seen = True
                    break
            if seen:
                continue
            if npset == p_node.shape[0]:
                p_node = _grow_i(p_node, npset + 1)
                p_key = _grow_f(p_key, npset + 1)
                p_val = _grow_f(p_val, npset + 1)
            p_node[npset], p_key[npset], p_val[npset] = v, kq, 1.0
            npset += 1

    # group entries and probability settings by node
    counts = np.zeros(n + 1, np.int64)
    for t in range(ne):
        counts[e_node[t] + 1] += 1
    indptr = np.cumsum(counts)
    fill = indptr[:-1].copy()
    member = np.empty(ne, np.int64)
    keys = np.empty(ne, np.float64)
    ranks = np.empty(ne, np.int64)
    for t in range(ne):
        v = e_node[t]
        q = fill[v]
        member[q], keys[q], ranks[q] = e_mem[t], e_key[t], e_pi[t]
        fill[v] += 1
    pc = np.zeros(n + 1, np.int64)
    for t in range(npset):
        pc[p_node[t] + 1] += 1
    pptr = np.cumsum(pc)
    pfill = pptr[:-1].copy()
    pk = np.empty(npset, np.float64)
    pv = np.empty(npset, np.float64)
    for t in range(npset):
        v = p_node[t]
        pk[pfill[v]], pv[pfill[v]] = p_key[t], p_val[t]
        pfill[v] += 1
    prob = np.full(ne, np.nan)
    for v in range(n):
        for q in range(indptr[v], indptr[v + 1]):
            for t in range(pptr[v], pptr[v + 1]):
                if pk[t] == keys[q]:
                    prob[q] = pv[t]
                    break
    return indptr, member, keys, ranks, prob, modcount, traversals


@njit(cache=True)
def query_lists(indptr, keys, cum, nodes, qkeys):
    """Staircase lookup: for each (node, key) the estimate of the last row with row key >= key."""
    out = np.zeros(nodes.shape[0])
    for t in range(nodes.shape[0]):
        v = nodes[t]
        lo, hi = indptr[v], indptr[v + 1]
        # rows are sorted by decreasing key; find the count of rows with key >= q
        a, b = lo, hi
        q = qkeys[t]
        while a < b:
            m = (a + b) // 2
            if keys[m] >= q:
                a = m + 1
            else:
                b = m
        if a > lo:
            out[t] = cum[a - 1]
    return out
