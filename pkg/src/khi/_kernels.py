"""Compiled inner loops for graph construction and filtered search.

Everything here works on *positions* (indices into the tree's reordered
object array), never on object ids.  Graph levels under construction are
dense ``(n, M)`` neighbour/distance matrices plus a degree vector; finished
levels are CSR slices addressed through a ``(height, n + 1)`` indptr table.

Heaps order entries by (distance, position) so ties break deterministically.
"""

import numba as nb
import numpy as np

_JIT = dict(cache=True, nogil=True)


@nb.njit(inline="always", **_JIT)
def _less(d1, i1, d2, i2):
    return d1 < d2 or (d1 == d2 and i1 < i2)


@nb.njit(**_JIT)
def min_push(hd, hi, size, d, i):
    j = size
    hd[j] = d
    hi[j] = i
    while j > 0:
        par = (j - 1) >> 1
        if _less(hd[j], hi[j], hd[par], hi[par]):
            hd[j], hd[par] = hd[par], hd[j]
            hi[j], hi[par] = hi[par], hi[j]
            j = par
        else:
            break
    return size + 1


@nb.njit(**_JIT)
def min_pop(hd, hi, size):
    size -= 1
    hd[0] = hd[size]
    hi[0] = hi[size]
    j = 0
    while True:
        a = 2 * j + 1
        if a >= size:
            break
        b = a + 1
        c = a
        if b < size and _less(hd[b], hi[b], hd[a], hi[a]):
            c = b
        if _less(hd[c], hi[c], hd[j], hi[j]):
            hd[j], hd[c] = hd[c], hd[j]
            hi[j], hi[c] = hi[c], hi[j]
            j = c
        else:
            break
    return size


@nb.njit(**_JIT)
def max_push(hd, hi, size, d, i):
    j = size
    hd[j] = d
    hi[j] = i
    while j > 0:
        par = (j - 1) >> 1
        if _less(hd[par], hi[par], hd[j], hi[j]):
            hd[j], hd[par] = hd[par], hd[j]
            hi[j], hi[par] = hi[par], hi[j]
            j = par
        else:
            break
    return size + 1


@nb.njit(**_JIT)
def max_pop(hd, hi, size):
    size -= 1
    hd[0] = hd[size]
    hi[0] = hi[size]
    j = 0
    while True:
        a = 2 * j + 1
        if a >= size:
            break
        b = a + 1
        c = a
        if b < size and _less(hd[a], hi[a], hd[b], hi[b]):
            c = b
        if _less(hd[j], hi[j], hd[c], hi[c]):
            hd[j], hd[c] = hd[c], hd[j]
            hi[j], hi[c] = hi[c], hi[j]
            j = c
        else:
            break
    return size


@nb.njit(inline="always", **_JIT)
def dist_rows(vecs, a, b):
    s = np.float32(0.0)
    for j in range(vecs.shape[1]):
        t = vecs[a, j] - vecs[b, j]
        s += t * t
    return np.sqrt(s)


@nb.njit(inline="always", **_JIT)
def dist_query(vecs, a, q):
    s = np.float32(0.0)
    for j in range(vecs.shape[1]):
        t = vecs[a, j] - q[j]
        s += t * t
    return np.sqrt(s)


@nb.njit(**_JIT)
def pair_distance(vecs, a, b):
    return dist_rows(vecs, a, b)


# ---------------------------------------------------------------------------
# construction


@nb.njit(**_JIT)
def search_layer(vecs, q, skip, entries, nbr, deg, base, ef, visited, stamp, cd, ci, rd, ri, out_i, out_d):
    """Best-first beam search over a dense adjacency; returns result count.

    ``visited`` is indexed by ``position - base``.  ``skip`` (a position or
    -1) is never reported nor expanded.
    """
    nc = 0
    nr = 0
    if skip >= 0:
        visited[skip - base] = stamp
    for e in entries:
        if visited[e - base] == stamp:
            continue
        visited[e - base] = stamp
        d = dist_query(vecs, e, q)
        nc = min_push(cd, ci, nc, d, e)
        nr = max_push(rd, ri, nr, d, e)
        if nr > ef:
            nr = max_pop(rd, ri, nr)
    while nc > 0:
        cdist = cd[0]
        c = ci[0]
        if nr >= ef and cdist > rd[0]:
            break
        nc = min_pop(cd, ci, nc)
        for t in range(deg[c]):
            v = nbr[c, t]
            if visited[v - base] == stamp:
                continue
            visited[v - base] = stamp
            d = dist_query(vecs, v, q)
            if nr < ef or _less(d, v, rd[0], ri[0]):
                nc = min_push(cd, ci, nc, d, v)
                nr = max_push(rd, ri, nr, d, v)
                if nr > ef:
                    nr = max_pop(rd, ri, nr)
    count = nr
    while nr > 0:
        out_d[nr - 1] = rd[0]
        out_i[nr - 1] = ri[0]
        nr = max_pop(rd, ri, nr)
    return count


@nb.njit(**_JIT)
def rng_prune(vecs, cand_i, cand_d, count, M, out_i, out_d):
    """Keep v unless an already-kept v' has d(u,v') < d(u,v) and d(v,v') < d(u,v).

    Candidates are sorted in place by (distance, position).
    """
    for a in range(1, count):
        di = cand_d[a]
        ii = cand_i[a]
        b = a - 1
        while b >= 0 and _less(di, ii, cand_d[b], cand_i[b]):
            cand_d[b + 1] = cand_d[b]
            cand_i[b + 1] = cand_i[b]
            b -= 1
        cand_d[b + 1] = di
        cand_i[b + 1] = ii
    kept = 0
    for a in range(count):
        v = cand_i[a]
        dv = cand_d[a]
        ok = True
        for b in range(kept):
            if out_d[b] < dv and dist_rows(vecs, v, out_i[b]) < dv:
                ok = False
                break
        if ok:
            out_i[kept] = v
            out_d[kept] = dv
            kept += 1
            if kept == M:
                break
    return kept


@nb.njit(**_JIT)
def _refresh(vecs, v, o, d_vo, M, nbr, dst, deg, cand_i, cand_d, tmp_i, tmp_d):
    """N(v) <- prune({o} | N(v))."""
    dv = deg[v]
    for t in range(dv):
        if nbr[v, t] == o:
            return
        cand_i[t] = nbr[v, t]
        cand_d[t] = dst[v, t]
    cand_i[dv] = o
    cand_d[dv] = d_vo
    kept = rng_prune(vecs, cand_i, cand_d, dv + 1, M, tmp_i, tmp_d)
    for t in range(kept):
        nbr[v, t] = tmp_i[t]
        dst[v, t] = tmp_d[t]
    deg[v] = kept


@nb.njit(**_JIT)
def _link(vecs, i, cnt, res_i, res_d, cnbr, cdst, cdeg, use_child, mid, M, nbr, dst, deg, cand_i, cand_d, tmp_i, tmp_d):
    """Set N(i) from search results (plus child-graph neighbours) and refresh back edges."""
    c = 0
    for t in range(cnt):
        cand_i[c] = res_i[t]
        cand_d[c] = res_d[t]
        c += 1
    if use_child:
        for t in range(cdeg[i]):
            v = cnbr[i, t]
            dup = False
            for s in range(cnt):
                if res_i[s] == v:
                    dup = True
                    break
            if not dup:
                cand_i[c] = v
                cand_d[c] = cdst[i, t]
                c += 1
    kept = rng_prune(vecs, cand_i, cand_d, c, M, tmp_i, tmp_d)
    for t in range(kept):
        nbr[i, t] = tmp_i[t]
        dst[i, t] = tmp_d[t]
    deg[i] = kept
    # tmp is reused by _refresh, keep our own copy of the kept list
    keep_i = tmp_i[:kept].copy()
    keep_d = tmp_d[:kept].copy()
    for t in range(kept):
        v = keep_i[t]
        if v < mid:
            _refresh(vecs, v, i, keep_d[t], M, nbr, dst, deg, cand_i, cand_d, tmp_i, tmp_d)


@nb.njit(**_JIT)
def build_node(vecs, b, mid, e, M, ef, nbr, dst, deg, cnbr, cdst, cdeg):
    """Build the graph of node [b, e).

    Leaf when ``mid < 0``: incremental insertion in slice order.  Internal
    otherwise: copy the left child [b, mid) and insert the right child
    [mid, e) using its child-graph neighbours as extra candidates.
    """
    size = e - b
    visited = np.zeros(size, np.int32)
    cd = np.empty(size, np.float32)
    ci = np.empty(size, np.int64)
    rd = np.empty(ef + 1, np.float32)
    ri = np.empty(ef + 1, np.int64)
    out_i = np.empty(ef, np.int64)
    out_d = np.empty(ef, np.float32)
    cand_i = np.empty(ef + 2 * M + 2, np.int64)
    cand_d = np.empty(ef + 2 * M + 2, np.float32)
    tmp_i = np.empty(M, np.int64)
    tmp_d = np.empty(M, np.float32)
    entries = np.empty(1, np.int64)
    entries[0] = b
    if mid < 0:
        deg[b:e] = 0
        first = b + 1
        use_child = False
        lim = e  # back edges refreshed for every earlier vertex
    else:
        for r in range(b, mid):
            deg[r] = cdeg[r]
            for t in range(cdeg[r]):
                nbr[r, t] = cnbr[r, t]
                dst[r, t] = cdst[r, t]
        deg[mid:e] = 0
        first = mid
        use_child = True
        lim = mid
    stamp = 0
    for i in range(first, e):
        stamp += 1
        cnt = search_layer(vecs, vecs[i], i, entries, nbr, deg, b, ef, visited, stamp, cd, ci, rd, ri, out_i, out_d)
        _link(vecs, i, cnt, out_i, out_d, cnbr, cdst, cdeg, use_child, lim, M, nbr, dst, deg, cand_i, cand_d, tmp_i, tmp_d)


@nb.njit(**_JIT)
def build_nodes(nodes, begin, end, left, vecs, M, ef, nbr, dst, deg, cnbr, cdst, cdeg):
    for p in nodes:
        mid = -1 if left[p] < 0 else end[left[p]]
        build_node(vecs, begin[p], mid, end[p], M, ef, nbr, dst, deg, cnbr, cdst, cdeg)


@nb.njit(**_JIT)
def merge_prepare(b, mid, e, nbr, dst, deg, cnbr, cdst, cdeg):
    for r in range(b, mid):
        deg[r] = cdeg[r]
        for t in range(cdeg[r]):
            nbr[r, t] = cnbr[r, t]
            dst[r, t] = cdst[r, t]
    deg[mid:e] = 0


@nb.njit(**_JIT)
def merge_search_batch(vecs, b, lo, hi, ef, nbr, deg, visited, stamp0, res_i, res_d, res_cnt, row0):
    """Search phase of a batched right-slice insertion (read-only on the graph).

    Searches positions [lo, hi) and writes results to rows starting at
    ``row0``.  Returns the last stamp used.
    """
    size = visited.shape[0]
    cd = np.empty(size, np.float32)
    ci = np.empty(size, np.int64)
    rd = np.empty(ef + 1, np.float32)
    ri = np.empty(ef + 1, np.int64)
    entries = np.empty(1, np.int64)
    entries[0] = b
    stamp = stamp0
    for i in range(lo, hi):
        stamp += 1
        r = row0 + i - lo
        res_cnt[r] = search_layer(vecs, vecs[i], i, entries, nbr, deg, b, ef, visited, stamp, cd, ci, rd, ri, res_i[r], res_d[r])
    return stamp


@nb.njit(**_JIT)
def merge_link_batch(vecs, mid, lo, hi, M, nbr, dst, deg, cnbr, cdst, cdeg, res_i, res_d, res_cnt):
    ef = res_i.shape[1]
    cand_i = np.empty(ef + 2 * M + 2, np.int64)
    cand_d = np.empty(ef + 2 * M + 2, np.float32)
    tmp_i = np.empty(M, np.int64)
    tmp_d = np.empty(M, np.float32)
    for i in range(lo, hi):
        r = i - lo
        _link(vecs, i, res_cnt[r], res_i[r], res_d[r], cnbr, cdst, cdeg, True, mid, M, nbr, dst, deg, cand_i, cand_d, tmp_i, tmp_d)


@nb.njit(**_JIT)
def dense_to_csr(nbr, dst, deg):
    n = deg.shape[0]
    indptr = np.zeros(n + 1, np.int64)
    for i in range(n):
        indptr[i + 1] = indptr[i] + deg[i]
    flat_i = np.empty(indptr[n], np.int32)
    flat_d = np.empty(indptr[n], np.float32)
    for i in range(n):
        s = indptr[i]
        for t in range(deg[i]):
            flat_i[s + t] = nbr[i, t]
            flat_d[s + t] = dst[i, t]
    return indptr, flat_i, flat_d


# ---------------------------------------------------------------------------
# query


@nb.njit(inline="always", **_JIT)
def in_range(attrs, v, lo, hi):
    for j in range(attrs.shape[1]):
        a = attrs[v, j]
        if a < lo[j] or a > hi[j]:
            return False
    return True


@nb.njit(**_JIT)
def range_filter(lo, hi, c_e, attrs, tree, out):
    """Entry-point selection by depth-first traversal of the partitioning tree.

    Returns (count, used_fallback).
    """
    left, right, split_dim, bl, reg_lo, reg_hi, begin, end, height = tree
    m = attrs.shape[1]
    full = np.uint64(0)
    for j in range(m):
        full |= np.uint64(1) << np.uint64(j)
    cap = 2 * height + 4
    st_node = np.empty(cap, np.int64)
    st_mask = np.empty(cap, np.uint64)
    cand = np.empty(c_e, np.int64)
    nc = 0
    sp = 1
    st_node[0] = 0
    st_mask[0] = np.uint64(0)
    while sp > 0 and nc < c_e:
        sp -= 1
        p = st_node[sp]
        D = st_mask[sp] | bl[p]
        if D == full:
            cand[nc] = p
            nc += 1
            continue
        if left[p] < 0:
            continue
        dim = split_dim[p]
        bit = np.uint64(1) << np.uint64(dim)
        kids = (left[p], right[p])
        if (D & bit) != np.uint64(0):
            for c in kids:
                st_node[sp] = c
                st_mask[sp] = D
                sp += 1
        else:
            for c in kids:
                lc = reg_lo[c, dim]
                rc = reg_hi[c, dim]
                if lc > hi[dim] or rc < lo[dim]:
                    continue
                st_node[sp] = c
                if lc >= lo[dim] and rc <= hi[dim]:
                    st_mask[sp] = D | bit
                else:
                    st_mask[sp] = D
                sp += 1
    count = 0
    for t in range(nc):
        p = cand[t]
        for v in range(begin[p], end[p]):
            if in_range(attrs, v, lo, hi):
                out[count] = v
                count += 1
                break
    if count > 0:
        return count, False
    # fallback: scan leaves whose regions intersect the predicate
    m = attrs.shape[1]
    sp = 1
    st_node[0] = 0
    while sp > 0 and count < c_e:
        sp -= 1
        p = st_node[sp]
        hit = True
        for j in range(m):
            if reg_lo[p, j] > hi[j] or reg_hi[p, j] < lo[j]:
                hit = False
                break
        if not hit:
            continue
        if left[p] < 0:
            for v in range(begin[p], end[p]):
                if in_range(attrs, v, lo, hi):
                    out[count] = v
                    count += 1
                    if count == c_e:
                        break
        else:
            st_node[sp] = right[p]
            st_node[sp + 1] = left[p]
            sp += 2
    return count, True


@nb.njit(**_JIT)
def recons_nbr(u, lo, hi, c_n, leaf_first, attrs, leaf_level, indptr, flat_nbr, visited, stamp, out):
    L = leaf_level[u]
    cnt = 0
    for t in range(L + 1):
        lv = L - t if leaf_first else t
        for j in range(indptr[lv, u], indptr[lv, u + 1]):
            v = flat_nbr[j]
            if visited[v] == stamp:
                continue
            visited[v] = stamp
            if not in_range(attrs, v, lo, hi):
                continue
            out[cnt] = v
            cnt += 1
            if cnt == c_n:
                return cnt
    return cnt


@nb.njit(**_JIT)
def search(q, lo, hi, k, ef, c_e, c_n, leaf_first, vecs, attrs, tree, leaf_level, indptr, flat_nbr, visited, stamp, want_trace, out_i, out_d):
    """Filtered greedy search.  Returns (count, dist_comps, hops, trace, trace_fill).

    With ``want_trace`` the max-heap top distance and the heap size are
    sampled after every hop.
    """
    n = vecs.shape[0]
    cd = np.empty(n, np.float32)
    ci = np.empty(n, np.int64)
    rd = np.empty(ef + 1, np.float32)
    ri = np.empty(ef + 1, np.int64)
    ent = np.empty(c_e, np.int64)
    nb_buf = np.empty(c_n, np.int64)
    trace = np.empty(n if want_trace else 0, np.float32)
    fill = np.empty(n if want_trace else 0, np.int32)
    n_ent, _ = range_filter(lo, hi, c_e, attrs, tree, ent)
    nc = 0
    nr = 0
    dcomp = 0
    hops = 0
    for t in range(n_ent):
        o = ent[t]
        d = dist_query(vecs, o, q)
        dcomp += 1
        nr = max_push(rd, ri, nr, d, o)
        nc = min_push(cd, ci, nc, d, o)
        visited[o] = stamp
        if nr > ef:
            nr = max_pop(rd, ri, nr)
    while nc > 0 and (nr < ef or cd[0] <= rd[0]):
        u = ci[0]
        nc = min_pop(cd, ci, nc)
        cnt = recons_nbr(u, lo, hi, c_n, leaf_first, attrs, leaf_level, indptr, flat_nbr, visited, stamp, nb_buf)
        for t in range(cnt):
            v = nb_buf[t]
            d = dist_query(vecs, v, q)
            dcomp += 1
            nr = max_push(rd, ri, nr, d, v)
            nc = min_push(cd, ci, nc, d, v)
            if nr > ef:
                nr = max_pop(rd, ri, nr)
        if want_trace:
            trace[hops] = rd[0]
            fill[hops] = nr
        hops += 1
    total = nr
    while nr > 0:
        if nr <= k:
            out_d[nr - 1] = rd[0]
            out_i[nr - 1] = ri[0]
        nr = max_pop(rd, ri, nr)
    if want_trace:
        return min(total, k), dcomp, hops, trace[:hops], fill[:hops]
    return min(total, k), dcomp, hops, trace, fill
