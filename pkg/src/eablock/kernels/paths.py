"""Bounded depth-first searches over simple paths."""

import numpy as np

from .._accel import jit


@jit
def walk_bounds(indptr, nbrs, logw, depth):
    """``F[k, v]``: the largest log-weight sum over walks from ``v`` with at most ``k`` steps.

    Stopping early is allowed, so ``F[k] = logw + max(0, max over neighbours of F[k-1])``.
    Every simple path is a walk, which makes ``F`` an admissible pruning bound.
    """
    n = indptr.shape[0] - 1
    F = np.empty((depth + 1, n))
    F[0, :] = logw
    for k in range(1, depth + 1):
        for v in range(n):
            best = 0.0
            for j in range(indptr[v], indptr[v + 1]):
                f = F[k - 1, nbrs[j]]
                if f > best:
                    best = f
            F[k, v] = logw[v] + best
    return F


@jit
def _fill_candidates(indptr, nbrs, F, on_path, v, base, remaining, row, keys):
    c = 0
    for j in range(indptr[v], indptr[v + 1]):
        w = nbrs[j]
        if on_path[w]:
            continue
        b = base + F[remaining, w]
        if b >= 0.0:
            row[c] = w
            keys[c] = -b
            c += 1
    if c > 1:
        order = np.argsort(keys[:c], kind="mergesort")
        tmp = row[:c].copy()
        for i in range(c):
            row[i] = tmp[order[i]]
    return c


@jit
def heavy_path_from(indptr, nbrs, logw, F, u, max_len, path_out):
    """Search simple paths from ``u`` with at most ``max_len`` edges for log-weight >= 0.

    Returns the number of vertices in the witness written to ``path_out``, or 0
    if every such path has weight below one. Children are tried in decreasing
    order of their bound so witnesses surface early.
    """
    n = indptr.shape[0] - 1
    if F[max_len, u] < 0.0:
        return 0
    path_out[0] = u
    if logw[u] >= 0.0:
        return 1
    maxdeg = 0
    for v in range(n):
        if indptr[v + 1] - indptr[v] > maxdeg:
            maxdeg = indptr[v + 1] - indptr[v]
    on_path = np.zeros(n, dtype=np.bool_)
    path = np.empty(max_len + 1, dtype=np.int64)
    acc = np.empty(max_len + 1)
    cand = np.empty((max_len + 1, max(maxdeg, 1)), dtype=np.int64)
    ncand = np.zeros(max_len + 1, dtype=np.int64)
    pos = np.zeros(max_len + 1, dtype=np.int64)
    keys = np.empty(max(maxdeg, 1))
    path[0] = u
    acc[0] = logw[u]
    on_path[u] = True
    depth = 0
    if max_len > 0:
        ncand[0] = _fill_candidates(indptr, nbrs, F, on_path, u, acc[0], max_len - 1, cand[0], keys)
    while True:
        if pos[depth] >= ncand[depth]:
            on_path[path[depth]] = False
            if depth == 0:
                return 0
            depth -= 1
            continue
        w = cand[depth, pos[depth]]
        pos[depth] += 1
        a = acc[depth] + logw[w]
        depth += 1
        path[depth] = w
        acc[depth] = a
        on_path[w] = True
        if a >= 0.0:
            for i in range(depth + 1):
                path_out[i] = path[i]
            return depth + 1
        pos[depth] = 0
        if depth < max_len:
            ncand[depth] = _fill_candidates(indptr, nbrs, F, on_path, w, a, max_len - depth - 1, cand[depth], keys)
        else:
            ncand[depth] = 0


@jit
def block_vertex_mask(indptr, nbrs, logw, max_len):
    n = indptr.shape[0] - 1
    F = walk_bounds(indptr, nbrs, logw, max_len)
    out = np.zeros(n, dtype=np.bool_)
    buf = np.empty(max_len + 1, dtype=np.int64)
    for u in range(n):
        out[u] = heavy_path_from(indptr, nbrs, logw, F, u, max_len, buf) == 0
    return out


@jit
def upsilon_witness(indptr, nbrs, absJ_csr, logdeg, beta, max_len, threshold, path_out):
    """Find a simple path with at most ``max_len`` edges whose comparison weight exceeds ``threshold``.

    The weight of a path P is ``beta * sum |J_e|`` over edges touching P plus
    ``sum ln deg(v)`` over P. Extending a path never lowers it, so a prefix over
    the threshold is already a witness. Returns the witness length or 0.
    """
    n = indptr.shape[0] - 1
    on_path = np.zeros(n, dtype=np.bool_)
    path = np.empty(max_len + 1, dtype=np.int64)
    ptr = np.empty(max_len + 1, dtype=np.int64)
    acc = np.empty(max_len + 1)
    for s in range(n):
        inc = logdeg[s]
        for j in range(indptr[s], indptr[s + 1]):
            inc += beta * absJ_csr[j]
        path[0] = s
        acc[0] = inc
        if inc > threshold:
            path_out[0] = s
            return 1
        ptr[0] = indptr[s]
        on_path[s] = True
        depth = 0
        while True:
            v = path[depth]
            if depth >= max_len or ptr[depth] >= indptr[v + 1]:
                on_path[v] = False
                if depth == 0:
                    break
                depth -= 1
                continue
            w = nbrs[ptr[depth]]
            ptr[depth] += 1
            if on_path[w]:
                continue
            inc = logdeg[w]
            for j in range(indptr[w], indptr[w + 1]):
                if not on_path[nbrs[j]]:
                    inc += beta * absJ_csr[j]
            a = acc[depth] + inc
            depth += 1
            path[depth] = w
            acc[depth] = a
            ptr[depth] = indptr[w]
            on_path[w] = True
            if a > threshold:
                for i in range(depth + 1):
                    path_out[i] = path[i]
                return depth + 1
    return 0
