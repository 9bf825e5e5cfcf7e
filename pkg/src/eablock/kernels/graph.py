"""Breadth-first searches, exact diameter and short-cycle enumeration on CSR graphs."""

import numpy as np

from .._accel import jit


@jit
def bfs_distances(indptr, nbrs, sources, max_depth):
    """Multi-source BFS distances, -1 for vertices not reached within ``max_depth``."""
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    for s in sources:
        if dist[s] < 0:
            dist[s] = 0
            queue[tail] = s
            tail += 1
    while head < tail:
        v = queue[head]
        head += 1
        if dist[v] >= max_depth:
            continue
        for k in range(indptr[v], indptr[v + 1]):
            w = nbrs[k]
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue[tail] = w
                tail += 1
    return dist


@jit
def bfs_through(indptr, nbrs, sources, passable):
    """BFS from ``sources`` that only steps onto vertices with ``passable`` set.

    Returns (order, parent): the reached vertices in visit order (sources first)
    and a parent array (-1 for sources and unreached vertices, -2 marks unreached).
    """
    n = indptr.shape[0] - 1
    parent = np.full(n, -2, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    for s in sources:
        if parent[s] == -2:
            parent[s] = -1
            queue[tail] = s
            tail += 1
    while head < tail:
        v = queue[head]
        head += 1
        for k in range(indptr[v], indptr[v + 1]):
            w = nbrs[k]
            if parent[w] == -2 and passable[w]:
                parent[w] = v
                queue[tail] = w
                tail += 1
    return queue[:tail].copy(), parent


@jit
def connected_components(indptr, nbrs):
    n = indptr.shape[0] - 1
    label = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    count = 0
    for s in range(n):
        if label[s] >= 0:
            continue
        label[s] = count
        head = 0
        tail = 1
        queue[0] = s
        while head < tail:
            v = queue[head]
            head += 1
            for k in range(indptr[v], indptr[v + 1]):
                w = nbrs[k]
                if label[w] < 0:
                    label[w] = count
                    queue[tail] = w
                    tail += 1
        count += 1
    return label, count


@jit
def _eccentricity_pass(indptr, nbrs, s, dist, queue):
    n = indptr.shape[0] - 1
    for i in range(n):
        dist[i] = -1
    dist[s] = 0
    queue[0] = s
    head = 0
    tail = 1
    while head < tail:
        v = queue[head]
        head += 1
        for k in range(indptr[v], indptr[v + 1]):
            w = nbrs[k]
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue[tail] = w
                tail += 1
    return dist[queue[tail - 1]], tail


@jit
def batch_eccentricities(indptr, nbrs, sources):
    """Eccentricities of up to 64 sources at once, one bit per source."""
    n = indptr.shape[0] - 1
    k = sources.shape[0]
    visited = np.zeros(n, dtype=np.uint64)
    frontier = np.zeros(n, dtype=np.uint64)
    nxt = np.zeros(n, dtype=np.uint64)
    ecc = np.zeros(k, dtype=np.int64)
    for i in range(k):
        bit = np.uint64(1) << np.uint64(i)
        visited[sources[i]] |= bit
        frontier[sources[i]] |= bit
    level = 0
    while True:
        level += 1
        grew = np.uint64(0)
        for v in range(n):
            acc = np.uint64(0)
            for j in range(indptr[v], indptr[v + 1]):
                acc |= frontier[nbrs[j]]
            acc &= ~visited[v]
            nxt[v] = acc
            grew |= acc
        if grew == 0:
            break
        for v in range(n):
            visited[v] |= nxt[v]
            frontier[v] = nxt[v]
        for i in range(k):
            if (grew >> np.uint64(i)) & np.uint64(1):
                ecc[i] = level
    return ecc


@jit
def component_diameter(indptr, nbrs, members):
    """Exact diameter of one connected component.

    A few rounds of eccentricity bounding (alternating between the largest
    upper bound and the smallest lower bound) settle most vertices; the rest
    get exact eccentricities from 64-wide bit-parallel searches.
    """
    n = indptr.shape[0] - 1
    k = members.shape[0]
    if k <= 1:
        return 0
    lo = np.zeros(n, dtype=np.int64)
    hi = np.full(n, n, dtype=np.int64)
    active = np.zeros(n, dtype=np.bool_)
    for v in members:
        active[v] = True
    remaining = k
    dist = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    diam_lo = 0
    pick_high = True
    rounds = 0
    while remaining > 0 and rounds < 32:
        rounds += 1
        best = -1
        for v in members:
            if not active[v]:
                continue
            if best < 0:
                best = v
            elif pick_high:
                if hi[v] > hi[best] or (hi[v] == hi[best] and lo[v] < lo[best]):
                    best = v
            else:
                if lo[v] < lo[best] or (lo[v] == lo[best] and hi[v] > hi[best]):
                    best = v
        pick_high = not pick_high
        ecc, _ = _eccentricity_pass(indptr, nbrs, best, dist, queue)
        if ecc > diam_lo:
            diam_lo = ecc
        for v in members:
            dv = dist[v]
            a = ecc - dv
            if dv > a:
                a = dv
            if a > lo[v]:
                lo[v] = a
            b = ecc + dv
            if b < hi[v]:
                hi[v] = b
        active[best] = False
        remaining = 0
        for v in members:
            if active[v]:
                if hi[v] <= diam_lo or (lo[v] == hi[v] and lo[v] <= diam_lo):
                    active[v] = False
                    if lo[v] == hi[v] and lo[v] > diam_lo:
                        diam_lo = lo[v]
                else:
                    remaining += 1
    if remaining > 0:
        rest = np.empty(remaining, dtype=np.int64)
        c = 0
        for v in members:
            if active[v]:
                rest[c] = v
                c += 1
        for start in range(0, remaining, 64):
            stop = min(start + 64, remaining)
            ecc = batch_eccentricities(indptr, nbrs, rest[start:stop])
            for e in ecc:
                if e > diam_lo:
                    diam_lo = e
    return diam_lo


@jit
def short_cycles(indptr, nbrs, max_len):
    """All simple cycles with at most ``max_len`` vertices, in canonical form.

    A cycle is reported once, starting at its smallest vertex and oriented so
    that the second vertex is smaller than the last. Output is a flat vertex
    array plus offsets.
    """
    n = indptr.shape[0] - 1
    flat = np.empty(64, dtype=np.int64)
    offsets = np.empty(17, dtype=np.int64)
    offsets[0] = 0
    ncyc = 0
    used = 0
    path = np.empty(max_len, dtype=np.int64)
    ptr = np.empty(max_len, dtype=np.int64)
    on_path = np.zeros(n, dtype=np.bool_)
    for s in range(n):
        path[0] = s
        ptr[0] = indptr[s]
        on_path[s] = True
        depth = 1
        while depth > 0:
            v = path[depth - 1]
            if ptr[depth - 1] >= indptr[v + 1]:
                on_path[v] = False
                depth -= 1
                continue
            w = nbrs[ptr[depth - 1]]
            ptr[depth - 1] += 1
            if w == s and depth >= 3 and path[1] < path[depth - 1]:
                if used + depth > flat.shape[0]:
                    grown = np.empty(2 * (used + depth), dtype=np.int64)
                    grown[:used] = flat[:used]
                    flat = grown
                if ncyc + 2 > offsets.shape[0]:
                    grown_o = np.empty(2 * offsets.shape[0], dtype=np.int64)
                    grown_o[: ncyc + 1] = offsets[: ncyc + 1]
                    offsets = grown_o
                for i in range(depth):
                    flat[used + i] = path[i]
                used += depth
                ncyc += 1
                offsets[ncyc] = used
                continue
            if w <= s or on_path[w] or depth >= max_len:
                continue
            path[depth] = w
            ptr[depth] = indptr[w]
            on_path[w] = True
            depth += 1
    return flat[:used].copy(), offsets[: ncyc + 1].copy()


@jit
def close_cycle_pair(indptr, nbrs, flat, offsets, separation):
    """Find two short cycles at vertex distance below ``separation``.

    Returns (i, j, distance) or (-1, -1, -1) when every pair is far enough apart.
    """
    n = indptr.shape[0] - 1
    ncyc = offsets.shape[0] - 1
    owner_count = np.zeros(n, dtype=np.int64)
    for c in range(ncyc):
        for k in range(offsets[c], offsets[c + 1]):
            owner_count[flat[k]] += 1
    owner_ptr = np.zeros(n + 1, dtype=np.int64)
    for v in range(n):
        owner_ptr[v + 1] = owner_ptr[v] + owner_count[v]
    fill = owner_ptr[:-1].copy()
    owners = np.empty(owner_ptr[n], dtype=np.int64)
    for c in range(ncyc):
        for k in range(offsets[c], offsets[c + 1]):
            v = flat[k]
            owners[fill[v]] = c
            fill[v] += 1
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for c in range(ncyc):
        tail = 0
        for k in range(offsets[c], offsets[c + 1]):
            v = flat[k]
            dist[v] = 0
            queue[tail] = v
            tail += 1
        head = 0
        found_j = -1
        found_d = -1
        while head < tail and found_j < 0:
            v = queue[head]
            head += 1
            for k in range(owner_ptr[v], owner_ptr[v + 1]):
                if owners[k] != c:
                    found_j = owners[k]
                    found_d = dist[v]
                    break
            if found_j >= 0:
                break
            if dist[v] + 1 >= separation:
                continue
            for k in range(indptr[v], indptr[v + 1]):
                w = nbrs[k]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue[tail] = w
                    tail += 1
        for i in range(tail):
            dist[queue[i]] = -1
        if found_j >= 0:
            return c, found_j, found_d
    return -1, -1, -1
