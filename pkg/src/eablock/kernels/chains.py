"""Markov chain loops. All randomness arrives as pre-drawn uniform arrays."""

import math

import numpy as np

from .._accel import jit
from .dp import block_fields, block_sample, sigmoid


@jit
def _pick(u, n):
    i = int(u * n)
    return n - 1 if i >= n else i


@jit
def site_update(indptr, nbrs, jcsr, beta, spins, v, u):
    h = 0.0
    for k in range(indptr[v], indptr[v + 1]):
        h += jcsr[k] * spins[nbrs[k]]
    return 1 if u < sigmoid(beta * h) else -1


@jit
def _local_agree(indptr, nbrs, jcsr, spins, v):
    e = 0.0
    for k in range(indptr[v], indptr[v + 1]):
        if spins[nbrs[k]] == spins[v]:
            e += jcsr[k]
    return e


@jit
def glauber_run(indptr, nbrs, jcsr, beta, spins, uni, stride, rec_unit, rec_energy, rec_mag, energy, mag):
    """Heat-bath updates driven by ``uni[t] = (vertex draw, spin draw)``.

    Energy (sum of couplings over agreeing edges) and the spin sum are tracked
    incrementally and recorded after every ``stride``-th step.
    """
    n = indptr.shape[0] - 1
    r = 0
    for t in range(uni.shape[0]):
        v = _pick(uni[t, 0], n)
        new = site_update(indptr, nbrs, jcsr, beta, spins, v, uni[t, 1])
        if new != spins[v]:
            before = _local_agree(indptr, nbrs, jcsr, spins, v)
            spins[v] = new
            energy += _local_agree(indptr, nbrs, jcsr, spins, v) - before
            mag += 2 * new
        if (t + 1) % stride == 0:
            rec_unit[r] = v
            rec_energy[r] = energy
            rec_mag[r] = mag
            r += 1
    return energy, mag


@jit
def glauber_batch(indptr, nbrs, jcsr, beta, spins, uni):
    """Independent replicas: ``spins[r]`` is advanced with ``uni[t, r]`` for every t."""
    n = indptr.shape[0] - 1
    for t in range(uni.shape[0]):
        for r in range(spins.shape[0]):
            v = _pick(uni[t, r, 0], n)
            spins[r, v] = site_update(indptr, nbrs, jcsr, beta, spins[r], v, uni[t, r, 1])


@jit
def glauber_coupled(indptr, nbrs, jcsr, beta, x, y, uni, weight, out_diff, out_dist):
    """Two Glauber chains sharing every draw; returns the first step index at which they agree, or -1.

    ``out_diff`` / ``out_dist`` receive the disagreement count and weighted
    distance after every step.
    """
    n = indptr.shape[0] - 1
    diff = 0
    dist = 0.0
    for v in range(n):
        if x[v] != y[v]:
            diff += 1
            dist += weight[v]
    if diff == 0:
        return 0
    for t in range(uni.shape[0]):
        v = _pick(uni[t, 0], n)
        before = x[v] != y[v]
        x[v] = site_update(indptr, nbrs, jcsr, beta, x, v, uni[t, 1])
        y[v] = site_update(indptr, nbrs, jcsr, beta, y, v, uni[t, 1])
        after = x[v] != y[v]
        if before and not after:
            diff -= 1
            dist -= weight[v]
        elif after and not before:
            diff += 1
            dist += weight[v]
        if diff == 0:
            # drop the rounding residue left by the incremental sum
            dist = 0.0
        out_diff[t] = diff
        out_dist[t] = dist
        if diff == 0:
            return t + 1
    return -1


@jit
def _apply_block(
    b, bptr, order, parent, pj, pin, pinptr, pin_pos, pin_j, ext_ptr, ext_nbr, ext_j, beta, spins, u, hp, hm, out
):
    s0 = bptr[b]
    s1 = bptr[b + 1]
    k = s1 - s0
    o = order[s0:s1]
    block_fields(o, ext_ptr, ext_nbr, ext_j, beta, spins, hp, hm)
    has_pin = pin[b] >= 0
    pp = 0.0
    pm = 0.0
    if has_pin:
        c = pin[b]
        for t in range(ext_ptr[c], ext_ptr[c + 1]):
            if spins[ext_nbr[t]] > 0:
                pp += beta * ext_j[t]
            else:
                pm += beta * ext_j[t]
    s = block_sample(
        parent[s0:s1],
        pj[s0:s1],
        pin_pos[pinptr[b] : pinptr[b + 1]],
        pin_j[pinptr[b] : pinptr[b + 1]],
        has_pin,
        beta,
        hp[:k],
        hm[:k],
        pp,
        pm,
        u,
        out,
    )
    for i in range(k):
        spins[o[i]] = out[i]
    if has_pin:
        spins[pin[b]] = s


@jit
def _block_local_energy(indptr, nbrs, jcsr, owner, spins, b, order, s0, s1, pinv):
    e = 0.0
    for i in range(s0, s1 + (1 if pinv >= 0 else 0)):
        v = order[i] if i < s1 else pinv
        for k in range(indptr[v], indptr[v + 1]):
            w = nbrs[k]
            if spins[w] == spins[v]:
                if owner[w] == b:
                    e += 0.5 * jcsr[k]
                else:
                    e += jcsr[k]
    return e


@jit
def block_run(
    indptr, nbrs, jcsr, owner,
    bptr, order, parent, pj, pin, pinptr, pin_pos, pin_j, ext_ptr, ext_nbr, ext_j,
    beta, spins, uni, stride, rec_unit, rec_energy, rec_mag, energy, mag,
):
    """Block heat-bath updates; row ``uni[t]`` = (block draw, block uniforms...)."""
    nb = bptr.shape[0] - 1
    maxk = 1
    for b in range(nb):
        if bptr[b + 1] - bptr[b] > maxk:
            maxk = bptr[b + 1] - bptr[b]
    hp = np.empty(maxk)
    hm = np.empty(maxk)
    out = np.empty(maxk, dtype=np.int8)
    r = 0
    for t in range(uni.shape[0]):
        b = _pick(uni[t, 0], nb)
        s0 = bptr[b]
        s1 = bptr[b + 1]
        before = _block_local_energy(indptr, nbrs, jcsr, owner, spins, b, order, s0, s1, pin[b])
        msum = 0
        for i in range(s0, s1):
            msum -= spins[order[i]]
        if pin[b] >= 0:
            msum -= spins[pin[b]]
        _apply_block(b, bptr, order, parent, pj, pin, pinptr, pin_pos, pin_j, ext_ptr, ext_nbr, ext_j,
                     beta, spins, uni[t, 1:], hp, hm, out[: s1 - s0])
        for i in range(s0, s1):
            msum += spins[order[i]]
        if pin[b] >= 0:
            msum += spins[pin[b]]
        energy += _block_local_energy(indptr, nbrs, jcsr, owner, spins, b, order, s0, s1, pin[b]) - before
        mag += msum
        if (t + 1) % stride == 0:
            rec_unit[r] = b
            rec_energy[r] = energy
            rec_mag[r] = mag
            r += 1
    return energy, mag


@jit
def block_batch(bptr, order, parent, pj, pin, pinptr, pin_pos, pin_j, ext_ptr, ext_nbr, ext_j, beta, spins, uni):
    nb = bptr.shape[0] - 1
    maxk = 1
    for b in range(nb):
        if bptr[b + 1] - bptr[b] > maxk:
            maxk = bptr[b + 1] - bptr[b]
    hp = np.empty(maxk)
    hm = np.empty(maxk)
    out = np.empty(maxk, dtype=np.int8)
    for t in range(uni.shape[0]):
        for r in range(spins.shape[0]):
            b = _pick(uni[t, r, 0], nb)
            _apply_block(b, bptr, order, parent, pj, pin, pinptr, pin_pos, pin_j, ext_ptr, ext_nbr, ext_j,
                         beta, spins[r], uni[t, r, 1:], hp, hm, out[: bptr[b + 1] - bptr[b]])


@jit
def block_coupled(
    bptr, order, parent, pj, pin, pinptr, pin_pos, pin_j, ext_ptr, ext_nbr, ext_j,
    beta, x, y, uni, weight, out_diff, out_dist,
):
    """Two block chains sharing every draw; returns the coalescence step or -1."""
    n = x.shape[0]
    nb = bptr.shape[0] - 1
    maxk = 1
    for b in range(nb):
        if bptr[b + 1] - bptr[b] > maxk:
            maxk = bptr[b + 1] - bptr[b]
    hp = np.empty(maxk)
    hm = np.empty(maxk)
    out = np.empty(maxk, dtype=np.int8)
    diff = 0
    dist = 0.0
    for v in range(n):
        if x[v] != y[v]:
            diff += 1
            dist += weight[v]
    if diff == 0:
        return 0
    for t in range(uni.shape[0]):
        b = _pick(uni[t, 0], nb)
        s0 = bptr[b]
        s1 = bptr[b + 1]
        for i in range(s0, s1 + (1 if pin[b] >= 0 else 0)):
            v = order[i] if i < s1 else pin[b]
            if x[v] != y[v]:
                diff -= 1
                dist -= weight[v]
        _apply_block(b, bptr, order, parent, pj, pin, pinptr, pin_pos, pin_j, ext_ptr, ext_nbr, ext_j,
                     beta, x, uni[t, 1:], hp, hm, out[: s1 - s0])
        _apply_block(b, bptr, order, parent, pj, pin, pinptr, pin_pos, pin_j, ext_ptr, ext_nbr, ext_j,
                     beta, y, uni[t, 1:], hp, hm, out[: s1 - s0])
        for i in range(s0, s1 + (1 if pin[b] >= 0 else 0)):
            v = order[i] if i < s1 else pin[b]
            if x[v] != y[v]:
                diff += 1
                dist += weight[v]
        if diff == 0:
            # drop the rounding residue left by the incremental sum
            dist = 0.0
        out_diff[t] = diff
        out_dist[t] = dist
        if diff == 0:
            return t + 1
    return -1


def glauber_batch_numpy(indptr, nbrs, jcsr, beta, spins, uni):
    """Vectorised over replicas; same draws and same arithmetic as ``glauber_batch``."""
    n = indptr.shape[0] - 1
    deg = np.diff(indptr)
    width = max(int(deg.max()) if n else 0, 1)
    pad_nbr = np.zeros((n, width), dtype=np.int64)
    pad_j = np.zeros((n, width))
    for v in range(n):
        d = deg[v]
        pad_nbr[v, :d] = nbrs[indptr[v] : indptr[v + 1]]
        pad_j[v, :d] = jcsr[indptr[v] : indptr[v + 1]]
    rows = np.arange(spins.shape[0])
    for t in range(uni.shape[0]):
        v = np.minimum((uni[t, :, 0] * n).astype(np.int64), n - 1)
        h = np.zeros(spins.shape[0])
        for c in range(width):
            h += pad_j[v, c] * spins[rows, pad_nbr[v, c]]
        x = beta * h
        with np.errstate(over="ignore"):
            q = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        spins[rows, v] = np.where(uni[t, :, 1] < q, 1, -1).astype(spins.dtype)
