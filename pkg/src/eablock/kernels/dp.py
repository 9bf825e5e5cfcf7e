"""Exact sum-product on a forest whose vertices are listed parents-first.

A block is described by local arrays: ``parent[i]`` (local index, -1 for a
root) and ``pj[i]`` (coupling to the parent). External influence enters as
per-vertex log-fields ``hp[i]`` / ``hm[i]`` for spin +1 / -1. A unicyclic
block is handled by pinning one cycle vertex; its forest neighbours are listed
in ``pin_pos`` with couplings ``pin_j``.
"""

import math

import numpy as np

from .._accel import jit


@jit
def lse2(a, b):
    if a >= b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@jit
def sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@jit
def upward(parent, pj, beta, hp, hm, mp, mm):
    """Fill subtree log-partition messages; return the forest's log-partition."""
    k = parent.shape[0]
    for i in range(k):
        mp[i] = hp[i]
        mm[i] = hm[i]
    logz = 0.0
    for i in range(k - 1, -1, -1):
        p = parent[i]
        if p < 0:
            logz += lse2(mp[i], mm[i])
        else:
            bj = beta * pj[i]
            mp[p] += lse2(bj + mp[i], mm[i])
            mm[p] += lse2(mp[i], bj + mm[i])
    return logz


@jit
def child_prob_plus(mp_i, mm_i, bj, parent_spin):
    if parent_spin > 0:
        return sigmoid(mp_i + bj - mm_i)
    return sigmoid(mp_i - mm_i - bj)


@jit
def sample_down(parent, pj, beta, mp, mm, u, out):
    k = parent.shape[0]
    for i in range(k):
        p = parent[i]
        if p < 0:
            q = sigmoid(mp[i] - mm[i])
        else:
            q = child_prob_plus(mp[i], mm[i], beta * pj[i], out[p])
        out[i] = 1 if u[i] < q else -1


@jit
def marginals_down(parent, pj, beta, mp, mm, prob):
    k = parent.shape[0]
    op = np.zeros(k)
    om = np.zeros(k)
    for i in range(k):
        p = parent[i]
        if p >= 0:
            bj = beta * pj[i]
            rest_p = mp[p] + op[p] - lse2(bj + mp[i], mm[i])
            rest_m = mm[p] + om[p] - lse2(mp[i], bj + mm[i])
            op[i] = lse2(bj + rest_p, rest_m)
            om[i] = lse2(rest_p, bj + rest_m)
        prob[i] = sigmoid(mp[i] + op[i] - mm[i] - om[i])


@jit
def _pinned_fields(hp, hm, pin_pos, pin_j, beta, s, fp, fm):
    for i in range(hp.shape[0]):
        fp[i] = hp[i]
        fm[i] = hm[i]
    for t in range(pin_pos.shape[0]):
        if s > 0:
            fp[pin_pos[t]] += beta * pin_j[t]
        else:
            fm[pin_pos[t]] += beta * pin_j[t]


@jit
def block_logz(parent, pj, pin_pos, pin_j, has_pin, beta, hp, hm, hpin_p, hpin_m):
    k = parent.shape[0]
    mp = np.empty(k)
    mm = np.empty(k)
    if not has_pin:
        return upward(parent, pj, beta, hp, hm, mp, mm)
    fp = np.empty(k)
    fm = np.empty(k)
    _pinned_fields(hp, hm, pin_pos, pin_j, beta, 1, fp, fm)
    zp = hpin_p + upward(parent, pj, beta, fp, fm, mp, mm)
    _pinned_fields(hp, hm, pin_pos, pin_j, beta, -1, fp, fm)
    zm = hpin_m + upward(parent, pj, beta, fp, fm, mp, mm)
    return lse2(zp, zm)


@jit
def block_sample(parent, pj, pin_pos, pin_j, has_pin, beta, hp, hm, hpin_p, hpin_m, u, out):
    """Draw the block's spins into ``out``; return the pinned vertex's spin (0 if none).

    Consumes ``k + has_pin`` uniforms: the pinned vertex first, then the forest
    in parents-first order.
    """
    k = parent.shape[0]
    mp = np.empty(k)
    mm = np.empty(k)
    if not has_pin:
        upward(parent, pj, beta, hp, hm, mp, mm)
        sample_down(parent, pj, beta, mp, mm, u, out)
        return 0
    fp = np.empty(k)
    fm = np.empty(k)
    _pinned_fields(hp, hm, pin_pos, pin_j, beta, 1, fp, fm)
    zp = hpin_p + upward(parent, pj, beta, fp, fm, mp, mm)
    _pinned_fields(hp, hm, pin_pos, pin_j, beta, -1, fp, fm)
    zm = hpin_m + upward(parent, pj, beta, fp, fm, mp, mm)
    s = 1 if u[0] < sigmoid(zp - zm) else -1
    _pinned_fields(hp, hm, pin_pos, pin_j, beta, s, fp, fm)
    upward(parent, pj, beta, fp, fm, mp, mm)
    sample_down(parent, pj, beta, mp, mm, u[1:], out)
    return s


@jit
def block_marginals(parent, pj, pin_pos, pin_j, has_pin, beta, hp, hm, hpin_p, hpin_m, prob):
    """P(spin = +1) for every forest vertex; returns the pinned vertex's probability (or -1)."""
    k = parent.shape[0]
    mp = np.empty(k)
    mm = np.empty(k)
    if not has_pin:
        upward(parent, pj, beta, hp, hm, mp, mm)
        marginals_down(parent, pj, beta, mp, mm, prob)
        return -1.0
    fp = np.empty(k)
    fm = np.empty(k)
    tmp = np.empty(k)
    _pinned_fields(hp, hm, pin_pos, pin_j, beta, 1, fp, fm)
    zp = hpin_p + upward(parent, pj, beta, fp, fm, mp, mm)
    marginals_down(parent, pj, beta, mp, mm, prob)
    _pinned_fields(hp, hm, pin_pos, pin_j, beta, -1, fp, fm)
    zm = hpin_m + upward(parent, pj, beta, fp, fm, mp, mm)
    marginals_down(parent, pj, beta, mp, mm, tmp)
    w = sigmoid(zp - zm)
    for i in range(k):
        prob[i] = w * prob[i] + (1.0 - w) * tmp[i]
    return w


@jit
def block_fields(order, ext_ptr, ext_nbr, ext_j, beta, spins, hp, hm):
    """Boundary log-fields for the block vertices ``order`` from the current configuration."""
    for i in range(order.shape[0]):
        v = order[i]
        a = 0.0
        b = 0.0
        for t in range(ext_ptr[v], ext_ptr[v + 1]):
            if spins[ext_nbr[t]] > 0:
                a += ext_j[t]
            else:
                b += ext_j[t]
        hp[i] = beta * a
        hm[i] = beta * b
