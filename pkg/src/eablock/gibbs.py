"""Exact Gibbs quantities: weights, brute-force enumeration, site and block conditionals.

Spins are stored as ``int8`` arrays of +1/-1. When configurations are
enumerated, bit ``i`` of the state index is ``(spin_i + 1) / 2``.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from . import structure
from .instance import Instance
from .kernels import dp as _dp

MAX_BRUTE_FORCE_N = 20


def as_config(config, n: int) -> np.ndarray:
    s = np.asarray(config, dtype=np.int8)
    if s.shape != (n,) or not np.all(np.abs(s) == 1):
        raise ValueError(f"configuration must be {n} spins of +1/-1")
    return s


def log_weight(instance: Instance, config) -> float:
    """``beta * sum_e J_e 1{spins agree}``."""
    s = as_config(config, instance.n)
    e = instance.graph.edges
    if e.shape[0] == 0:
        return 0.0
    agree = s[e[:, 0]] == s[e[:, 1]]
    return float(instance.beta * instance.couplings[agree].sum())


def energy(instance: Instance, config) -> float:
    """Sum of couplings over agreeing edges (``log_weight / beta``)."""
    s = as_config(config, instance.n)
    e = instance.graph.edges
    if e.shape[0] == 0:
        return 0.0
    return float(instance.couplings[s[e[:, 0]] == s[e[:, 1]]].sum())


def index_to_config(index: int, n: int) -> np.ndarray:
    bits = (int(index) >> np.arange(n)) & 1
    return (2 * bits - 1).astype(np.int8)


def config_to_index(config) -> int:
    s = np.asarray(config)
    return int((((s + 1) // 2).astype(np.int64) << np.arange(s.size)).sum())


def all_log_weights(instance: Instance) -> np.ndarray:
    n = instance.n
    if n > MAX_BRUTE_FORCE_N:
        raise ValueError(f"brute force limited to n <= {MAX_BRUTE_FORCE_N}, got {n}")
    idx = np.arange(1 << n, dtype=np.int64)
    out = np.zeros(1 << n)
    for (u, v), J in zip(instance.graph.edges.tolist(), instance.couplings.tolist()):
        agree = ((idx >> u) ^ (idx >> v)) & 1 == 0
        out += instance.beta * J * agree
    return out


@dataclass(frozen=True, eq=False)
class BruteForce:
    log_z: float
    log_weights: np.ndarray
    probs: np.ndarray


def brute_force(instance: Instance) -> BruteForce:
    lw = all_log_weights(instance)
    log_z = float(logsumexp(lw))
    return BruteForce(log_z, lw, np.exp(lw - log_z))


def site_field(instance: Instance, v: int, config) -> float:
    """``beta * sum_u J_uv spin_u``: log-odds of spin +1 at ``v`` given the rest."""
    g = instance.graph
    nb = g.neighbors(v)
    J = instance.couplings[g.incident_edges(v)]
    return float(instance.beta * np.dot(J, np.asarray(config)[nb]))


def site_conditional(instance: Instance, v: int, config) -> float:
    s = as_config(config, instance.n)
    return float(expit(site_field(instance, v, s)))


@dataclass(frozen=True, eq=False)
class BlockPlan:
    """Parents-first layout of a block for the sum-product kernels."""

    members: tuple[int, ...]
    order: np.ndarray
    parent: np.ndarray
    pj: np.ndarray
    pin: int
    pin_pos: np.ndarray
    pin_j: np.ndarray
    ext_ptr: np.ndarray
    ext_nbr: np.ndarray
    ext_j: np.ndarray

    @property
    def has_pin(self) -> bool:
        return self.pin >= 0

    @property
    def n_uniforms(self) -> int:
        return len(self.order) + int(self.has_pin)

    def local_vertices(self) -> np.ndarray:
        """Global ids in the order the ext arrays use: the forest order, then the pin."""
        if self.has_pin:
            return np.append(self.order, self.pin)
        return self.order


def plan_block(instance: Instance, members, root=None, pin: int | None = None) -> BlockPlan:
    """Lay out a tree or unicyclic block for exact computations.

    ``root`` is a vertex or a list of vertices; each forest component is rooted
    at the first listed vertex it contains, otherwise at its lowest id.
    Children are visited in increasing id (depth first).
    A unicyclic block pins its lowest-id cycle vertex unless ``pin`` is given.
    """
    g = instance.graph
    members = tuple(sorted(set(int(v) for v in members)))
    inside = set(members)
    rank = structure.cycle_rank(g, members)
    if rank > 1:
        raise ValueError(f"block has {rank} independent cycles; only trees and unicyclic blocks are supported")
    pin_v = -1
    if rank == 1:
        cyc = structure.cycle_vertices(g, members)
        pin_v = min(cyc) if pin is None else int(pin)
        if pin_v not in cyc:
            raise ValueError(f"pinned vertex {pin_v} is not on the cycle")
    elif pin is not None:
        raise ValueError("only a block with a cycle can pin a vertex")
    forest = [v for v in members if v != pin_v]
    fset = set(forest)
    pos: dict[int, int] = {}
    order: list[int] = []
    parent: list[int] = []
    pj: list[float] = []
    J = instance.couplings

    def visit(r):
        stack = [(r, -1, 0.0)]
        while stack:
            v, p, c = stack.pop()
            pos[v] = len(order)
            order.append(v)
            parent.append(pos[p] if p >= 0 else -1)
            pj.append(c)
            kids = [
                (w, float(J[e]))
                for w, e in zip(g.neighbors(v).tolist(), g.incident_edges(v).tolist())
                if w in fset and w not in pos and w != p
            ]
            for w, c2 in sorted(kids, reverse=True):
                stack.append((w, v, c2))

    if root is None:
        roots = []
    elif np.ndim(root) == 0:
        roots = [int(root)]
    else:
        roots = [int(r) for r in root]
    starts = [r for r in roots if r in fset] + forest
    for r in starts:
        if r not in pos:
            visit(r)
    if len(order) != len(forest):
        raise ValueError("block forest traversal did not cover every vertex")
    pin_pos, pin_j = [], []
    if pin_v >= 0:
        for w, e in zip(g.neighbors(pin_v).tolist(), g.incident_edges(pin_v).tolist()):
            if w in fset:
                pin_pos.append(pos[w])
                pin_j.append(float(J[e]))
    local = order + ([pin_v] if pin_v >= 0 else [])
    ext_ptr = [0]
    ext_nbr: list[int] = []
    ext_j: list[float] = []
    for v in local:
        for w, e in zip(g.neighbors(v).tolist(), g.incident_edges(v).tolist()):
            if w not in inside:
                ext_nbr.append(w)
                ext_j.append(float(J[e]))
        ext_ptr.append(len(ext_nbr))
    return BlockPlan(
        members=members,
        order=np.asarray(order, dtype=np.int64),
        parent=np.asarray(parent, dtype=np.int64),
        pj=np.asarray(pj, dtype=np.float64),
        pin=pin_v,
        pin_pos=np.asarray(pin_pos, dtype=np.int64),
        pin_j=np.asarray(pin_j, dtype=np.float64),
        ext_ptr=np.asarray(ext_ptr, dtype=np.int64),
        ext_nbr=np.asarray(ext_nbr, dtype=np.int64),
        ext_j=np.asarray(ext_j, dtype=np.float64),
    )


def boundary_spins(instance: Instance, plan: BlockPlan, boundary) -> np.ndarray:
    """Spins of the plan's external neighbours, from a full configuration or a mapping."""
    if isinstance(boundary, Mapping):
        try:
            vals = [boundary[int(x)] for x in plan.ext_nbr]
        except KeyError as exc:
            raise ValueError(f"boundary condition misses vertex {exc.args[0]}") from None
        s = np.asarray(vals, dtype=np.int8).reshape(-1)
    else:
        full = np.asarray(boundary)
        if full.shape != (instance.n,):
            raise ValueError("boundary must be a mapping or a full configuration")
        s = full[plan.ext_nbr].astype(np.int8)
    if not np.all(np.abs(s) == 1):
        raise ValueError("boundary spins must be +1/-1")
    return s


def plan_fields(instance: Instance, plan: BlockPlan, boundary):
    """Log-fields ``(hp, hm)`` over ``plan.local_vertices()`` from the boundary spins."""
    s = boundary_spins(instance, plan, boundary)
    contrib = instance.beta * plan.ext_j
    plus = np.where(s > 0, contrib, 0.0)
    minus = np.where(s < 0, contrib, 0.0)
    k = len(plan.ext_ptr) - 1
    seg = np.repeat(np.arange(k), np.diff(plan.ext_ptr))
    hp = np.bincount(seg, weights=plus, minlength=k)
    hm = np.bincount(seg, weights=minus, minlength=k)
    return hp, hm


def _split(plan: BlockPlan, hp, hm):
    k = len(plan.order)
    if plan.has_pin:
        return hp[:k], hm[:k], float(hp[k]), float(hm[k])
    return hp, hm, 0.0, 0.0


def block_log_partition(instance: Instance, block, boundary, plan: BlockPlan | None = None) -> float:
    """Log of the block's conditional partition function given the boundary."""
    plan = plan or plan_block(instance, block)
    hp, hm, pp, pm = _split(plan, *plan_fields(instance, plan, boundary))
    return float(
        _dp.block_logz(plan.parent, plan.pj, plan.pin_pos, plan.pin_j, plan.has_pin, instance.beta, hp, hm, pp, pm)
    )


def block_marginals(instance: Instance, block, boundary, plan: BlockPlan | None = None) -> dict[int, float]:
    """``P(spin_v = +1)`` for every block vertex under the exact block conditional."""
    plan = plan or plan_block(instance, block)
    hp, hm, pp, pm = _split(plan, *plan_fields(instance, plan, boundary))
    prob = np.empty(len(plan.order))
    w = _dp.block_marginals(
        plan.parent, plan.pj, plan.pin_pos, plan.pin_j, plan.has_pin, instance.beta, hp, hm, pp, pm, prob
    )
    out = {int(v): float(p) for v, p in zip(plan.order, prob)}
    if plan.has_pin:
        out[plan.pin] = float(w)
    return dict(sorted(out.items()))


def block_marginal(instance: Instance, block, boundary, v: int) -> float:
    m = block_marginals(instance, block, boundary)
    if int(v) not in m:
        raise ValueError(f"vertex {v} is not in the block")
    return m[int(v)]


def sample_block_uniforms(instance: Instance, plan: BlockPlan, boundary, u: np.ndarray) -> dict[int, int]:
    hp, hm, pp, pm = _split(plan, *plan_fields(instance, plan, boundary))
    out = np.empty(len(plan.order), dtype=np.int8)
    s = _dp.block_sample(
        plan.parent, plan.pj, plan.pin_pos, plan.pin_j, plan.has_pin, instance.beta, hp, hm, pp, pm, u, out
    )
    res = {int(v): int(x) for v, x in zip(plan.order, out)}
    if plan.has_pin:
        res[plan.pin] = int(s)
    return dict(sorted(res.items()))


def sample_block(instance: Instance, block, boundary, rng: np.random.Generator, plan: BlockPlan | None = None) -> dict[int, int]:
    """One exact draw of the block's spins given the boundary (top-down ancestral sampling)."""
    plan = plan or plan_block(instance, block)
    return sample_block_uniforms(instance, plan, boundary, rng.random(plan.n_uniforms))


def block_config_log_probs(instance: Instance, block, boundary, plan: BlockPlan | None = None) -> tuple[list[int], np.ndarray]:
    """Log-probabilities of all ``2^k`` block configurations (bit i = member i), via the sum-product partition."""
    plan = plan or plan_block(instance, block)
    members = list(plan.members)
    k = len(members)
    if k > MAX_BRUTE_FORCE_N:
        raise ValueError("block too large to enumerate")
    local = {v: i for i, v in enumerate(members)}
    idx = np.arange(1 << k, dtype=np.int64)
    bits = lambda v: (idx >> local[v]) & 1  # noqa: E731
    hp, hm = plan_fields(instance, plan, boundary)
    lw = np.zeros(1 << k)
    for i, v in enumerate(plan.local_vertices().tolist()):
        b = bits(v)
        lw += np.where(b == 1, hp[i], hm[i])
    for e in structure.induced_edge_ids(instance.graph, members).tolist():
        u, v = instance.graph.edges[e]
        lw += instance.beta * instance.couplings[e] * (bits(int(u)) == bits(int(v)))
    return members, lw - block_log_partition(instance, members, boundary, plan)
