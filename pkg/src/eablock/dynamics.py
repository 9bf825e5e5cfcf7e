"""Glauber and block dynamics, their couplings, and the experiments built on them."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gibbs, structure
from ._accel import JIT_ENABLED
from .influence import aggregate_influence
from .instance import Instance
from .kernels import chains as _ck
from .kernels import dp as _dp
from .partition import BlockPartition
from .streams import generator

CHUNK_STEPS = 1 << 16


@dataclass(frozen=True, eq=False)
class BlockTable:
    """All block layouts of a partition packed into flat arrays for the chain kernels."""

    bptr: np.ndarray
    order: np.ndarray
    parent: np.ndarray
    pj: np.ndarray
    pin: np.ndarray
    pinptr: np.ndarray
    pin_pos: np.ndarray
    pin_j: np.ndarray
    ext_ptr: np.ndarray
    ext_nbr: np.ndarray
    ext_j: np.ndarray
    owner: np.ndarray
    width: int
    plans: list = field(repr=False)

    def kernel_args(self):
        return (self.bptr, self.order, self.parent, self.pj, self.pin, self.pinptr, self.pin_pos, self.pin_j,
                self.ext_ptr, self.ext_nbr, self.ext_j)


def block_table(instance: Instance, partition: BlockPartition) -> BlockTable:
    key = ("table", id(instance))
    cached = partition._cache.get(key)
    if cached is not None and cached[0] is instance:
        return cached[1]
    g = instance.graph
    owner = np.asarray(partition.vertex_to_block, dtype=np.int64)
    plans = []
    orders, parents, pjs, pins, pin_pos, pin_j = [], [], [], [], [], []
    bptr, pinptr = [0], [0]
    for b in partition.blocks:
        if len(b.members) == 1:
            v = b.members[0]
            plan = gibbs.BlockPlan(
                members=b.members, order=np.array([v]), parent=np.array([-1]), pj=np.zeros(1), pin=-1,
                pin_pos=np.zeros(0, dtype=np.int64), pin_j=np.zeros(0),
                ext_ptr=np.zeros(0, dtype=np.int64), ext_nbr=np.zeros(0, dtype=np.int64), ext_j=np.zeros(0),
            )
        else:
            plan = gibbs.plan_block(instance, b.members)
        plans.append(plan)
        orders.append(plan.order)
        parents.append(plan.parent)
        pjs.append(plan.pj)
        pins.append(plan.pin)
        pin_pos.append(plan.pin_pos)
        pin_j.append(plan.pin_j)
        bptr.append(bptr[-1] + len(plan.order))
        pinptr.append(pinptr[-1] + len(plan.pin_pos))
    src = np.repeat(np.arange(g.n), np.diff(g.indptr))
    cross = owner[g.nbrs] != owner[src]
    ext_ptr = np.zeros(g.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src[cross], minlength=g.n), out=ext_ptr[1:])
    width = 1 + max(p.n_uniforms for p in plans)
    table = BlockTable(
        bptr=np.asarray(bptr, dtype=np.int64),
        order=np.concatenate(orders).astype(np.int64),
        parent=np.concatenate(parents).astype(np.int64),
        pj=np.concatenate(pjs).astype(np.float64),
        pin=np.asarray(pins, dtype=np.int64),
        pinptr=np.asarray(pinptr, dtype=np.int64),
        pin_pos=np.concatenate(pin_pos).astype(np.int64),
        pin_j=np.concatenate(pin_j).astype(np.float64),
        ext_ptr=ext_ptr,
        ext_nbr=np.ascontiguousarray(g.nbrs[cross]),
        ext_j=np.ascontiguousarray(instance.coupling_csr()[cross]),
        owner=owner,
        width=width,
        plans=plans,
    )
    partition._cache[key] = (instance, table)
    return table


@dataclass
class ChainState:
    config: np.ndarray
    step: int
    rng: np.random.Generator

    @classmethod
    def start(cls, config, seed: int, stream_index: int = 0) -> "ChainState":
        return cls(np.array(config, dtype=np.int8), 0, generator(seed, "chain", stream_index))


def glauber_step(instance: Instance, state: ChainState) -> ChainState:
    """One heat-bath update at a uniform vertex. Draws exactly two uniforms."""
    g = instance.graph
    u = state.rng.random(2)
    cfg = state.config.copy()
    v = min(int(u[0] * g.n), g.n - 1)
    cfg[v] = _ck.site_update(g.indptr, g.nbrs, instance.coupling_csr(), instance.beta, cfg, v, u[1])
    return ChainState(cfg, state.step + 1, state.rng)


def block_step(instance: Instance, partition: BlockPartition, state: ChainState) -> ChainState:
    """Resample a uniform block from its exact conditional. Draws ``table.width`` uniforms."""
    t = block_table(instance, partition)
    u = state.rng.random(t.width)
    cfg = state.config.copy()
    b = min(int(u[0] * len(partition)), len(partition) - 1)
    k = t.bptr[b + 1] - t.bptr[b]
    _ck._apply_block(b, *t.kernel_args(), instance.beta, cfg, u[1:], np.empty(k), np.empty(k),
                     np.empty(k, dtype=np.int8))
    return ChainState(cfg, state.step + 1, state.rng)


@dataclass
class Trace:
    step: np.ndarray
    updated_unit: np.ndarray
    energy: np.ndarray
    magnetization: np.ndarray
    distance: np.ndarray | None = None
    disagreements: np.ndarray | None = None

    COLUMNS = ("step", "updated_unit", "energy", "magnetization", "distance", "disagreements")

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for i in range(len(self.step)):
                w.writerow([
                    int(self.step[i]),
                    int(self.updated_unit[i]),
                    repr(float(self.energy[i])),
                    repr(float(self.magnetization[i])),
                    "" if self.distance is None else repr(float(self.distance[i])),
                    "" if self.disagreements is None else int(self.disagreements[i]),
                ])
        return path


@dataclass
class ChainRun:
    final: np.ndarray
    steps: int
    trace: Trace


def run_chain(
    instance: Instance,
    init,
    steps: int,
    seed: int,
    partition: BlockPartition | None = None,
    stride: int = 1,
    stream_index: int = 0,
) -> ChainRun:
    """Run Glauber (no partition) or block dynamics for ``steps`` updates.

    Draws are identical to calling ``glauber_step`` / ``block_step`` repeatedly
    on ``ChainState.start(init, seed, stream_index)``. Observables are recorded
    after every ``stride``-th step; magnetization is the mean spin.
    """
    if stride < 1:
        raise ValueError("stride must be positive")
    g = instance.graph
    spins = gibbs.as_config(init, g.n).copy()
    rng = generator(seed, "chain", stream_index)
    jcsr = instance.coupling_csr()
    table = block_table(instance, partition) if partition is not None else None
    width = 2 if table is None else table.width
    nrec = steps // stride
    rec_unit = np.zeros(nrec, dtype=np.int64)
    rec_energy = np.zeros(nrec)
    rec_mag = np.zeros(nrec)
    energy = gibbs.energy(instance, spins)
    mag = int(spins.sum())
    done = 0
    r = 0
    chunk = max(stride, (CHUNK_STEPS // stride) * stride)
    while done < steps:
        k = min(chunk, steps - done)
        uni = rng.random((k, width))
        kr = k // stride
        if table is None:
            energy, mag = _ck.glauber_run(g.indptr, g.nbrs, jcsr, instance.beta, spins, uni, stride,
                                          rec_unit[r:r + kr], rec_energy[r:r + kr], rec_mag[r:r + kr], energy, mag)
        else:
            energy, mag = _ck.block_run(g.indptr, g.nbrs, jcsr, table.owner, *table.kernel_args(), instance.beta,
                                        spins, uni, stride, rec_unit[r:r + kr], rec_energy[r:r + kr],
                                        rec_mag[r:r + kr], energy, mag)
        done += k
        r += kr
    step_ids = stride * np.arange(1, nrec + 1)
    return ChainRun(spins, steps, Trace(step_ids, rec_unit, rec_energy, rec_mag / g.n))


def distance_weights(instance: Instance, partition: BlockPartition) -> np.ndarray:
    """Per-vertex weight of a disagreement: 1 inside, ``n^4 * A_out`` for vertices with outside influence."""
    out = aggregate_influence(instance, partition).outside
    n = instance.n
    return np.where(out > 0, float(n) ** 4 * out, 1.0)


def block_distance(instance: Instance, partition: BlockPartition, x, y, weights: np.ndarray | None = None) -> float:
    x = gibbs.as_config(x, instance.n)
    y = gibbs.as_config(y, instance.n)
    if weights is None:
        weights = distance_weights(instance, partition)
    return float(weights[x != y].sum())


# --- coupled block updates -------------------------------------------------


def _fields_from(instance: Instance, plan: gibbs.BlockPlan, config):
    hp, hm = gibbs.plan_fields(instance, plan, config)
    return gibbs._split(plan, hp, hm)


def _messages(instance, plan, hp, hm):
    k = len(plan.order)
    mp = np.empty(k)
    mm = np.empty(k)
    _dp.upward(plan.parent, plan.pj, instance.beta, hp, hm, mp, mm)
    return mp, mm


def _cond_plus(plan, beta, mp, mm, i, spins_local):
    p = plan.parent[i]
    if p < 0:
        return _dp.sigmoid(mp[i] - mm[i])
    return _dp.child_prob_plus(mp[i], mm[i], beta * plan.pj[i], spins_local[p])


def coupled_forest_sample(instance, plan, fields_x, fields_y, rng):
    """Sample a forest under two field sets with one shared uniform per vertex (parents first)."""
    beta = instance.beta
    mx = _messages(instance, plan, *fields_x)
    my = _messages(instance, plan, *fields_y)
    k = len(plan.order)
    sx = np.empty(k, dtype=np.int8)
    sy = np.empty(k, dtype=np.int8)
    u = rng.random(k)
    for i in range(k):
        sx[i] = 1 if u[i] < _cond_plus(plan, beta, *mx, i, sx) else -1
        sy[i] = 1 if u[i] < _cond_plus(plan, beta, *my, i, sy) else -1
    return sx, sy


def conditional_partner_sample(instance, plan, fields_given, given_local, fields_other, rng):
    """Draw the partner of ``given_local`` under the vertex-by-vertex monotone coupling.

    At each vertex the shared uniform is resampled from its conditional law
    given the observed spin, then compared with the partner's probability.
    """
    beta = instance.beta
    mg = _messages(instance, plan, *fields_given)
    mo = _messages(instance, plan, *fields_other)
    k = len(plan.order)
    out = np.empty(k, dtype=np.int8)
    v = rng.random(k)
    for i in range(k):
        qg = _cond_plus(plan, beta, *mg, i, given_local)
        qo = _cond_plus(plan, beta, *mo, i, out)
        u = v[i] * qg if given_local[i] > 0 else qg + v[i] * (1.0 - qg)
        out[i] = 1 if u < qo else -1
    return out


def _outside_fields(instance, plan, config, block_set):
    """Forest log-fields that count only neighbours outside ``block_set``."""
    keep = np.array([int(v) not in block_set for v in plan.ext_nbr], dtype=bool)
    s = np.asarray(config)[plan.ext_nbr]
    contrib = instance.beta * plan.ext_j * keep
    k = len(plan.ext_ptr) - 1
    seg = np.repeat(np.arange(k), np.diff(plan.ext_ptr))
    hp = np.bincount(seg, weights=np.where(s > 0, contrib, 0.0), minlength=k)
    hm = np.bincount(seg, weights=np.where(s < 0, contrib, 0.0), minlength=k)
    n = len(plan.order)
    return hp[:n], hm[:n]


def _write_local(cfg, plan, local):
    cfg[plan.order] = local


def _tree_coupled_update(instance, members, z, x, y, rng):
    plan = gibbs.plan_block(instance, members, root=z)
    sx, sy = coupled_forest_sample(instance, plan, _fields_from(instance, plan, x)[:2],
                                   _fields_from(instance, plan, y)[:2], rng)
    _write_local(x, plan, sx)
    _write_local(y, plan, sy)


def _unicyclic_coupled_update(instance, members, z, x, y, rng):
    """Couple the two block conditionals through an auxiliary split of the cycle.

    The part of the block hanging off the cycle towards ``z`` is coupled first,
    down to the cycle vertex ``w``. If the copies disagree at ``w``, the rest of
    the block is coupled in two legs through an intermediate boundary in which
    only the edge from ``w`` to one cycle neighbour sees the second copy's spin,
    and the legs are composed by conditional sampling on the intermediate draw.
    """
    g = instance.graph
    cyc = set(structure.cycle_vertices(g, members))
    inside = set(members)
    if z in cyc:
        w = z
        near = [z]
    else:
        near, seen = [z], {z}
        i = 0
        while i < len(near):
            for nb in g.neighbors(near[i]).tolist():
                if nb in inside and nb not in seen and nb not in cyc:
                    seen.add(nb)
                    near.append(nb)
            i += 1
        attach = sorted({nb for v in near for nb in g.neighbors(v).tolist() if nb in cyc})
        w = attach[0]
        near = near + [w]
    rest = [v for v in members if v not in set(near)]
    jw = {nb: float(instance.couplings[e]) for nb, e in zip(g.neighbors(w).tolist(), g.incident_edges(w).tolist())}

    def lam_logz(cfg, s):
        c = cfg.copy()
        c[w] = s
        return gibbs.block_log_partition(instance, rest, c) if rest else 0.0

    head = gibbs.plan_block(instance, near, root=z)
    wpos = int(np.flatnonzero(head.order == w)[0])
    fx = list(_outside_fields(instance, head, x, inside))
    fy = list(_outside_fields(instance, head, y, inside))
    for f, cfg in ((fx, x), (fy, y)):
        if rest:
            f[0][wpos] += lam_logz(cfg, 1)
            f[1][wpos] += lam_logz(cfg, -1)
    sx, sy = coupled_forest_sample(instance, head, tuple(fx), tuple(fy), rng)
    _write_local(x, head, sx)
    _write_local(y, head, sy)
    if not rest:
        return
    if x[w] == y[w]:
        plan = gibbs.plan_block(instance, rest)
        a, b = coupled_forest_sample(instance, plan, _fields_from(instance, plan, x)[:2],
                                     _fields_from(instance, plan, y)[:2], rng)
        _write_local(x, plan, a)
        _write_local(y, plan, b)
        return
    cyc_nbrs = sorted(nb for nb in g.neighbors(w).tolist() if nb in cyc)
    x1, xk = cyc_nbrs[0], cyc_nbrs[-1]
    w_nbrs_rest = sorted(nb for nb in g.neighbors(w).tolist() if nb in set(rest))

    def fields(plan, cfg_main, split_spin):
        # split_spin: the spin seen by x1 across the auxiliary vertex
        hp, hm = _fields_from(instance, plan, cfg_main)[:2]
        hp, hm = hp.copy(), hm.copy()
        i = int(np.flatnonzero(plan.order == x1)[0])
        bj = instance.beta * jw[x1]
        if cfg_main[w] > 0:
            hp[i] -= bj
        else:
            hm[i] -= bj
        if split_spin > 0:
            hp[i] += bj
        else:
            hm[i] += bj
        return hp, hm

    leg1 = gibbs.plan_block(instance, rest, root=[x1])
    leg2 = gibbs.plan_block(instance, rest, root=[xk] + w_nbrs_rest)
    fa1 = fields(leg1, x, x[w])
    fb1 = fields(leg1, x, y[w])
    fb2 = fields(leg2, x, y[w])
    fc2 = fields(leg2, y, y[w])
    mid = coupled_forest_sample(instance, leg1, fb1, fb1, rng)[0]
    a = conditional_partner_sample(instance, leg1, fb1, mid, fa1, rng)
    pos1 = {int(v): i for i, v in enumerate(leg1.order)}
    mid2 = np.array([mid[pos1[int(v)]] for v in leg2.order], dtype=np.int8)
    c = conditional_partner_sample(instance, leg2, fb2, mid2, fc2, rng)
    _write_local(x, leg1, a)
    _write_local(y, leg2, c)


@dataclass
class CouplingTrial:
    x: np.ndarray
    y: np.ndarray
    delta: float
    block: int


def path_coupling_trial(
    instance: Instance,
    partition: BlockPartition,
    u_star: int,
    base,
    rng: np.random.Generator,
    block: int | None = None,
    weights: np.ndarray | None = None,
) -> CouplingTrial:
    """One coupled block update of two configurations that differ only at ``u_star``.

    ``delta`` is the change in the weighted disagreement distance.
    """
    x = gibbs.as_config(base, instance.n).copy()
    y = x.copy()
    y[u_star] = -y[u_star]
    if weights is None:
        weights = distance_weights(instance, partition)
    if block is None:
        block = min(int(rng.random() * len(partition)), len(partition) - 1)
    B = partition.blocks[block]
    members = list(B.members)
    inside = set(members)
    if u_star in inside:
        plan = gibbs.plan_block(instance, members)
        new = gibbs.sample_block(instance, members, x, rng, plan)
        for v, s in new.items():
            x[v] = s
            y[v] = s
        return CouplingTrial(x, y, -float(weights[u_star]), block)
    touching = sorted(nb for nb in instance.graph.neighbors(u_star).tolist() if nb in inside)
    if not touching:
        plan = gibbs.plan_block(instance, members)
        new = gibbs.sample_block(instance, members, x, rng, plan)
        for v, s in new.items():
            x[v] = s
            y[v] = s
        return CouplingTrial(x, y, 0.0, block)
    z = touching[0]
    if structure.cycle_rank(instance.graph, members) == 1:
        _unicyclic_coupled_update(instance, members, z, x, y, rng)
    else:
        _tree_coupled_update(instance, members, z, x, y, rng)
    idx = np.asarray(members)
    delta = float(weights[idx][x[idx] != y[idx]].sum())
    return CouplingTrial(x, y, delta, block)


@dataclass
class ContractionResult:
    mean: float
    stderr: float
    z_score: float
    trials: int
    deltas: np.ndarray
    partition_kind: str = ""


def contraction_experiment(
    instance: Instance, partition: BlockPartition, trials: int, seed: int, partition_kind: str = ""
) -> ContractionResult:
    """Mean one-step change of the weighted distance from a single external disagreement.

    Each trial draws ``u_star`` uniformly from vertices with outside influence
    and a uniform base configuration. The uniform block choice is averaged
    exactly: blocks away from ``u_star`` contribute zero, the block holding it
    contributes minus its weight, and every block touching it contributes one
    coupled draw.
    """
    weights = distance_weights(instance, partition)
    out = aggregate_influence(instance, partition).outside
    external = np.flatnonzero(out > 0)
    if external.size == 0:
        raise ValueError("no vertex has influence from outside its block")
    rng = generator(seed, "contraction")
    N = len(partition)
    deltas = np.empty(trials)
    g = instance.graph
    for t in range(trials):
        u = int(external[rng.integers(external.size)])
        base = rng.choice(np.array([-1, 1], dtype=np.int8), size=g.n)
        total = -float(weights[u])
        for b in sorted({partition.block_of(nb) for nb in g.neighbors(u).tolist()} - {partition.block_of(u)}):
            total += path_coupling_trial(instance, partition, u, base, rng, block=b, weights=weights).delta
        deltas[t] = total / N
    mean = float(deltas.mean())
    se = float(deltas.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    z = mean / se if se > 0 else (-math.inf if mean < 0 else math.inf)
    return ContractionResult(mean, se, z, trials, deltas, partition_kind)


@dataclass
class CoalescenceResult:
    times: list[int | None]
    max_steps: int

    @property
    def fraction(self) -> float:
        return sum(t is not None for t in self.times) / len(self.times)


def coalescence_experiment(
    instance: Instance,
    runs: int,
    max_steps: int,
    seed: int,
    partition: BlockPartition | None = None,
    record: bool = False,
):
    """Chains from all-plus and all-minus sharing every draw; time until they agree.

    Returns a ``CoalescenceResult``; with ``record=True`` also the per-step
    disagreement and distance traces of each run.
    """
    g = instance.graph
    jcsr = instance.coupling_csr()
    part = partition if partition is not None else BlockPartition.singletons(g)
    weights = distance_weights(instance, part)
    table = block_table(instance, partition) if partition is not None else None
    width = 2 if table is None else table.width
    times: list[int | None] = []
    traces = []
    for r in range(runs):
        rng = generator(seed, "coalescence", r)
        x = np.ones(g.n, dtype=np.int8)
        y = -x
        done = 0
        hit = None
        diffs, dists = [], []
        while done < max_steps and hit is None:
            k = min(CHUNK_STEPS, max_steps - done)
            uni = rng.random((k, width))
            od = np.zeros(k, dtype=np.int64)
            ods = np.zeros(k)
            if table is None:
                t = _ck.glauber_coupled(g.indptr, g.nbrs, jcsr, instance.beta, x, y, uni, weights, od, ods)
            else:
                t = _ck.block_coupled(*table.kernel_args(), instance.beta, x, y, uni, weights, od, ods)
            if record:
                used = k if t < 0 else t
                diffs.append(od[:used])
                dists.append(ods[:used])
            if t >= 0:
                hit = done + t
            done += k
        times.append(hit)
        if record:
            traces.append((np.concatenate(diffs) if diffs else np.zeros(0, dtype=np.int64),
                           np.concatenate(dists) if dists else np.zeros(0)))
    res = CoalescenceResult(times, max_steps)
    return (res, traces) if record else res


@dataclass
class TVResult:
    tv: float
    replicas: int
    steps: int
    start: int
    counts: np.ndarray


def empirical_tv(
    instance: Instance,
    steps: int,
    replicas: int,
    seed: int,
    partition: BlockPartition | None = None,
    start: int = 1,
    replica_chunk: int = 1 << 15,
) -> TVResult:
    """Total variation between the empirical law of ``replicas`` chains after ``steps`` updates and the Gibbs law.

    All replicas start from the homogeneous configuration ``start``; the model
    and both dynamics are invariant under a global flip, so either start gives
    the same distance. Replica ``r`` uses column ``r`` of each draw block.
    """
    g = instance.graph
    exact = gibbs.brute_force(instance).probs
    jcsr = instance.coupling_csr()
    table = block_table(instance, partition) if partition is not None else None
    width = 2 if table is None else table.width
    counts = np.zeros(1 << g.n, dtype=np.int64)
    rng = generator(seed, "tv")
    weights_pow = np.int64(1) << np.arange(g.n, dtype=np.int64)
    for r0 in range(0, replicas, replica_chunk):
        R = min(replica_chunk, replicas - r0)
        spins = np.full((R, g.n), start, dtype=np.int8)
        step_chunk = max(1, (1 << 22) // (R * width))
        done = 0
        while done < steps:
            k = min(step_chunk, steps - done)
            uni = rng.random((k, R, width))
            if table is None:
                if JIT_ENABLED:
                    _ck.glauber_batch(g.indptr, g.nbrs, jcsr, instance.beta, spins, uni)
                else:
                    _ck.glauber_batch_numpy(g.indptr, g.nbrs, jcsr, instance.beta, spins, uni)
            else:
                _ck.block_batch(*table.kernel_args(), instance.beta, spins, uni)
            done += k
        idx = (((spins + 1) // 2).astype(np.int64) * weights_pow).sum(axis=1)
        counts += np.bincount(idx, minlength=1 << g.n)
    emp = counts / replicas
    return TVResult(float(0.5 * np.abs(emp - exact).sum()), replicas, steps, start, counts)
