"""Exact transition matrices on small state spaces, relaxation and mixing times, and the bound checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.special import expit, logsumexp

from . import gibbs, structure
from .influence import aggregate_influence, comparison_weight
from .instance import Instance
from .partition import BlockPartition

MAX_STATES = 1 << 14
DENSE_STATES = 1 << 12
MAX_BOUNDARY_ENUM = 1 << 10


class NotReversibleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LocalSystem:
    """Spins on ``members`` (bit i = members[i]) with every other spin frozen at ``outside``."""

    instance: Instance
    members: tuple[int, ...]
    outside: np.ndarray

    @classmethod
    def whole(cls, instance: Instance) -> "LocalSystem":
        return cls(instance, tuple(range(instance.n)), np.ones(instance.n, dtype=np.int8))

    @classmethod
    def restricted(cls, instance: Instance, members, boundary) -> "LocalSystem":
        members = tuple(sorted(int(v) for v in members))
        full = np.ones(instance.n, dtype=np.int8)
        if isinstance(boundary, dict):
            for v, s in boundary.items():
                full[int(v)] = s
        elif boundary is not None:
            full[:] = np.asarray(boundary, dtype=np.int8)
        return cls(instance, members, full)

    @property
    def k(self) -> int:
        return len(self.members)

    def states(self) -> np.ndarray:
        return np.arange(1 << self.k, dtype=np.int64)

    def local_log_weights(self) -> np.ndarray:
        """Unnormalised log-probabilities of every local state (brute force)."""
        g = self.instance.graph
        pos = {v: i for i, v in enumerate(self.members)}
        idx = self.states()
        lw = np.zeros(1 << self.k)
        for (u, v), J in zip(g.edges.tolist(), self.instance.couplings.tolist()):
            iu, iv = pos.get(u), pos.get(v)
            if iu is None and iv is None:
                continue
            if iu is not None and iv is not None:
                agree = ((idx >> iu) ^ (idx >> iv)) & 1 == 0
            elif iu is not None:
                agree = ((idx >> iu) & 1) == (self.outside[v] > 0)
            else:
                agree = ((idx >> iv) & 1) == (self.outside[u] > 0)
            lw += self.instance.beta * J * agree
        return lw

    def stationary(self) -> np.ndarray:
        lw = self.local_log_weights()
        return np.exp(lw - logsumexp(lw))


def _site_entries(system: LocalSystem, i: int):
    inst = system.instance
    g = inst.graph
    v = system.members[i]
    pos = {u: j for j, u in enumerate(system.members)}
    idx = system.states()
    h = np.zeros(idx.size)
    for u, e in zip(g.neighbors(v).tolist(), g.incident_edges(v).tolist()):
        J = inst.couplings[e]
        if u in pos:
            h += J * (2 * ((idx >> pos[u]) & 1) - 1)
        else:
            h += J * system.outside[u]
    q = expit(inst.beta * h)
    bit = np.int64(1) << i
    rows = np.concatenate([idx, idx])
    cols = np.concatenate([idx | bit, idx & ~bit])
    vals = np.concatenate([q, 1.0 - q])
    return rows, cols, vals


def _block_entries(system: LocalSystem, block, log_weights: np.ndarray):
    """Rows of the exact block resampling kernel, normalised by brute force over each fiber."""
    pos = {u: j for j, u in enumerate(system.members)}
    block = sorted(int(v) for v in block)
    bpos = np.array([pos[v] for v in block], dtype=np.int64)
    mask = int(sum(1 << int(p) for p in bpos))
    k = len(block)
    local = np.arange(1 << k, dtype=np.int64)
    spread = np.zeros(1 << k, dtype=np.int64)
    for j, p in enumerate(bpos):
        spread |= ((local >> j) & 1) << p
    fibers = np.unique(system.states() & ~mask)
    states = fibers[:, None] | spread[None, :]
    lw = log_weights[states]
    p = np.exp(lw - logsumexp(lw, axis=1, keepdims=True))
    rows = np.repeat(states, 1 << k, axis=1).ravel()
    cols = np.tile(states, (1, 1 << k)).ravel()
    vals = np.tile(p, (1, 1 << k)).ravel()
    return rows, cols, vals


def chain_matrix(system: LocalSystem, blocks) -> np.ndarray | sp.csr_matrix:
    """Heat-bath block chain on ``system``: pick one of ``blocks`` uniformly, resample it exactly."""
    size = 1 << system.k
    if size > MAX_STATES:
        raise ValueError(f"state space 2^{system.k} exceeds the 2^14 cap")
    R, C, V = [], [], []
    pos = {u: j for j, u in enumerate(system.members)}
    log_weights = None
    for b in blocks:
        b = list(b)
        if len(b) == 1:
            r, c, v = _site_entries(system, pos[int(b[0])])
        else:
            if log_weights is None:
                log_weights = system.local_log_weights()
            r, c, v = _block_entries(system, b, log_weights)
        R.append(r)
        C.append(c)
        V.append(v / len(blocks))
    M = sp.coo_matrix((np.concatenate(V), (np.concatenate(R), np.concatenate(C))), shape=(size, size)).tocsr()
    M.sum_duplicates()
    return M.toarray() if size <= DENSE_STATES else M


def transition_matrix(
    instance: Instance,
    kind: str = "glauber",
    partition: BlockPartition | None = None,
    block=None,
    boundary=None,
):
    """Exact kernel of one of three chains.

    ``glauber`` and ``block`` act on all ``2^n`` states. ``block_restricted`` is
    Glauber on the vertices of ``block`` with every other spin frozen at
    ``boundary``; its states index the block's sorted members.
    """
    if kind == "block_restricted":
        if block is None:
            raise ValueError("block_restricted needs a block")
        system = LocalSystem.restricted(instance, block, boundary)
        return chain_matrix(system, [[v] for v in system.members])
    system = LocalSystem.whole(instance)
    if kind == "glauber":
        blocks = [[v] for v in range(instance.n)]
    elif kind == "block":
        if partition is None:
            raise ValueError("block dynamics needs a partition")
        blocks = [b.members for b in partition.blocks]
    else:
        raise ValueError(f"unknown chain kind {kind!r}")
    return chain_matrix(system, blocks)


@dataclass
class SpectralReport:
    lambda_star: float
    tau_rel: float
    t_mix: int | None
    stationarity_residual: float
    detailed_balance_residual: float
    states: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def spectral_report(instance: Instance, kind: str = "glauber", partition: BlockPartition | None = None) -> SpectralReport:
    """Relaxation and mixing times of a whole-graph chain, with its residuals against the exact Gibbs law."""
    mu = gibbs.brute_force(instance).probs
    P = transition_matrix(instance, kind, partition)
    lam, tau = relaxation_time(P, mu)
    resid = float(np.abs(mu @ P - mu).max())
    t_mix = mixing_time_exact(P, mu) if mu.size <= DENSE_STATES else None
    return SpectralReport(lam, tau, t_mix, resid, detailed_balance_residual(P, mu), mu.size)


def detailed_balance_residual(P, pi: np.ndarray) -> float:
    if sp.issparse(P):
        F = sp.diags(pi) @ P
        D = (F - F.T).tocoo()
        return float(np.abs(D.data).max()) if D.nnz else 0.0
    F = pi[:, None] * P
    return float(np.abs(F - F.T).max())


def _symmetrised(P, pi):
    s = np.sqrt(pi)
    if sp.issparse(P):
        A = sp.diags(s) @ P @ sp.diags(1.0 / s)
        return ((A + A.T) * 0.5).tocsr()
    A = s[:, None] * P / s[None, :]
    return 0.5 * (A + A.T)


def _lambda_star_eigh(A) -> float:
    dense = A.toarray() if sp.issparse(A) else A
    lam = scipy.linalg.eigvalsh(dense)
    if lam.size == 1:
        return 0.0
    return float(max(lam[-2], -lam[0], 0.0))


def _lambda_star_power(A, pi, tol=1e-13, max_iter=200000, seed=0) -> float:
    top = np.sqrt(pi)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(top.size)
    v -= top * (top @ v)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        return 0.0
    v /= nrm
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        w -= top * (top @ w)
        new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        v = w / nrm
        if abs(new - lam) < tol * max(1.0, abs(new)):
            lam = new
            break
        lam = new
    return abs(lam)


class Relaxation(NamedTuple):
    lambda_star: float
    tau_rel: float


def relaxation_time(P, pi: np.ndarray | None = None, method: str = "eigh", check_tol: float = 1e-12) -> Relaxation:
    """``1 / (1 - lambda_star)`` for a reversible kernel.

    ``lambda_star`` is the largest absolute eigenvalue apart from the top one.
    Reversibility against ``pi`` is checked first; without ``pi`` the stationary
    vector is taken from the kernel itself.
    """
    if pi is None:
        pi = stationary_distribution(P)
    pi = np.asarray(pi, dtype=np.float64)
    res = detailed_balance_residual(P, pi)
    if res > check_tol:
        raise NotReversibleError(f"detailed balance residual {res:.3e} exceeds {check_tol:.1e}")
    A = _symmetrised(P, pi)
    if method == "eigh":
        lam = _lambda_star_eigh(A)
    elif method == "power":
        lam = _lambda_star_power(A, pi)
    else:
        raise ValueError(f"unknown method {method!r}")
    lam = min(lam, 1.0)
    if lam >= 1.0 - 1e-15:
        return Relaxation(lam, math.inf)
    return Relaxation(lam, 1.0 / (1.0 - lam))


def stationary_distribution(P) -> np.ndarray:
    dense = P.toarray() if sp.issparse(P) else np.asarray(P)
    w, vl = scipy.linalg.eig(dense, left=True, right=False)
    i = int(np.argmin(np.abs(w - 1.0)))
    v = np.real(vl[:, i])
    v = np.abs(v)
    return v / v.sum()


def tv_from_worst_start(Pt: np.ndarray, mu: np.ndarray) -> float:
    return float(0.5 * np.abs(Pt - mu[None, :]).sum(axis=1).max())


def mixing_time_exact(P, mu: np.ndarray, threshold: float = 1.0 / math.e, max_t: int = 1 << 40) -> int:
    """Smallest ``t`` with worst-start total variation ``<= threshold`` (binary lifting on matrix powers)."""
    P = P.toarray() if sp.issparse(P) else np.asarray(P)
    mu = np.asarray(mu)
    if tv_from_worst_start(np.eye(P.shape[0]), mu) <= threshold:
        return 0
    powers = [P]
    while tv_from_worst_start(powers[-1], mu) > threshold:
        if (1 << len(powers)) > max_t:
            raise RuntimeError("chain does not mix within max_t steps")
        powers.append(powers[-1] @ powers[-1])
    cur = np.eye(P.shape[0])
    t = 0
    for j in range(len(powers) - 1, -1, -1):
        cand = cur @ powers[j]
        if tv_from_worst_start(cand, mu) > threshold:
            cur = cand
            t += 1 << j
    return t + 1


def tv_curve(P, mu: np.ndarray, steps: int) -> np.ndarray:
    P = P.toarray() if sp.issparse(P) else np.asarray(P)
    cur = np.eye(P.shape[0])
    out = np.empty(steps + 1)
    for t in range(steps + 1):
        out[t] = tv_from_worst_start(cur, mu)
        cur = cur @ P
    return out


# --- bound checks ------------------------------------------------------------


def _boundary_configs(instance: Instance, boundary_vertices):
    bv = list(boundary_vertices)
    if len(bv) > 10:
        raise ValueError(f"{len(bv)} boundary vertices exceed the 2^10 enumeration cap")
    for code in range(1 << len(bv)):
        cfg = np.ones(instance.n, dtype=np.int8)
        for j, v in enumerate(bv):
            cfg[v] = 1 if (code >> j) & 1 else -1
        yield cfg


def local_glauber_tau(instance: Instance, members, outside) -> float:
    system = LocalSystem.restricted(instance, members, outside)
    P = chain_matrix(system, [[v] for v in system.members])
    return relaxation_time(P, system.stationary()).tau_rel


def worst_boundary_tau(instance: Instance, members) -> float:
    """Largest Glauber relaxation time on ``members`` over every spin assignment of its outer boundary."""
    members = sorted(int(v) for v in members)
    if len(members) == 1:
        return 1.0
    bnd = structure.outer_boundary(instance.graph, members)
    seen = {}
    best = 0.0
    g = instance.graph
    for cfg in _boundary_configs(instance, bnd):
        key = tuple(
            round(float(sum(instance.couplings[e] * cfg[u]
                            for u, e in zip(g.neighbors(v).tolist(), g.incident_edges(v).tolist())
                            if u not in set(members))), 12)
            for v in members
        )
        if key in seen:
            continue
        tau = local_glauber_tau(instance, members, cfg)
        seen[key] = tau
        best = max(best, tau)
    return best


def per_unit_tau(tau: float, units: int) -> float:
    """Relaxation time of the continuous-time chain that gives each of ``units`` update units a rate-1 clock.

    A discrete chain picking one of ``units`` uniformly has generator ``units * (P - I)``,
    so its gap is ``units`` times the discrete gap.
    """
    return tau / units


@dataclass
class ComparisonReport:
    """``tau_glauber <= tau_block * max_B tau_B`` on discrete-time relaxation times.

    The discrete form is exact for equal block sizes but can fail when sizes
    differ. ``per_unit_*`` evaluates the same inequality after giving every
    vertex and every block its own rate-1 clock, which always holds.
    """

    tau_glauber: float
    tau_block: float
    tau_blocks: list[float]
    bound: float
    relative_slack: float
    holds: bool
    per_unit_bound: float
    per_unit_slack: float
    per_unit_holds: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def verify_comparison_bound(instance: Instance, partition: BlockPartition, tol: float = 1e-9) -> ComparisonReport:
    """Check the comparison inequality with every ``tau_B`` taken at its worst boundary."""
    mu = gibbs.brute_force(instance).probs
    tg = relaxation_time(transition_matrix(instance, "glauber"), mu).tau_rel
    tb = relaxation_time(transition_matrix(instance, "block", partition), mu).tau_rel
    taus = [worst_boundary_tau(instance, b.members) for b in partition.blocks]
    bound = tb * max(taus)
    slack = (bound - tg) / bound
    unit_bound = per_unit_tau(tb, len(partition)) * max(per_unit_tau(t, len(b)) for t, b in zip(taus, partition.blocks))
    unit_slack = (unit_bound - per_unit_tau(tg, instance.n)) / unit_bound
    return ComparisonReport(tg, tb, taus, bound, slack, slack >= -tol, unit_bound, unit_slack, unit_slack >= -tol)


def _rooted_children(instance: Instance, members, root: int):
    g = instance.graph
    inside = set(int(v) for v in members)
    parent = {root: -1}
    order = [root]
    i = 0
    while i < len(order):
        v = order[i]
        for w in sorted(g.neighbors(v).tolist()):
            if w in inside and w not in parent:
                parent[w] = v
                order.append(w)
        i += 1
    children = {v: [] for v in order}
    for v in order[1:]:
        children[parent[v]].append(v)
    return parent, children, order


def _subtree(children, v):
    out = [v]
    i = 0
    while i < len(out):
        out.extend(children[out[i]])
        i += 1
    return sorted(out)


@dataclass
class StarCheck:
    center: int
    R: int
    tau: float
    bound: float
    holds: bool


@dataclass
class RelaxationBoundReport:
    kind: str
    root: int
    tau: float
    log_bound: float
    bound: float
    holds: bool
    stars: list[StarCheck] = field(default_factory=list)
    pieces: dict = field(default_factory=dict)

    @property
    def stars_hold(self) -> bool:
        return all(s.holds for s in self.stars)


def max_root_leaf_weight(instance: Instance, members, root: int) -> float:
    """Largest comparison weight over paths from ``root`` to a leaf of the rooted tree."""
    parent, children, order = _rooted_children(instance, members, root)
    best = -math.inf
    for v in order:
        if children[v]:
            continue
        path = [v]
        while parent[path[-1]] >= 0:
            path.append(parent[path[-1]])
        best = max(best, comparison_weight(instance, path[::-1]))
    return best


def star_check(instance: Instance, members, center: int, parent_vertex: int, children_of, boundary_cfg, tol=1e-9):
    """Block chain on the subtree at ``center`` with blocks {center} and each child subtree, worst parent spin."""
    kids = children_of[center]
    sub = _subtree(children_of, center)
    blocks = [[center]] + [_subtree(children_of, w) for w in kids]
    g = instance.graph
    J = {w: float(instance.couplings[e]) for w, e in zip(g.neighbors(center).tolist(), g.incident_edges(center).tolist())}
    R = len(kids)
    bound = math.exp(10 * math.log(R) + 2 * instance.beta * sum(abs(J[w]) for w in kids))
    spins = [1, -1] if parent_vertex >= 0 else [None]
    tau = 0.0
    for s in spins:
        cfg = boundary_cfg.copy()
        if s is not None:
            cfg[parent_vertex] = s
        system = LocalSystem.restricted(instance, sub, cfg)
        P = chain_matrix(system, blocks)
        tau = max(tau, relaxation_time(P, system.stationary()).tau_rel)
    return StarCheck(center, R, tau, bound, tau <= bound * (1 + tol))


def verify_relaxation_upper_bounds(
    instance: Instance, block, boundary, epsilon: float | None = None, tol: float = 1e-9
) -> RelaxationBoundReport:
    """Spectral relaxation time of Glauber on a boundary-conditioned block against its path-weight bound.

    Trees: ``tau <= exp(max root-to-leaf comparison weight)`` with the root at the
    lowest-id vertex with aggregate influence above ``1 - epsilon/2`` when
    ``epsilon`` is given and such a vertex exists, else the lowest id, plus the star
    bound at every vertex with children. Unicyclic blocks: split at the cycle
    vertex of lowest id into the tree hanging there and the rest, and check the
    two-block comparison inequality.
    """
    members = sorted(int(v) for v in block)
    kind = structure.classify(instance.graph, members)
    cfg = LocalSystem.restricted(instance, members, boundary).outside
    tau = local_glauber_tau(instance, members, cfg)
    if kind in ("singleton", "tree"):
        root = members[0]
        if epsilon is not None:
            agg = aggregate_influence(instance).aggregate
            heavy = [v for v in members if agg[v] > 1.0 - epsilon / 2.0]
            if heavy:
                root = heavy[0]
        m = max_root_leaf_weight(instance, members, root)
        bound = math.exp(m)
        parent, children, order = _rooted_children(instance, members, root)
        stars = [star_check(instance, members, v, parent[v], children, cfg, tol) for v in order if children[v]]
        return RelaxationBoundReport(kind, root, tau, m, bound, tau <= bound * (1 + tol), stars)
    cyc = structure.cycle_vertices(instance.graph, members)
    w1 = cyc[0]
    cset = set(cyc)
    g = instance.graph
    piece1, seen = [w1], {w1}
    i = 0
    while i < len(piece1):
        for nb in g.neighbors(piece1[i]).tolist():
            if nb in set(members) and nb not in seen and nb not in cset:
                seen.add(nb)
                piece1.append(nb)
        i += 1
    piece1 = sorted(piece1)
    piece2 = sorted(set(members) - set(piece1))
    system = LocalSystem.restricted(instance, members, cfg)
    P2 = chain_matrix(system, [piece1, piece2])
    tau_two = relaxation_time(P2, system.stationary()).tau_rel

    def worst_inside(piece):
        others = sorted(set(members) - set(piece))
        worst = 0.0
        for code in range(1 << len(others)):
            c = cfg.copy()
            for j, v in enumerate(others):
                c[v] = 1 if (code >> j) & 1 else -1
            worst = max(worst, local_glauber_tau(instance, piece, c) if len(piece) > 1 else 1.0)
        return worst

    t1, t2 = worst_inside(piece1), worst_inside(piece2)
    bound = tau_two * max(t1, t2)
    # the same comparison with a rate-1 clock per unit, mapped back to the block's discrete clock
    unit_bound = len(members) * per_unit_tau(tau_two, 2) * max(per_unit_tau(t1, len(piece1)),
                                                               per_unit_tau(t2, len(piece2)))
    return RelaxationBoundReport(
        kind, w1, tau, math.log(bound), bound, tau <= bound * (1 + tol),
        pieces={"pieces": [piece1, piece2], "tau_two_block": tau_two, "tau_pieces": [t1, t2],
                "per_unit_bound": unit_bound, "per_unit_holds": tau <= unit_bound * (1 + tol)},
    )
