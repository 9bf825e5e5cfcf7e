"""Edge and vertex influences, path weights and the block-vertex test."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .instance import Instance, beta_critical
from .kernels import paths as _paths
from .streams import generator


def edge_influence(beta: float, J):
    """``|1 - e^(beta J)| / (1 + e^(beta J))``, evaluated as ``|tanh(beta J / 2)|``."""
    J = np.asarray(J, dtype=np.float64)
    if beta < 0 or not math.isfinite(beta):
        raise ValueError(f"beta must be finite and non-negative, got {beta}")
    if not np.all(np.isfinite(J)):
        raise ValueError("coupling must be finite")
    out = np.abs(np.tanh(0.5 * beta * J))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WeightParams:
    """Thresholds and radii used by the vertex weights and the partition builder."""

    epsilon: float
    d: float
    block_range: int
    short_cycle_max_len: int
    cycle_buffer_radius: int
    cycle_separation: int
    tree_reach: int
    cycle_reach: int

    @property
    def light_weight(self) -> float:
        return 1.0 - self.epsilon / 4.0

    @property
    def heavy_threshold(self) -> float:
        return 1.0 - self.epsilon / 2.0

    @classmethod
    def defaults(cls, n: int, d: float, epsilon: float, **overrides) -> "WeightParams":
        if not 0 < epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
        if not d > 0:
            raise ValueError(f"d must be positive, got {d}")
        ln_n = math.log(n) if n > 1 else 0.0
        ln_d = math.log(d)

        def ratio(num, den):
            return math.inf if den <= 0 else num / den

        cycle_len = ratio(4 * ln_n, ln_d**4)
        params = dict(
            epsilon=float(epsilon),
            d=float(d),
            block_range=max(1, math.ceil(ln_n)),
            short_cycle_max_len=int(max(3, min(n, math.floor(cycle_len)))),
            cycle_buffer_radius=max(1, math.ceil(abs(ln_d) ** 5)),
            cycle_separation=int(max(1, min(n, math.ceil(ratio(2 * ln_n, ln_d**2))))),
            tree_reach=max(1, math.ceil(4 * ln_n / math.sqrt(d))),
            cycle_reach=max(1, math.ceil(2 * ln_n / math.sqrt(d))),
        )
        params.update(overrides)
        return cls(**params)

    def capped(self, limit: int) -> "WeightParams":
        """Cap every distance radius at ``limit`` (at least 1)."""
        limit = max(1, int(limit))
        return replace(
            self,
            cycle_buffer_radius=min(self.cycle_buffer_radius, limit),
            cycle_separation=min(self.cycle_separation, limit),
            tree_reach=min(self.tree_reach, limit),
            cycle_reach=min(self.cycle_reach, limit),
        )

    def as_dict(self) -> dict:
        out = asdict(self)
        out["light_weight"] = self.light_weight
        out["heavy_threshold"] = self.heavy_threshold
        return out


@dataclass(frozen=True, eq=False)
class InfluenceTable:
    gamma: np.ndarray
    aggregate: np.ndarray
    outside: np.ndarray | None = None


def aggregate_influence(instance: Instance, partition=None) -> InfluenceTable:
    """Per-edge influence, per-vertex sum, and (given a partition) the sum over outside neighbours."""
    g = instance.graph
    gamma = edge_influence(instance.beta, instance.couplings)
    gamma = np.atleast_1d(np.asarray(gamma, dtype=np.float64))
    agg = np.zeros(g.n)
    if g.m:
        np.add.at(agg, g.edges[:, 0], gamma)
        np.add.at(agg, g.edges[:, 1], gamma)
    outside = None
    if partition is not None:
        if partition.n != g.n:
            raise ValueError(f"partition covers {partition.n} vertices, instance has {g.n}")
        owner = partition.vertex_to_block
        cross = owner[g.edges[:, 0]] != owner[g.edges[:, 1]]
        outside = np.zeros(g.n)
        np.add.at(outside, g.edges[cross, 0], gamma[cross])
        np.add.at(outside, g.edges[cross, 1], gamma[cross])
    return InfluenceTable(gamma, agg, outside)


def vertex_log_weights(aggregate: np.ndarray, params: WeightParams) -> np.ndarray:
    """Log of the vertex weight: ``1 - eps/4`` when ``A <= 1 - eps/2``, else ``d * A``."""
    a = np.asarray(aggregate, dtype=np.float64)
    light = a <= params.heavy_threshold
    with np.errstate(divide="ignore"):
        heavy = np.log(params.d * a)
    return np.where(light, math.log(params.light_weight), heavy)


def vertex_weight(a: float, params: WeightParams) -> float:
    return params.light_weight if a <= params.heavy_threshold else params.d * a


def path_log_weight(path, aggregate: np.ndarray, params: WeightParams) -> float:
    """Log of the product of vertex weights along ``path`` (both endpoints included)."""
    p = np.asarray(path, dtype=np.int64)
    if p.size == 0:
        raise ValueError("path must contain at least one vertex")
    return float(vertex_log_weights(aggregate[p], params).sum())


def path_weight(path, aggregate: np.ndarray, params: WeightParams) -> float:
    return math.exp(path_log_weight(path, aggregate, params))


def is_simple_path(graph, path) -> bool:
    p = [int(v) for v in path]
    if len(set(p)) != len(p) or any(not 0 <= v < graph.n for v in p):
        return False
    return all(b in set(graph.neighbors(a).tolist()) for a, b in zip(p, p[1:]))


def comparison_weight(instance: Instance, path) -> float:
    """``beta * sum |J_e|`` over edges with an endpoint on the path, plus ``sum ln deg(v)`` on the path."""
    g = instance.graph
    p = np.asarray(path, dtype=np.int64)
    if not is_simple_path(g, p):
        raise ValueError(f"not a simple path: {list(p)}")
    on = np.zeros(g.n, dtype=bool)
    on[p] = True
    touching = on[g.edges[:, 0]] | on[g.edges[:, 1]] if g.m else np.zeros(0, dtype=bool)
    deg = g.degrees()[p]
    logdeg = np.where(deg > 0, np.log(np.maximum(deg, 1)), 0.0)
    return float(instance.beta * np.abs(instance.couplings[touching]).sum() + logdeg.sum())


def log_weights_for(instance: Instance, params: WeightParams) -> np.ndarray:
    return vertex_log_weights(aggregate_influence(instance).aggregate, params)


def is_block_vertex(instance: Instance, u: int, params: WeightParams, logw: np.ndarray | None = None):
    """Return ``(True, None)`` if every short path from ``u`` has weight below one, else ``(False, witness)``."""
    g = instance.graph
    if logw is None:
        logw = log_weights_for(instance, params)
    F = _paths.walk_bounds(g.indptr, g.nbrs, logw, params.block_range)
    buf = np.empty(params.block_range + 1, dtype=np.int64)
    k = _paths.heavy_path_from(g.indptr, g.nbrs, logw, F, int(u), params.block_range, buf)
    if k == 0:
        return True, None
    return False, buf[:k].tolist()


def block_vertices(instance: Instance, params: WeightParams, logw: np.ndarray | None = None) -> np.ndarray:
    g = instance.graph
    if logw is None:
        logw = log_weights_for(instance, params)
    return _paths.block_vertex_mask(g.indptr, g.nbrs, logw, params.block_range)


@dataclass
class UpsilonReport:
    passed: bool
    max_len: int
    threshold: float
    witness: list[int] | None
    witness_value: float | None


def check_upsilon_property(instance: Instance, d) -> UpsilonReport:
    """Every simple path with at most ``floor(ln n / ln^4 d)`` edges has comparison weight ``<= ln n / ln^2 d``.

    ``d`` may be a number or a ``WeightParams``.
    """
    if isinstance(d, WeightParams):
        d = d.d
    g = instance.graph
    n = g.n
    ln_n = math.log(n) if n > 1 else 0.0
    ln_d = math.log(d)
    if ln_d <= 0:
        raise ValueError("path-length cap needs d > 1")
    max_len = int(math.floor(ln_n / ln_d**4))
    threshold = ln_n / ln_d**2
    deg = g.degrees()
    logdeg = np.where(deg > 0, np.log(np.maximum(deg, 1)), 0.0)
    absJ = np.abs(instance.coupling_csr())
    buf = np.empty(max_len + 1, dtype=np.int64)
    k = _paths.upsilon_witness(g.indptr, g.nbrs, absJ, logdeg, instance.beta, max_len, threshold, buf)
    if k == 0:
        return UpsilonReport(True, max_len, threshold, None, None)
    w = buf[:k].tolist()
    return UpsilonReport(False, max_len, threshold, w, comparison_weight(instance, w))


@dataclass
class InfluenceEstimate:
    beta: float
    d: float
    estimate: float
    stderr: float
    scaled: float
    scaled_stderr: float
    below_one: bool


def expected_influence_mc(beta: float, d: float, trials: int, seed: int, chunk: int = 1 << 20) -> InfluenceEstimate:
    """Monte Carlo estimate of ``E|tanh(beta J / 2)|`` for standard normal J.

    Uses ``x = beta |J| / 2`` as a control variate with known mean
    ``beta / sqrt(2 pi)``, so only the small remainder ``x - tanh x`` is sampled.
    ``below_one`` holds when ``d * (estimate + 3 stderr) < 1``.
    """
    if trials < 2:
        raise ValueError("need at least two trials")
    rng = generator(seed, "influence-mc")
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        x = 0.5 * beta * np.abs(rng.standard_normal(k))
        r = x - np.tanh(x)
        total += float(r.sum())
        total_sq += float((r * r).sum())
        done += k
    mean_r = total / trials
    var_r = max(total_sq / trials - mean_r**2, 0.0) * trials / (trials - 1)
    est = beta / math.sqrt(2 * math.pi) - mean_r
    se = math.sqrt(var_r / trials)
    return InfluenceEstimate(beta, d, est, se, d * est, d * se, d * (est + 3 * se) < 1.0)


def uniqueness_beta(d: float, epsilon: float = 0.0) -> float:
    return (1.0 - epsilon) * beta_critical(d)
