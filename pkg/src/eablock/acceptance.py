"""The ten acceptance criteria as runnable checks with pinned tolerances.

``run_acceptance(quick=False)`` runs the full sizes; ``quick=True`` shrinks every
sample count so the whole suite finishes in well under a minute, which is only
useful as a smoke test.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds, dynamics, gibbs, spectral
from . import random_structures as rs
from .influence import WeightParams, edge_influence, expected_influence_mc
from .instance import Graph, Instance, beta_critical, gen_instance
from .partition import BlockPartition, Failure, build_partition, graph_diameter, recheck_failure, validate_partition
from .streams import generator

DP_TOL = 1e-10
BALANCE_TOL = 1e-12
TV_LIMIT = 0.02
COMPARISON_SLACK = -1e-9
IDENTITY_TOL = 1e-12
UNIQUENESS_WINDOW = (0.97, 1.0)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.title}: {self.summary} ({self.seconds:.1f}s)"

    def as_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed, "summary": self.summary,
                "seconds": self.seconds, "details": self.details}


def _scale(quick: bool, full: int, small: int) -> int:
    return small if quick else full


def _conditional_marginals(instance: Instance, members, boundary) -> np.ndarray:
    """Brute-force P(+) of each member given the spins of every other vertex."""
    bf = gibbs.brute_force(instance)
    n = instance.n
    idx = np.arange(1 << n, dtype=np.int64)
    others = [v for v in range(n) if v not in set(members)]
    keep = np.ones(idx.size, dtype=bool)
    for v in others:
        keep &= ((idx >> v) & 1) == (1 if boundary[v] > 0 else 0)
    p = bf.probs[keep]
    p = p / p.sum()
    sel = idx[keep]
    return np.array([p[((sel >> v) & 1) == 1].sum() for v in members])


def criterion_1(quick: bool = False) -> CriterionResult:
    rng = generator(101, "acceptance-1")
    betas = (0.1, 1.0, 5.0)
    worst = 0.0
    counts = {"tree": _scale(quick, 100, 10), "unicyclic": _scale(quick, 50, 5)}
    checked = 0
    for kind, count in counts.items():
        for i in range(count):
            k = int(rng.integers(1 if kind == "tree" else 3, 13))
            b = int(rng.integers(0, 5))
            inst, members, boundary = rs.random_block_instance(k, kind, b, betas[i % 3], rng)
            dp = gibbs.block_marginals(inst, members, boundary)
            exact = _conditional_marginals(inst, members, boundary)
            worst = max(worst, float(np.abs(np.array([dp[v] for v in members]) - exact).max()))
            checked += 1
    return CriterionResult(1, "block DP marginals vs brute force", worst <= DP_TOL,
                           f"{checked} blocks, max error {worst:.2e} (tol {DP_TOL:.0e})", details={"max_error": worst})


def criterion_2(quick: bool = False) -> CriterionResult:
    rng = generator(102, "acceptance-2")
    worst = {"glauber": 0.0, "block": 0.0}
    count = _scale(quick, 200, 20)
    for _ in range(count):
        n = int(rng.integers(2, 7))
        nb = int(rng.integers(1, min(4, n) + 1))
        inst, part = rs.random_instance_with_partition(n, float(rng.uniform(0.3, 0.8)), float(rng.uniform(0.1, 2.0)), nb, rng)
        mu = gibbs.brute_force(inst).probs
        worst["glauber"] = max(worst["glauber"], spectral.detailed_balance_residual(spectral.transition_matrix(inst), mu))
        worst["block"] = max(worst["block"], spectral.detailed_balance_residual(spectral.transition_matrix(inst, "block", part), mu))
    ok = max(worst.values()) <= BALANCE_TOL
    return CriterionResult(2, "detailed balance", ok,
                           f"{count} instances, residual glauber {worst['glauber']:.1e} block {worst['block']:.1e}", details=worst)


def _tv_instances(rng, count):
    for _ in range(count):
        edges = rs.random_tree_edges(4, rng)
        if rng.random() < 0.5:
            edges = rs.random_unicyclic_edges(4, rng)
        g = Graph.from_edges(4, edges)
        yield Instance(g, rs.random_couplings(g.m, rng), float(rng.uniform(0.2, 1.5)))


def criterion_3(quick: bool = False) -> CriterionResult:
    rng = generator(103, "acceptance-3")
    steps = _scale(quick, 10_000, 1_000)
    replicas = _scale(quick, 100_000, 20_000)
    limit = TV_LIMIT if not quick else 0.05
    glauber, block = [], []
    for i, inst in enumerate(_tv_instances(rng, 3)):
        glauber.append(dynamics.empirical_tv(inst, steps, replicas, seed=1000 + i).tv)
        one = BlockPartition.from_blocks(inst.graph, [list(range(4))])
        block.append(dynamics.empirical_tv(inst, 1, replicas, seed=2000 + i, partition=one).tv)
    ok = max(glauber + block) <= limit
    return CriterionResult(3, "empirical TV convergence", ok,
                           f"glauber max TV {max(glauber):.4f}, one-block max TV {max(block):.4f} (limit {limit})",
                           details={"glauber": glauber, "block": block})


def criterion_4(quick: bool = False) -> CriterionResult:
    rng = generator(104, "acceptance-4")
    count = _scale(quick, 50, 5)
    worst = math.inf
    worst_unit = math.inf
    for _ in range(count):
        n = int(rng.integers(4, 11 if not quick else 8))
        nb = int(rng.integers(2, 5))
        inst, part = rs.random_instance_with_partition(n, float(rng.uniform(0.25, 0.6)), float(rng.uniform(0.2, 1.5)), nb, rng)
        rep = spectral.verify_comparison_bound(inst, part)
        worst = min(worst, rep.relative_slack)
        worst_unit = min(worst_unit, rep.per_unit_slack)
    return CriterionResult(4, "comparison inequality", worst >= COMPARISON_SLACK,
                           f"{count} pairs, min relative slack {worst:.3e} (per-unit clocks {worst_unit:.3e})",
                           details={"min_slack": worst, "min_per_unit_slack": worst_unit})


TREE_HOST = {"n": 2000, "d": 16.0, "epsilon": 0.4}


def criterion_5(quick: bool = False) -> CriterionResult:
    rng = generator(105, "acceptance-5")
    host = rs.host_instance(TREE_HOST["n"], TREE_HOST["d"], TREE_HOST["epsilon"], seed=105)
    count = _scale(quick, 100, 10)
    tree_fail = []
    min_ratio = math.inf
    for _ in range(count):
        members = rs.induced_tree_sample(host, int(rng.integers(2, 11)), rng)
        rep = spectral.verify_relaxation_upper_bounds(host, members, rs.random_spins(host.n, rng), TREE_HOST["epsilon"])
        min_ratio = min(min_ratio, rep.bound / rep.tau)
        if not rep.holds:
            tree_fail.append(members)
    star_fail: dict[int, int] = {}
    star_total: dict[int, int] = {}
    star_worst: dict[int, float] = {}
    betas = (host.beta, 0.5, 1.0)
    for R in range(1, 7):
        for beta in betas:
            for _ in range(_scale(quick, 4, 1)):
                inst, members = rs.star_instance(R, rng.standard_normal(R), beta, outer_per_leaf=1, rng=rng)
                rep = spectral.verify_relaxation_upper_bounds(inst, members, rs.random_spins(inst.n, rng))
                star_total[R] = star_total.get(R, 0) + 1
                star_fail[R] = star_fail.get(R, 0) + sum(not s.holds for s in rep.stars)
                star_worst[R] = max([star_worst.get(R, 0.0)] + [s.tau / s.bound for s in rep.stars])
    bad_R = sorted(R for R, c in star_fail.items() if c)
    ok = not tree_fail and not bad_R
    stars = "; ".join(f"R={R} {star_fail[R]}/{star_total[R]} (max tau/bound {star_worst[R]:.2f})" for R in bad_R)
    summary = (f"tree bound {count - len(tree_fail)}/{count} (min bound/tau {min_ratio:.2f}); "
               f"star bound violations: {stars or 'none'}")
    return CriterionResult(5, "tree and star relaxation bounds", ok, summary,
                           details={"tree_failures": tree_fail, "star_failures": star_fail, "star_total": star_total,
                                    "star_max_tau_over_bound": star_worst})


def criterion_6(quick: bool = False) -> CriterionResult:
    grid_b = np.linspace(0.0, 5.0, 100)
    grid_j = np.linspace(-4.0, 4.0, 100)
    ident = 0.0
    for b in grid_b:
        x = b * grid_j
        lhs = np.abs(1.0 - np.exp(x)) / (1.0 + np.exp(x))
        ident = max(ident, float(np.abs(lhs - edge_influence(float(b), grid_j)).max()))
    rng = generator(106, "acceptance-6")
    pend = 0.0
    for _ in range(_scale(quick, 200, 20)):
        k = int(rng.integers(2, 8))
        g = Graph.from_edges(k, rs.random_tree_edges(k, rng))
        inst = Instance(g, rs.random_couplings(g.m, rng), float(rng.uniform(0.0, 5.0)))
        leaves = np.flatnonzero(g.degrees() == 1)
        v = int(leaves[0])
        u = int(g.neighbors(v)[0])
        cfg = rs.random_spins(k, rng)
        cfg[u] = 1
        p_plus = gibbs.site_conditional(inst, v, cfg)
        cfg[u] = -1
        p_minus = gibbs.site_conditional(inst, v, cfg)
        gamma = float(edge_influence(inst.beta, inst.couplings[g.incident_edges(v)[0]]))
        pend = max(pend, abs(abs(p_plus - p_minus) - gamma))
    ok = ident <= IDENTITY_TOL and pend <= IDENTITY_TOL
    return CriterionResult(6, "influence identities", ok, f"grid error {ident:.1e}, pendant TV error {pend:.1e}",
                           details={"identity": ident, "pendant": pend})


def criterion_7(quick: bool = False) -> CriterionResult:
    trials = _scale(quick, 10**7, 10**6)
    rows = []
    ok = True
    for d in (10, 100):
        at = expected_influence_mc(beta_critical(d), d, trials, seed=700 + d)
        below = expected_influence_mc(0.8 * beta_critical(d), d, trials, seed=800 + d)
        in_window = UNIQUENESS_WINDOW[0] < at.scaled < UNIQUENESS_WINDOW[1]
        under = below.scaled <= 0.8 + 3 * below.scaled_stderr
        ok &= in_window and under
        rows.append({"d": d, "at_critical": at.scaled, "at_critical_se": at.scaled_stderr,
                     "at_0.8": below.scaled, "at_0.8_se": below.scaled_stderr})
    summary = ", ".join(f"d={r['d']}: {r['at_critical']:.4f} / {r['at_0.8']:.4f}" for r in rows)
    return CriterionResult(7, "uniqueness arithmetic", bool(ok), summary, details={"rows": rows})


def criterion_8(quick: bool = False) -> CriterionResult:
    trials = _scale(quick, 10**6, 10**4)
    reports = [bounds.half_normal_tail_check(100, 1.0, 0.0, trials, seed=800)]
    for N in (10, 100):
        for delta in (0.1, 0.3, 0.5):
            reports.append(bounds.half_normal_tail_check(N, 1.0, delta, trials, seed=810 + N + int(10 * delta)))
    phi = bounds.phi_bound_check(np.concatenate([np.linspace(0.0, 10.0, 10**6), np.geomspace(10.0, 1e6, 1000)]))
    for d, eps in ((50, 0.5), (100, 0.3)):
        reports.append(bounds.aggregate_tail_check(d, eps, trials, seed=850 + d))
    ok = phi.passed and all(r.passed for r in reports)
    failed = [r.as_dict() for r in reports if not r.passed]
    return CriterionResult(8, "tail and CDF bounds", ok,
                           f"{len(reports)} tail checks, {len(failed)} failed; Phi min margin {phi.min_margin:.1e}",
                           details={"reports": [r.as_dict() for r in reports], "phi": phi.as_dict()})


PARTITION_SETTING = {"n": 20_000, "d": 16.0, "epsilon": 0.4}


def partition_seed_check(seed: int, n: int, d: float, epsilon: float) -> dict:
    """Build with default radii capped at the diameter; validate a success or recheck a failure."""
    inst = gen_instance(n, d, (1.0 - epsilon) * beta_critical(d), seed)
    diam = graph_diameter(inst.graph)
    params = WeightParams.defaults(n, d, epsilon).capped(diam)
    res = build_partition(inst, params)
    if isinstance(res, Failure):
        return {"seed": seed, "built": False, "condition": res.condition, "sound": bool(recheck_failure(inst, params, res))}
    rep = validate_partition(inst, res, params)
    return {"seed": seed, "built": True, "blocks": len(res), "sound": rep.passed, "failed_checks": rep.failed()}


def criterion_9(quick: bool = False, jobs: int = 1) -> CriterionResult:
    s = PARTITION_SETTING
    seeds = range(_scale(quick, 100, 3))
    args = [(seed, s["n"], s["d"], s["epsilon"]) for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(partition_seed_check, *zip(*args)))
    else:
        rows = [partition_seed_check(*a) for a in args]
    built = sum(r["built"] for r in rows)
    unsound = [r for r in rows if not r["sound"]]
    conds: dict = {}
    for r in rows:
        if not r["built"]:
            conds[r["condition"]] = conds.get(r["condition"], 0) + 1
    return CriterionResult(9, "partition soundness", not unsound,
                           f"{len(rows)} seeds: {built} built and valid, failures by condition {conds}, unsound {len(unsound)}",
                           details={"rows": rows})


CONTRACTION_SETTING = {"n": 2000, "d": 32.0, "epsilon": 0.5, "beta_frac": 0.5}


def criterion_10(quick: bool = False) -> CriterionResult:
    s = CONTRACTION_SETTING
    n = s["n"] if not quick else 300
    inst = gen_instance(n, s["d"], s["beta_frac"] * beta_critical(s["d"]), seed=110)
    diam = graph_diameter(inst.graph)
    params = WeightParams.defaults(n, s["d"], s["epsilon"]).capped(diam)
    built = build_partition(inst, params)
    if isinstance(built, Failure):
        part = BlockPartition.singletons(inst.graph)
        kind = f"singletons (build failed at condition {built.condition})"
    else:
        part = built
        kind = "built"
    res = dynamics.contraction_experiment(inst, part, _scale(quick, 10_000, 500), seed=111, partition_kind=kind)
    runs = _scale(quick, 10, 4)
    limit = int(20 * n * math.log(n))
    co = dynamics.coalescence_experiment(inst, runs, limit, seed=112)
    ok = res.mean + 3 * res.stderr < 0 and co.fraction >= 0.9
    return CriterionResult(
        10, "path-coupling contraction", bool(ok),
        f"partition {kind}; mean delta {res.mean:.3e} (z {res.z_score:.1f}); coalesced {co.fraction:.0%} within {limit} steps",
        details={"mean": res.mean, "stderr": res.stderr, "times": co.times, "limit": limit, "partition": kind},
    )


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}


def run_criterion(number: int, quick: bool = False, jobs: int = 1) -> CriterionResult:
    fn = CRITERIA[number]
    t = time.perf_counter()
    res = fn(quick, jobs) if number == 9 else fn(quick)
    res.seconds = time.perf_counter() - t
    return res


def run_acceptance(quick: bool = False, only=None, jobs: int = 1, echo=None) -> list[CriterionResult]:
    out = []
    for number in sorted(only or CRITERIA):
        res = run_criterion(number, quick, jobs)
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out
