import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from eablock import gibbs, spectral
from eablock.instance import Graph, Instance, gen_instance
from eablock.partition import BlockPartition
from eablock.random_structures import random_instance_with_partition, random_spins, star_instance

from conftest import path_instance


def free_instance(n, edges=()):
    return Instance(Graph.from_edges(n, list(edges)), np.zeros(len(edges)), 0.0)


def test_single_vertex_matrix():
    P = spectral.transition_matrix(free_instance(1), "glauber")
    assert np.allclose(P, [[0.5, 0.5], [0.5, 0.5]])
    assert spectral.relaxation_time(P) == (0.0, 1.0)
    assert spectral.mixing_time_exact(P, np.array([0.5, 0.5])) == 1


def test_two_vertices_at_zero_beta_by_hand():
    P = spectral.transition_matrix(free_instance(2, [(0, 1)]), "glauber")
    hand = np.array([
        [0.5, 0.25, 0.25, 0.0],
        [0.25, 0.5, 0.0, 0.25],
        [0.25, 0.0, 0.5, 0.25],
        [0.0, 0.25, 0.25, 0.5],
    ])
    assert np.abs(P - hand).max() < 1e-15


def test_two_state_chain():
    for p in (0.1, 0.5, 0.73, 0.95):
        P = np.array([[p, 1 - p], [1 - p, p]])
        assert spectral.relaxation_time(P, np.array([0.5, 0.5])).lambda_star == pytest.approx(abs(2 * p - 1), abs=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_product_chain_gap(n):
    P = spectral.transition_matrix(free_instance(n), "glauber")
    lam, tau = spectral.relaxation_time(P)
    assert lam == pytest.approx(1 - 1 / n, abs=1e-12)
    assert tau == pytest.approx(n, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_matrices_are_stochastic_and_reversible(seed):
    rng = np.random.default_rng(seed)
    inst, part = random_instance_with_partition(int(rng.integers(3, 8)), 0.5, float(rng.uniform(0.1, 2)), 2, rng)
    mu = gibbs.brute_force(inst).probs
    for P in (spectral.transition_matrix(inst, "glauber"), spectral.transition_matrix(inst, "block", partition=part)):
        assert np.abs(P.sum(axis=1) - 1).max() < 1e-12
        assert np.all(P >= 0)
        assert spectral.detailed_balance_residual(P, mu) < 1e-12
        assert np.abs(mu @ P - mu).max() < 1e-12
        lam = spectral.relaxation_time(P, mu).lambda_star
        assert 0 <= lam < 1


def test_restricted_kernel_is_reversible_for_its_conditional(lollipop):
    cfg = np.array([1, -1, 1, 1, -1, 1])
    P = spectral.transition_matrix(lollipop, "block_restricted", block=[2, 3, 4], boundary=cfg)
    system = spectral.LocalSystem.restricted(lollipop, [2, 3, 4], cfg)
    pi = system.stationary()
    assert P.shape == (8, 8)
    assert spectral.detailed_balance_residual(P, pi) < 1e-14
    # stationary law equals the exact block conditional
    _, lp = gibbs.block_config_log_probs(lollipop, [2, 3, 4], cfg)
    assert np.allclose(pi, np.exp(lp), atol=1e-12)


def test_power_iteration_agrees_with_eigh():
    rng = np.random.default_rng(5)
    for _ in range(5):
        inst, _ = random_instance_with_partition(7, 0.5, 1.0, 2, rng)
        P = spectral.transition_matrix(inst, "glauber")
        mu = gibbs.brute_force(inst).probs
        a = spectral.relaxation_time(P, mu, method="eigh").lambda_star
        b = spectral.relaxation_time(P, mu, method="power").lambda_star
        assert abs(a - b) < 1e-8


def test_non_reversible_kernel_is_refused():
    P = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    P = 0.5 * np.eye(3) + 0.5 * P
    with pytest.raises(spectral.NotReversibleError):
        spectral.relaxation_time(P)


def test_sparse_path_and_size_cap():
    inst = gen_instance(13, 3.0, 0.5, seed=1)
    P = spectral.transition_matrix(inst, "glauber")
    assert sp.issparse(P)
    mu = gibbs.brute_force(inst).probs
    assert abs(np.asarray(P.sum(axis=1)).ravel() - 1).max() < 1e-12
    assert spectral.detailed_balance_residual(P, mu) < 1e-12
    with pytest.raises(ValueError):
        spectral.transition_matrix(gen_instance(15, 3.0, 0.5, seed=1), "glauber")


def test_tv_curve_is_monotone_and_matches_mixing_time(lollipop):
    P = spectral.transition_matrix(lollipop, "glauber")
    mu = gibbs.brute_force(lollipop).probs
    curve = spectral.tv_curve(P, mu, 300)
    assert np.all(np.diff(curve) <= 1e-12)
    t = spectral.mixing_time_exact(P, mu)
    assert curve[t] <= 1 / math.e < curve[t - 1]


def test_sticky_chain_mixes_slowly():
    eps = 1e-4
    P = np.array([[1 - eps, eps], [eps, 1 - eps]])
    mu = np.array([0.5, 0.5])
    t = spectral.mixing_time_exact(P, mu)
    assert t > 1000
    curve = spectral.tv_curve(P, mu, 50)
    assert np.all(np.diff(curve) <= 0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_relaxation_and_mixing_times_are_consistent(seed):
    # reversible chains satisfy (tau_rel - 1) log(1 / 2eps) <= t_mix(eps) <= tau_rel log(1 / (eps pi_min))
    rng = np.random.default_rng(seed)
    inst, _ = random_instance_with_partition(int(rng.integers(2, 7)), 0.6, float(rng.uniform(0.1, 2)), 1, rng)
    rep = spectral.spectral_report(inst)
    eps = 1 / math.e
    pi_min = gibbs.brute_force(inst).probs.min()
    assert rep.t_mix >= (rep.tau_rel - 1) * math.log(1 / (2 * eps)) - 1e-9
    assert rep.t_mix <= math.ceil(rep.tau_rel * math.log(1 / (eps * pi_min)))
    assert rep.detailed_balance_residual < 1e-12 and rep.stationarity_residual < 1e-12


def test_comparison_bound_degenerate_partitions(lollipop):
    one = spectral.verify_comparison_bound(lollipop, BlockPartition.from_blocks(lollipop.graph, [range(6)]))
    assert one.tau_block == pytest.approx(1.0, abs=1e-12)
    assert one.tau_blocks[0] == pytest.approx(one.tau_glauber, rel=1e-10)
    assert one.holds
    single = spectral.verify_comparison_bound(lollipop, BlockPartition.singletons(lollipop.graph))
    assert single.tau_blocks == [1.0] * 6
    assert single.tau_block == pytest.approx(single.tau_glauber, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_comparison_bound_holds(seed):
    rng = np.random.default_rng(seed)
    inst, part = random_instance_with_partition(int(rng.integers(4, 9)), float(rng.uniform(0.25, 0.6)),
                                                float(rng.uniform(0.2, 1.5)), int(rng.integers(2, 5)), rng)
    assert spectral.verify_comparison_bound(inst, part).per_unit_holds


def test_single_vertex_tree_bound():
    inst = free_instance(1)
    rep = spectral.verify_relaxation_upper_bounds(inst, [0], np.ones(1))
    assert rep.tau == 1.0 and rep.bound >= 1 and rep.holds


def padded_tree(k, beta, couplings=None):
    """Path on 0..k-1 where each vertex also has two private outside neighbours."""
    edges = [(i, i + 1) for i in range(k - 1)]
    nxt = k
    for v in range(k):
        edges += [(v, nxt), (v, nxt + 1)]
        nxt += 2
    J = np.zeros(len(edges)) if couplings is None else couplings
    return Instance(Graph.from_edges(nxt, edges), J, beta)


@pytest.mark.parametrize("k", [2, 3, 5, 7])
def test_zero_beta_tree_has_product_chain_tau(k):
    inst = padded_tree(k, 0.0)
    rep = spectral.verify_relaxation_upper_bounds(inst, range(k), np.ones(inst.n))
    assert rep.tau == pytest.approx(k, rel=1e-10)
    assert rep.holds and rep.bound > 2 * rep.tau


def test_star_with_three_equal_couplings():
    inst, members = star_instance(3, np.full(3, 0.7), 0.8, outer_per_leaf=1, rng=np.random.default_rng(1))
    for cfg in (np.ones(inst.n), -np.ones(inst.n)):
        rep = spectral.verify_relaxation_upper_bounds(inst, members, cfg)
        assert rep.holds
        assert len(rep.stars) == 1 and rep.stars[0].R == 3 and rep.stars[0].holds


def test_single_leaf_star_bound_fails():
    # with one child the bound is exp(2 beta |J|), but two alternating blocks already give tau = 2 when J = 0
    inst, members = star_instance(1, np.zeros(1), 1.0)
    rep = spectral.verify_relaxation_upper_bounds(inst, members, np.ones(inst.n))
    (star,) = rep.stars
    assert star.R == 1 and star.tau == pytest.approx(2.0) and star.bound == 1.0
    assert not star.holds


def test_isolated_edge_tree_bound_fails():
    # both endpoints have degree 1, so the path weight is beta |J| and the bound is near 1
    inst = path_instance(2, J=0.1, beta=0.5)
    rep = spectral.verify_relaxation_upper_bounds(inst, [0, 1], np.ones(2))
    assert rep.bound == pytest.approx(math.exp(0.05))
    assert rep.tau > 1.9 and not rep.holds


def test_unicyclic_block_decomposition():
    rng = np.random.default_rng(3)
    edges = [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (0, 5), (4, 6)]
    inst = Instance(Graph.from_edges(7, edges), rng.standard_normal(len(edges)), 0.9)
    rep = spectral.verify_relaxation_upper_bounds(inst, range(5), random_spins(7, rng))
    assert rep.kind == "unicyclic"
    p1, p2 = rep.pieces["pieces"]
    assert p1 == [0] and p2 == [1, 2, 3, 4]
    assert rep.pieces["per_unit_holds"]


def test_unequal_blocks_need_per_unit_clocks():
    # two disconnected trees of sizes 4 and 3: with per-unit clocks the inequality is tight,
    # on the discrete-time relaxation times it is violated
    edges = [(0, 2), (0, 3), (0, 6), (1, 4), (1, 5)]
    J = np.array([0.04478674, 1.16672981, 0.8708296, 1.8529959, 0.51469921])
    inst = Instance(Graph.from_edges(7, edges), J, 0.5885435347988139)
    part = BlockPartition.from_blocks(inst.graph, [[0, 2, 3, 6], [1, 4, 5]])
    rep = spectral.verify_comparison_bound(inst, part)
    assert rep.per_unit_holds and abs(rep.per_unit_slack) < 1e-10
    assert not rep.holds and rep.relative_slack < -0.05


def test_equal_blocks_discrete_form_holds():
    rng = np.random.default_rng(8)
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]
    inst = Instance(Graph.from_edges(6, edges), rng.standard_normal(5), 0.9)
    part = BlockPartition.from_blocks(inst.graph, [[0, 1, 2], [3, 4, 5]])
    rep = spectral.verify_comparison_bound(inst, part)
    assert rep.holds and rep.per_unit_holds
