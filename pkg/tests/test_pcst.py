"""Tests for the prize-collecting Steiner forest engine.

The quality oracle enumerates every connected node subset of small
instances, prices its minimum spanning tree, and checks the classic
moat-growing guarantee: cost(F) + 2*prize(excluded) is at most twice
the optimal cost-version objective.
"""
import itertools

import numpy as np
import pytest

from gbgp.graph import Graph, connected_components
from gbgp.pcst import PcstResult, grow_forest, strong_prune


def mst_cost(nodes, edges):
    """Kruskal on the subgraph induced by ``nodes``; None if disconnected."""
    nodes = list(nodes)
    idx = {u: i for i, u in enumerate(nodes)}
    parent = list(range(len(nodes)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pool = sorted(
        (c, u, v) for u, v, c in edges if u in idx and v in idx
    )
    total, joined = 0.0, 0
    for c, u, v in pool:
        ru, rv = find(idx[u]), find(idx[v])
        if ru != rv:
            parent[ru] = rv
            total += c
            joined += 1
    return total if joined == len(nodes) - 1 else None


def cost_version_opt(n, edges, prizes):
    """min over connected S (or empty) of mst(S) + prize outside S."""
    total_prize = sum(prizes)
    best = total_prize  # empty selection
    for size in range(1, n + 1):
        for sub in itertools.combinations(range(n), size):
            tree = mst_cost(sub, edges)
            if tree is None:
                continue
            value = tree + total_prize - sum(prizes[u] for u in sub)
            best = min(best, value)
    return best


def forest_cost_version(result: PcstResult, edges_with_cost, prizes):
    cost_of = {(min(u, v), max(u, v)): c for u, v, c in edges_with_cost}
    tree_cost = sum(cost_of[e] for e in result.edges)
    included = set(result.nodes)
    excluded_prize = sum(p for u, p in enumerate(prizes) if u not in included)
    return tree_cost, excluded_prize


def random_instance(rng, n):
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.add((j, i))
    for _ in range(n // 2):
        u, v = rng.integers(0, n, size=2)
        if u != v:
            edges.add((min(u, v), max(u, v)))
    costs = {e: float(rng.uniform(0.2, 2.0)) for e in edges}
    prizes = [float(rng.uniform(0, 3.0)) if rng.random() < 0.7 else 0.0 for _ in range(n)]
    ewc = [(u, v, costs[(u, v)]) for u, v in sorted(edges)]
    return ewc, prizes


class TestGrowForestExamples:
    def test_star_collects_everything(self):
        # center prize 0, three leaves prize 10, unit costs
        edges = [(0, 1), (0, 2), (0, 3)]
        result = grow_forest(4, edges, [1.0, 1.0, 1.0], [0.0, 10.0, 10.0, 10.0])
        assert result.nodes == [0, 1, 2, 3]
        assert result.edges == [(0, 1), (0, 2), (0, 3)]

    def test_all_zero_prizes_empty(self):
        result = grow_forest(3, [(0, 1), (1, 2)], [1.0, 1.0], [0.0, 0.0, 0.0])
        assert result.nodes == []
        assert result.edges == []

    def test_isolated_prized_node(self):
        result = grow_forest(1, [], [], [5.0])
        assert result.nodes == [0]
        assert result.edges == []

    def test_expensive_edges_keep_best_singleton(self):
        # ties on prize resolve toward the lowest node id
        edges = [(0, 1), (1, 2)]
        result = grow_forest(3, edges, [100.0, 100.0], [9.0, 0.0, 9.0])
        assert result.nodes == [0]

    def test_bridge_through_zero_prize_node(self):
        # cheap edges: worth paying to connect both prized endpoints
        edges = [(0, 1), (1, 2)]
        result = grow_forest(3, edges, [0.1, 0.1], [1.0, 0.0, 1.0])
        assert result.nodes == [0, 1, 2]

    def test_two_trees_allowed(self):
        # two prize islands separated by a very costly edge
        edges = [(0, 1), (1, 2), (2, 3), (3, 4)]
        costs = [0.1, 50.0, 50.0, 0.1]
        prizes = [4.0, 4.0, 0.0, 4.0, 4.0]
        result = grow_forest(5, edges, costs, prizes, num_trees=2)
        assert len(result.components) == 2
        assert result.nodes == [0, 1, 3, 4]

    def test_rooted_reaches_prize(self):
        edges = [(0, 1), (1, 2)]
        result = grow_forest(3, edges, [0.5, 0.5], [0.0, 0.0, 3.0], root=0)
        assert 0 in result.nodes
        assert result.nodes == [0, 1, 2]

    def test_rooted_keeps_root_when_nothing_worth_it(self):
        edges = [(0, 1)]
        result = grow_forest(2, edges, [10.0], [0.0, 1.0], root=0)
        assert result.nodes == [0]


class TestGrowForestProperties:
    @pytest.mark.parametrize("seed", range(30))
    def test_output_is_valid_forest(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 11))
        ewc, prizes = random_instance(rng, n)
        g = int(rng.integers(1, 3))
        result = grow_forest(n, [(u, v) for u, v, _ in ewc], [c for _, _, c in ewc], prizes, num_trees=g)
        assert len(result.components) <= g
        graph = Graph(n, ewc)
        for nodes, edges in result.components:
            assert len(edges) == len(nodes) - 1
            comps = connected_components(graph, nodes)
            assert len(comps) == 1
            for u, v in edges:
                assert u in nodes and v in nodes

    @pytest.mark.parametrize("seed", range(30))
    def test_two_approximation_cost_version(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(3, 9))
        ewc, prizes = random_instance(rng, n)
        result = grow_forest(n, [(u, v) for u, v, _ in ewc], [c for _, _, c in ewc], prizes)
        tree_cost, excluded = forest_cost_version(result, ewc, prizes)
        opt = cost_version_opt(n, ewc, prizes)
        assert tree_cost + 2.0 * excluded <= 2.0 * opt + 1e-9

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        ewc, prizes = random_instance(rng, 9)
        args = (9, [(u, v) for u, v, _ in ewc], [c for _, _, c in ewc], prizes)
        first = grow_forest(*args)
        second = grow_forest(*args)
        assert first.nodes == second.nodes
        assert first.edges == second.edges

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            grow_forest(2, [(0, 1)], [0.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            grow_forest(2, [(0, 1)], [1.0], [-1.0, 1.0])
        with pytest.raises(ValueError):
            grow_forest(2, [(0, 1)], [1.0], [1.0, 1.0], root=5)


class TestStrongPrune:
    def test_prunes_losing_arm(self):
        # 0 -1- 1 -5- 2 : node 2 prize 3 cannot pay the cost-5 edge
        nodes = [0, 1, 2]
        tree = [(0, 1, 1.0), (1, 2, 5.0)]
        prizes = [2.0, 2.0, 3.0]
        kept, edges, _ = strong_prune(nodes, tree, prizes)
        assert kept == [0, 1]
        assert edges == [(0, 1)]

    def test_keeps_whole_tree_when_profitable(self):
        nodes = [0, 1, 2]
        tree = [(0, 1, 0.5), (1, 2, 0.5)]
        prizes = [2.0, 2.0, 2.0]
        kept, edges, _ = strong_prune(nodes, tree, prizes)
        assert kept == [0, 1, 2]

    def test_picks_best_subtree_not_containing_dfs_root(self):
        # best subtree is {2,3}; DFS starts from node 0
        nodes = [0, 1, 2, 3]
        tree = [(0, 1, 10.0), (1, 2, 10.0), (2, 3, 0.1)]
        prizes = [1.0, 0.0, 5.0, 5.0]
        kept, edges, _ = strong_prune(nodes, tree, prizes)
        assert kept == [2, 3]
        assert edges == [(2, 3)]

    def test_forced_root_kept_even_at_loss(self):
        nodes = [0, 1]
        tree = [(0, 1, 100.0)]
        prizes = [0.0, 1.0]
        kept, edges, _ = strong_prune(nodes, tree, prizes, force=0)
        assert kept == [0]
        assert edges == []

    def test_zero_margin_excluded(self):
        nodes = [0, 1]
        tree = [(0, 1, 1.0)]
        prizes = [2.0, 1.0]
        kept, _, _ = strong_prune(nodes, tree, prizes)
        assert kept == [0]
