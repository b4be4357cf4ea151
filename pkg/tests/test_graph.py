import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpdg_attack.graph import (
    AttackAction,
    AttackBudget,
    DynGraphSequence,
    apply_action,
    average_adjacency,
    edge_diff,
    edge_set,
    edges_of,
    f1_score,
    perturbation_budget,
)

from conftest import random_sequence


def brute_f1(pred, truth):
    # counts by enumeration instead of set algebra
    tp = sum(1 for e in pred if e in truth)
    if not pred or not truth or tp == 0:
        return 0.0
    p, r = tp / len(pred), tp / len(truth)
    return 2 * p * r / (p + r)


class TestSequence:
    def test_rejects_asymmetric(self):
        a = np.zeros((1, 3, 3), dtype=np.uint8)
        a[0, 0, 1] = 1
        with pytest.raises(ValueError, match="symmetric"):
            DynGraphSequence(a)

    def test_rejects_diagonal_and_non_binary(self):
        a = np.zeros((1, 3, 3), dtype=np.uint8)
        a[0, 1, 1] = 1
        with pytest.raises(ValueError, match="diagonal"):
            DynGraphSequence(a)
        b = np.zeros((1, 3, 3), dtype=np.uint8)
        b[0, 0, 1] = b[0, 1, 0] = 2
        with pytest.raises(ValueError, match="0 or 1"):
            DynGraphSequence(b)

    def test_immutable(self, rng):
        seq = random_sequence(rng, 5, 2)
        with pytest.raises(ValueError):
            seq.adj[0, 0, 1] = 1

    def test_from_edge_sets(self):
        seq = DynGraphSequence.from_edge_sets(4, [[(1, 0), (2, 3)], []])
        assert edges_of(seq.adj[0]) == {(0, 1), (2, 3)}
        assert edges_of(seq.adj[1]) == frozenset()


class TestF1:
    def test_perfect(self):
        s = edge_set([(0, 1), (1, 2)])
        assert f1_score(s, s) == 1.0

    def test_disjoint(self):
        assert f1_score(edge_set([(0, 1)]), edge_set([(2, 3)])) == 0.0

    def test_hand_value(self):
        pred = edge_set([(0, 1), (1, 2), (2, 3), (3, 4)])
        truth = edge_set([(0, 1), (1, 2), (4, 5)])
        # P = 1/2, R = 2/3 -> F1 = 4/7
        assert f1_score(pred, truth) == pytest.approx(4 / 7, abs=1e-15)
        assert brute_f1(pred, truth) == pytest.approx(4 / 7, abs=1e-15)

    def test_degenerate(self):
        s = edge_set([(0, 1)])
        assert f1_score(frozenset(), s) == 0.0
        assert f1_score(s, frozenset()) == 0.0
        assert f1_score(frozenset(), frozenset()) == 0.0

    def test_matches_brute_force(self, rng):
        for _ in range(300):
            n = int(rng.integers(2, 21))
            pairs = list(itertools.combinations(range(n), 2))
            pred = frozenset(p for p in pairs if rng.random() < 0.3)
            truth = frozenset(p for p in pairs if rng.random() < 0.3)
            assert f1_score(pred, truth) == brute_f1(pred, truth)

    @given(st.sets(st.tuples(st.integers(0, 9), st.integers(0, 9))),
           st.sets(st.tuples(st.integers(0, 9), st.integers(0, 9))))
    def test_range_and_self(self, a, b):
        a, b = edge_set(a), edge_set(b)
        assert 0.0 <= f1_score(a, b) <= 1.0
        if a:
            assert f1_score(a, a) == 1.0


class TestApplyAction:
    def test_add_on_empty(self):
        seq = DynGraphSequence(np.zeros((3, 4, 4), dtype=np.uint8))
        out = apply_action(seq, AttackAction(0, 1, 2, 3))
        assert np.all(out.adj[:, 0, 1] == 1) and np.all(out.adj[:, 1, 0] == 1)
        assert out.adj.sum() == 6

    def test_self_loop_add_is_noop(self, rng):
        seq = random_sequence(rng, 5, 3, p=0.8)
        out = apply_action(seq, AttackAction(2, 2, 0, 1))
        assert np.all(np.diagonal(out.adj, axis1=1, axis2=2) == 0)
        assert np.all(out.adj[:, 0, 1] == 0) and np.all(out.adj[:, 1, 0] == 0)
        mask = np.ones((5, 5), bool)
        mask[0, 1] = mask[1, 0] = False
        assert np.array_equal(out.adj[:, mask], seq.adj[:, mask])

    def test_delete_wins_on_same_pair(self):
        seq = DynGraphSequence(np.zeros((2, 3, 3), dtype=np.uint8))
        out = apply_action(seq, AttackAction(0, 2, 2, 0))
        assert out.adj.sum() == 0

    def test_out_of_range(self, rng):
        seq = random_sequence(rng, 4, 2)
        with pytest.raises(IndexError):
            apply_action(seq, AttackAction(0, 4, 1, 2))
        with pytest.raises(IndexError):
            apply_action(seq, AttackAction(0, 1, -1, 2))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_idempotent_valid_and_bounded(self, seed):
        r = np.random.default_rng(seed)
        n, t = int(r.integers(2, 9)), int(r.integers(1, 5))
        seq = random_sequence(r, n, t)
        a = AttackAction(*(int(x) for x in r.integers(0, n, 4)))
        once = apply_action(seq, a)
        assert apply_action(once, a) == once
        adj = once.adj
        assert np.array_equal(adj, adj.transpose(0, 2, 1))
        assert not np.diagonal(adj, axis1=1, axis2=2).any()
        assert set(np.unique(adj)) <= {0, 1}
        assert edge_diff(seq, once) <= 2 * t

    def test_input_untouched(self, rng):
        seq = random_sequence(rng, 6, 2)
        before = seq.adj.copy()
        apply_action(seq, AttackAction(0, 5, 1, 2))
        assert np.array_equal(seq.adj, before)


class TestBudget:
    def test_haggle(self):
        assert perturbation_budget(274, 0.02, 1000) == 751
        b = AttackBudget.build(274, 0.02, 1000)
        assert (b.k_limit, b.interaction_limit) == (751, 3755)

    def test_facebook(self):
        assert perturbation_budget(1000, 0.002, 1000) == 1000
        assert AttackBudget.build(1000, 0.002, 1000).interaction_limit == 5000

    def test_zero_ratio(self):
        assert perturbation_budget(50, 0.0, 1000) == 0

    def test_ceiling(self):
        # 0.02 * 50^2 / 2 = 25 exactly; 0.021 * 2500 / 2 = 26.25 -> 27
        assert perturbation_budget(50, 0.02, 1000) == 25
        assert perturbation_budget(50, 0.021, 1000) == 27

    def test_interaction_below_k_rejected(self):
        with pytest.raises(ValueError):
            AttackBudget.build(50, 0.02, 1000, interaction_limit=10)

    @given(st.integers(2, 400), st.integers(2, 400), st.floats(0, 1), st.floats(0, 1),
           st.integers(0, 2000), st.integers(0, 2000))
    def test_monotone(self, n1, n2, d1, d2, c1, c2):
        n1, n2 = sorted((n1, n2))
        d1, d2 = sorted((d1, d2))
        c1, c2 = sorted((c1, c2))
        assert perturbation_budget(n1, d1, c1) <= perturbation_budget(n2, d1, c1)
        assert perturbation_budget(n1, d1, c1) <= perturbation_budget(n1, d2, c1)
        assert perturbation_budget(n1, d1, c1) <= perturbation_budget(n1, d1, c2)
        assert perturbation_budget(n1, d1, c1) == min(math.ceil(round(d1 * n1 * n1 / 2, 9)), c1)


class TestAverageAndEdges:
    def test_constant(self, rng):
        seq = random_sequence(rng, 6, 1)
        const = DynGraphSequence(np.repeat(seq.adj, 4, axis=0))
        assert np.array_equal(average_adjacency(const), seq.adj[0].astype(float))

    def test_half(self):
        seq = DynGraphSequence.from_edge_sets(3, [[(0, 1)], []])
        assert average_adjacency(seq)[0, 1] == 0.5

    def test_matches_elementwise_sum(self, rng):
        seq = random_sequence(rng, 10, 5)
        expected = np.zeros((10, 10))
        for u in range(10):
            for v in range(10):
                expected[u, v] = sum(int(seq.adj[t, u, v]) for t in range(5)) / 5
        avg = average_adjacency(seq)
        assert np.array_equal(avg, expected)
        assert np.array_equal(avg, avg.T)

    def test_edges_of(self):
        assert edges_of(np.zeros((4, 4))) == frozenset()
        m = np.zeros((4, 4), dtype=np.uint8)
        m[0, 1] = m[1, 0] = 1
        assert edges_of(m) == {(0, 1)}

    def test_edge_diff(self):
        a = DynGraphSequence.from_edge_sets(4, [[(0, 1)], [(0, 1)]])
        b = DynGraphSequence.from_edge_sets(4, [[(0, 1), (2, 3)], []])
        assert edge_diff(a, b) == 2
        assert edge_diff(a, a) == 0
