"""Dynamic graph sequences, edge-pair perturbations, F1 and budget arithmetic."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

EdgeSet = frozenset  # frozenset[tuple[int, int]] of canonical (min, max) pairs


def edge_set(pairs: Iterable[tuple[int, int]]) -> EdgeSet:
    """Canonicalize undirected pairs; self-loops are dropped."""
    return frozenset((min(u, v), max(u, v)) for u, v in pairs if u != v)


@dataclass(frozen=True, eq=False)
class DynGraphSequence:
    """T symmetric binary adjacency snapshots over a fixed node set.

    The backing array has shape (T, N, N), dtype uint8, and is read-only.
    """

    adj: np.ndarray

    def __post_init__(self):
        a = np.array(self.adj, dtype=np.uint8, copy=True)
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise ValueError(f"expected (T, N, N) adjacency stack, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ValueError("sequence needs at least one snapshot")
        if a.shape[1] < 2:
            raise ValueError("sequence needs at least two nodes")
        if np.any(a > 1):
            raise ValueError("adjacency entries must be 0 or 1")
        if not np.array_equal(a, a.transpose(0, 2, 1)):
            raise ValueError("adjacency snapshots must be symmetric")
        if np.any(np.diagonal(a, axis1=1, axis2=2)):
            raise ValueError("adjacency snapshots must have a zero diagonal")
        a.flags.writeable = False
        object.__setattr__(self, "adj", a)

    @property
    def n_nodes(self) -> int:
        return self.adj.shape[1]

    @property
    def n_snapshots(self) -> int:
        return self.adj.shape[0]

    def snapshot(self, t: int) -> np.ndarray:
        return self.adj[t]

    def __eq__(self, other):
        if not isinstance(other, DynGraphSequence):
            return NotImplemented
        return np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash((self.adj.shape, self.adj.tobytes()))

    @classmethod
    def from_edge_sets(cls, n_nodes: int, snapshots: Iterable[Iterable[tuple[int, int]]]) -> DynGraphSequence:
        snaps = list(snapshots)
        a = np.zeros((len(snaps), n_nodes, n_nodes), dtype=np.uint8)
        for t, edges in enumerate(snaps):
            for u, v in edge_set(edges):
                a[t, u, v] = a[t, v, u] = 1
        return cls(a)


class AttackAction(NamedTuple):
    """Add edge (add_u, add_v) and delete edge (del_u, del_v) in every snapshot."""

    add_u: int
    add_v: int
    del_u: int
    del_v: int


@dataclass(frozen=True)
class AttackBudget:
    delta: float
    n_cap: int
    k_limit: int
    interaction_limit: int

    @classmethod
    def build(cls, n_nodes: int, delta: float, n_cap: int, interaction_limit: int | None = None,
              interaction_multiplier: float = 5.0) -> AttackBudget:
        k = perturbation_budget(n_nodes, delta, n_cap)
        limit = interaction_limit if interaction_limit is not None else int(round(interaction_multiplier * k))
        if limit < k:
            raise ValueError(f"interaction limit {limit} is below the perturbation budget {k}")
        return cls(delta=delta, n_cap=n_cap, k_limit=k, interaction_limit=limit)


def f1_score(pred: EdgeSet, truth: EdgeSet) -> float:
    """F1 of predicted against true edges; 0 when either set is empty."""
    if not pred or not truth:
        return 0.0
    hits = len(pred & truth)
    if hits == 0:
        return 0.0
    precision = hits / len(pred)
    recall = hits / len(truth)
    return 2 * precision * recall / (precision + recall)


def apply_action(seq: DynGraphSequence, a: AttackAction) -> DynGraphSequence:
    n = seq.n_nodes
    for idx in a:
        if not 0 <= idx < n:
            raise IndexError(f"action {tuple(a)} has an index outside [0, {n})")
    adj = seq.adj.copy()
    u, v, du, dv = (int(i) for i in a)
    if u != v:
        adj[:, u, v] = adj[:, v, u] = 1
    # deletion runs second so it wins when both halves target the same pair
    if du != dv:
        adj[:, du, dv] = adj[:, dv, du] = 0
    return DynGraphSequence(adj)


def perturbation_budget(n_nodes: int, delta: float, n_cap: int) -> int:
    if n_nodes < 2 or not 0 <= delta <= 1 or n_cap < 0:
        raise ValueError("need n_nodes >= 2, 0 <= delta <= 1, n_cap >= 0")
    # round away float noise before the ceiling, e.g. 0.02 * 274**2 / 2
    ratio_limit = math.ceil(round(delta * n_nodes * n_nodes / 2, 9))
    return min(ratio_limit, n_cap)


def average_adjacency(seq: DynGraphSequence) -> np.ndarray:
    return seq.adj.astype(np.float64).mean(axis=0)


def edges_of(matrix: np.ndarray) -> EdgeSet:
    m = np.asarray(matrix)
    rows, cols = np.nonzero(np.triu(m, k=1))
    return frozenset(zip(rows.tolist(), cols.tolist()))


def edge_diff(seq_a: DynGraphSequence, seq_b: DynGraphSequence) -> int:
    """Number of differing upper-triangle entries, summed over snapshots."""
    if seq_a.adj.shape != seq_b.adj.shape:
        raise ValueError("sequences differ in shape")
    iu = np.triu_indices(seq_a.n_nodes, k=1)
    return int(np.count_nonzero(seq_a.adj[:, iu[0], iu[1]] != seq_b.adj[:, iu[0], iu[1]]))
