"""Query-only surrogate link predictors and the budgeted oracle that wraps them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DynGraphSequence, EdgeSet, average_adjacency, edges_of, f1_score

PREDICTOR_KINDS = ("persistence", "decay_frequency", "common_neighbor")


class QueryBudgetExhausted(RuntimeError):
    """Raised when an oracle is queried after its interaction limit is used up."""


@dataclass(frozen=True)
class PredictorParams:
    kind: str = "decay_frequency"
    decay: float = 0.9
    threshold: float = 0.5
    bin_threshold: float = 0.5

    def __post_init__(self):
        if self.kind not in PREDICTOR_KINDS:
            raise ValueError(f"unknown predictor kind {self.kind!r}; choose from {PREDICTOR_KINDS}")
        if not 0 < self.decay <= 1:
            raise ValueError("decay must lie in (0, 1]")
        if not 0 <= self.threshold <= 1:
            raise ValueError("threshold must lie in [0, 1]")
        if not 0 < self.bin_threshold < 1:
            raise ValueError("bin_threshold must lie in (0, 1)")


def persistence_predict(seq: DynGraphSequence) -> EdgeSet:
    return edges_of(seq.adj[-1])


def decay_scores(seq: DynGraphSequence, decay: float) -> np.ndarray:
    T = seq.n_snapshots
    weighted = np.zeros(seq.adj.shape[1:], dtype=np.float64)
    total = 0.0
    # same accumulation order for numerator and denominator, so an
    # always-present pair scores exactly 1
    for t in range(T):
        w = decay ** (T - 1 - t)
        weighted += w * seq.adj[t]
        total += w
    return weighted / total


def decay_frequency_predict(seq: DynGraphSequence, decay: float = 0.9, threshold: float = 0.5) -> EdgeSet:
    """Predict pairs whose exponentially decayed presence frequency reaches ``threshold``."""
    scores = decay_scores(seq, decay)
    hit = scores >= threshold
    np.fill_diagonal(hit, False)
    return edges_of(hit)


def common_neighbor_predict(seq: DynGraphSequence, bin_threshold: float = 0.5) -> EdgeSet:
    """Keep the binarized average graph and add the m best common-neighbor candidates.

    m is the edge count of the last snapshot. Candidates with no shared
    neighbor are never predicted; ties go to the lower canonical pair.
    """
    b = (average_adjacency(seq) >= bin_threshold).astype(np.int64)
    np.fill_diagonal(b, 0)
    kept = edges_of(b)
    m = len(edges_of(seq.adj[-1]))
    if m == 0:
        return kept
    scores = b @ b
    iu, ju = np.triu_indices(seq.n_nodes, k=1)
    cand = (b[iu, ju] == 0) & (scores[iu, ju] > 0)
    iu, ju, s = iu[cand], ju[cand], scores[iu[cand], ju[cand]]
    # lexsort: last key is primary; pairs already in canonical order
    order = np.lexsort((ju, iu, -s))[:m]
    return kept | frozenset(zip(iu[order].tolist(), ju[order].tolist()))


def predict(params: PredictorParams, seq: DynGraphSequence) -> EdgeSet:
    if params.kind == "persistence":
        return persistence_predict(seq)
    if params.kind == "decay_frequency":
        return decay_frequency_predict(seq, params.decay, params.threshold)
    return common_neighbor_predict(seq, params.bin_threshold)


class LpdgOracle:
    """Black-box link predictor that charges one unit of budget per query."""

    def __init__(self, params: PredictorParams, truth: EdgeSet, query_limit: int):
        if query_limit < 0:
            raise ValueError("query_limit must be non-negative")
        self.params = params
        self.truth = frozenset(truth)
        self.query_limit = query_limit
        self.query_count = 0

    @property
    def remaining(self) -> int:
        return self.query_limit - self.query_count

    def query(self, seq: DynGraphSequence) -> tuple[EdgeSet, float]:
        if self.query_count >= self.query_limit:
            raise QueryBudgetExhausted(f"interaction limit {self.query_limit} reached")
        self.query_count += 1
        pred = predict(self.params, seq)
        return pred, f1_score(pred, self.truth)


def query(oracle: LpdgOracle, seq: DynGraphSequence) -> tuple[EdgeSet, float]:
    return oracle.query(seq)
