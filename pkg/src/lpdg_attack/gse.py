"""Graph sequential embedding: static propagated-degree features and per-snapshot embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DynGraphSequence, average_adjacency
from .neural import HIDDEN, LstmParams, LstmTape, init_lstm, lstm_forward, static_batchnorm

N_NOISE = 4
BN_EPS = 1e-5


def degree_feature(seq_clean: DynGraphSequence, rng_seed: int | np.random.SeedSequence) -> np.ndarray:
    """N x 8 feature: four standard-normal noise columns, the all-ones column,
    then batch-normalized one-, two- and three-hop propagated degrees of the
    average clean adjacency.
    """
    avg = average_adjacency(seq_clean)
    n = seq_clean.n_nodes
    d = [np.ones(n)]
    for _ in range(3):
        d.append(avg @ d[-1])
    noise = np.random.default_rng(rng_seed).standard_normal((n, N_NOISE))
    cols = [d[0]] + [static_batchnorm(v, BN_EPS) for v in d[1:]]
    feature = np.column_stack([noise] + cols)
    feature.flags.writeable = False
    return feature


def embed_sequence(seq: DynGraphSequence, feature: np.ndarray) -> np.ndarray:
    """(T, N, 8) stack of A_t @ F."""
    if feature.shape != (seq.n_nodes, HIDDEN):
        raise ValueError(f"feature must be ({seq.n_nodes}, {HIDDEN}), got {feature.shape}")
    return seq.adj.astype(np.float64) @ feature


def se_state(lstm: LstmParams, X: np.ndarray) -> tuple[np.ndarray, LstmTape]:
    return lstm_forward(lstm, X)


@dataclass
class GsePair:
    lstm_p: LstmParams
    lstm_q: LstmParams

    @classmethod
    def init(cls, rng: np.random.Generator) -> GsePair:
        return cls(lstm_p=init_lstm(rng), lstm_q=init_lstm(rng))
