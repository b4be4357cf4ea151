"""Deterministic-policy actor-critic over sequence embeddings, with a shared replay buffer."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .graph import AttackAction
from .gse import GsePair, se_state
from .neural import (
    HIDDEN,
    MlpParams,
    Params,
    init_mlp,
    lstm_backward,
    mlp_backward,
    mlp_forward,
    sgd_step,
    soft_update,
)

ACTION_DIM = 4
REWARD_MODES = ("attack", "raw")
# keeps floor(sigma * N) strictly below N
_CLAMP_MARGIN = 1e-9


@dataclass(frozen=True)
class AgentConfig:
    batch_size: int = 64
    buffer_capacity: int = 100_000
    learning_rate: float = 1e-3
    tau: float = 0.01
    explore_every: int = 10
    reward_mode: Literal["attack", "raw"] = "attack"
    hidden_sizes: tuple[int, ...] = (64,)
    pooling: Literal["flatten", "mean"] = "flatten"

    def __post_init__(self):
        if self.batch_size < 1 or self.batch_size > self.buffer_capacity:
            raise ValueError("need 1 <= batch_size <= buffer_capacity")
        if self.explore_every < 1:
            raise ValueError("explore_every must be >= 1")
        if self.learning_rate <= 0 or not 0 <= self.tau <= 1:
            raise ValueError("need learning_rate > 0 and tau in [0, 1]")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        if self.pooling not in ("flatten", "mean"):
            raise ValueError(f"unknown pooling {self.pooling!r}")


class Transition(NamedTuple):
    X: np.ndarray
    action: AttackAction
    reward: float
    instance_id: int


class ReplayBuffer:
    """FIFO buffer with uniform sampling with replacement."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)
        self.pushes = 0

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> Transition:
        return self._items[i]

    def push(self, transition: Transition) -> None:
        self._items.append(transition)
        self.pushes += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if len(self._items) < batch_size:
            raise ValueError(f"buffer holds {len(self._items)} transitions, need {batch_size}")
        idx = rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]


def buffer_push(buffer: ReplayBuffer, transition: Transition) -> None:
    buffer.push(transition)


def buffer_sample(buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> list[Transition]:
    return buffer.sample(batch_size, rng)


def compute_reward(f_prev: float, f_next: float, mode: str = "attack") -> float:
    """``attack`` rewards F1 drops; ``raw`` keeps the plain difference f_next - f_prev."""
    if mode == "attack":
        return f_prev - f_next
    if mode == "raw":
        return f_next - f_prev
    raise ValueError(f"unknown reward mode {mode!r}")


class ActorCritic:
    """Policy and Q networks, their sequence-embedding LSTMs, and soft-updated targets."""

    def __init__(self, n_nodes: int, config: AgentConfig, rng: np.random.Generator):
        self.n_nodes = n_nodes
        self.config = config
        self.gse = GsePair.init(rng)
        state_dim = self.state_dim
        hidden = list(config.hidden_sizes)
        acts = ["relu"] * len(hidden)
        self.policy = init_mlp(rng, [state_dim] + hidden + [ACTION_DIM], acts + ["sigmoid"])
        self.q = init_mlp(rng, [ACTION_DIM + state_dim] + hidden + [1], acts + ["none"])
        self.policy_target = self.policy.copy()
        self.q_target = self.q.copy()
        self.lstm_p_target = self.gse.lstm_p.copy()
        self.lstm_q_target = self.gse.lstm_q.copy()

    @property
    def lstm_p(self):
        return self.gse.lstm_p

    @property
    def lstm_q(self):
        return self.gse.lstm_q

    @property
    def state_dim(self) -> int:
        return HIDDEN * self.n_nodes if self.config.pooling == "flatten" else HIDDEN

    def networks(self) -> dict[str, Params]:
        return {
            "lstm_p": self.lstm_p, "lstm_q": self.lstm_q,
            "policy": self.policy, "q": self.q,
            "lstm_p_target": self.lstm_p_target, "lstm_q_target": self.lstm_q_target,
            "policy_target": self.policy_target, "q_target": self.q_target,
        }

    def pool(self, S: np.ndarray) -> np.ndarray:
        """(B, N, 8) node states -> (B, state_dim)."""
        if self.config.pooling == "flatten":
            return S.reshape(S.shape[0], -1)
        return S.mean(axis=1)

    def unpool(self, ds: np.ndarray, n_nodes: int) -> np.ndarray:
        if self.config.pooling == "flatten":
            return ds.reshape(ds.shape[0], n_nodes, HIDDEN)
        return np.repeat(ds[:, None, :] / n_nodes, n_nodes, axis=1)

    def policy_output(self, X: np.ndarray) -> np.ndarray:
        """Sigmoid outputs in (0, 1)^4 for one (T, N, 8) embedding sequence."""
        S, _ = se_state(self.lstm_p, X[None])
        u, _ = mlp_forward(self.policy, self.pool(S))
        return u[0]

    def greedy_action(self, X: np.ndarray) -> AttackAction:
        return action_from_unit(self.policy_output(X), self.n_nodes)

    def q_values(self, X_batch: np.ndarray, unit_actions: np.ndarray, target: bool = False) -> np.ndarray:
        lstm, q = (self.lstm_q_target, self.q_target) if target else (self.lstm_q, self.q)
        S, _ = se_state(lstm, X_batch)
        out, _ = mlp_forward(q, np.concatenate([unit_actions, self.pool(S)], axis=1))
        return out[:, 0]


def action_from_unit(u: np.ndarray, n_nodes: int) -> AttackAction:
    scaled = np.clip(np.asarray(u, dtype=np.float64) * n_nodes, 0.0, n_nodes - _CLAMP_MARGIN)
    return AttackAction(*(int(v) for v in np.floor(scaled)))


def random_action(n_nodes: int, rng: np.random.Generator) -> AttackAction:
    return AttackAction(*(int(v) for v in rng.integers(0, n_nodes, size=ACTION_DIM)))


def select_action(agent: ActorCritic, X: np.ndarray, step_index: int, buffer_len: int,
                  rng: np.random.Generator) -> AttackAction:
    """Random while the buffer is short of one batch and on every explore_every-th step."""
    cfg = agent.config
    if buffer_len < cfg.batch_size or step_index % cfg.explore_every == 0:
        return random_action(agent.n_nodes, rng)
    return agent.greedy_action(X)


def _stack(batch: Sequence[Transition], n_nodes: int):
    if not batch:
        raise ValueError("empty batch")
    X = np.stack([tr.X for tr in batch])
    a = np.array([tr.action for tr in batch], dtype=np.float64) / n_nodes
    r = np.array([tr.reward for tr in batch], dtype=np.float64)
    return X, a, r


def q_loss_and_grads(agent: ActorCritic, batch: Sequence[Transition]):
    """Mean squared error between Q(S^q, a_b) and r_b, with gradients for q and lstm_q."""
    X, a, r = _stack(batch, agent.n_nodes)
    S, lstm_tape = se_state(agent.lstm_q, X)
    q_in = np.concatenate([a, agent.pool(S)], axis=1)
    Q, mlp_tape = mlp_forward(agent.q, q_in)
    err = Q[:, 0] - r
    loss = float(np.mean(err * err))
    dQ = (2.0 / len(batch)) * err[:, None]
    g_q, d_in = mlp_backward(mlp_tape, dQ)
    g_lstm, _ = lstm_backward(lstm_tape, agent.unpool(d_in[:, ACTION_DIM:], agent.n_nodes))
    return loss, {"q": g_q, "lstm_q": g_lstm}


def _policy_forward(agent: ActorCritic, X: np.ndarray):
    Sp, lstm_tape = se_state(agent.lstm_p, X)
    u, mlp_tape = mlp_forward(agent.policy, agent.pool(Sp))
    return u, lstm_tape, mlp_tape


def _q_gap(agent: ActorCritic, X: np.ndarray, a: np.ndarray, u: np.ndarray) -> np.ndarray:
    Sq, _ = se_state(agent.lstm_q_target, X)
    sq = agent.pool(Sq)
    q_b, _ = mlp_forward(agent.q_target, np.concatenate([a, sq], axis=1))
    q_theta, _ = mlp_forward(agent.q_target, np.concatenate([u, sq], axis=1))
    return np.maximum(0.0, q_b[:, 0] - q_theta[:, 0])


def policy_weights(agent: ActorCritic, batch: Sequence[Transition]) -> np.ndarray:
    """Clamped Q gap max(0, Q'(a_b) - Q'(a_theta)) on the target critic; a constant weight."""
    X, a, _ = _stack(batch, agent.n_nodes)
    u, _, _ = _policy_forward(agent, X)
    return _q_gap(agent, X, a, u)


def policy_loss_and_grads(agent: ActorCritic, batch: Sequence[Transition], weights: np.ndarray | None = None):
    """Mean over samples of MSE(a_b, a_theta) * d, gradients for policy and lstm_p.

    Actions are compared in units of N (both in [0, 1]). ``weights`` replaces d
    when given; d itself never receives gradient.
    """
    X, a, _ = _stack(batch, agent.n_nodes)
    u, lstm_tape, mlp_tape = _policy_forward(agent, X)
    if weights is None:
        weights = _q_gap(agent, X, a, u)
    mse = np.mean((u - a) ** 2, axis=1)
    loss = float(np.mean(mse * weights))
    du = (weights[:, None] * 2.0 * (u - a) / ACTION_DIM) / len(batch)
    g_pi, d_s = mlp_backward(mlp_tape, du)
    g_lstm, _ = lstm_backward(lstm_tape, agent.unpool(d_s, agent.n_nodes))
    return loss, {"policy": g_pi, "lstm_p": g_lstm}


def train_q_step(agent: ActorCritic, batch: Sequence[Transition]) -> float:
    cfg = agent.config
    loss, grads = q_loss_and_grads(agent, batch)
    sgd_step(agent.q, grads["q"], cfg.learning_rate)
    sgd_step(agent.lstm_q, grads["lstm_q"], cfg.learning_rate)
    soft_update(agent.q, agent.q_target, cfg.tau)
    soft_update(agent.lstm_q, agent.lstm_q_target, cfg.tau)
    return loss


def train_policy_step(agent: ActorCritic, batch: Sequence[Transition]) -> float:
    cfg = agent.config
    loss, grads = policy_loss_and_grads(agent, batch)
    sgd_step(agent.policy, grads["policy"], cfg.learning_rate)
    sgd_step(agent.lstm_p, grads["lstm_p"], cfg.learning_rate)
    soft_update(agent.policy, agent.policy_target, cfg.tau)
    soft_update(agent.lstm_p, agent.lstm_p_target, cfg.tau)
    return loss
