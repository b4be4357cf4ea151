"""Attack loop: per-instance attempts under perturbation and query budgets, run
round-robin over several instances that share one agent and one replay buffer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .agent import (
    ActorCritic,
    ReplayBuffer,
    Transition,
    compute_reward,
    random_action,
    select_action,
    train_policy_step,
    train_q_step,
)
from .graph import AttackAction, DynGraphSequence, EdgeSet, apply_action
from .gse import embed_sequence
from .predictors import LpdgOracle

StepSink = Callable[[dict], None]


@dataclass
class AttackInstance:
    """One clean sequence, its ground truth and the oracle that scores it."""

    instance_id: int
    clean: DynGraphSequence
    truth: EdgeSet
    oracle: LpdgOracle
    feature: np.ndarray
    k_limit: int
    current: Optional[DynGraphSequence] = None
    attempt: int = 0
    step: int = 0
    steps_taken: int = 0
    f_current: float = float("nan")
    clean_f1: Optional[float] = None
    attempt_best: float = float("nan")
    best_f1: float = float("nan")
    attempt_bests: list = field(default_factory=list)

    def query_clean(self) -> float:
        """Charge one query for the unperturbed prediction; reused by every attempt."""
        if self.clean_f1 is None:
            _, self.clean_f1 = self.oracle.query(self.clean)
            self.best_f1 = self.clean_f1
        return self.clean_f1

    @property
    def attempt_open(self) -> bool:
        return self.attempt > 0 and self.step < self.k_limit

    @property
    def can_step(self) -> bool:
        return self.clean_f1 is not None and self.k_limit > 0 and self.oracle.remaining > 0

    def begin_attempt(self) -> None:
        self.current = self.clean
        self.attempt += 1
        self.step = 0
        self.f_current = self.clean_f1
        self.attempt_best = self.clean_f1
        self.attempt_bests.append(self.clean_f1)


def attack_step(instance: AttackInstance, agent: Optional[ActorCritic], buffer: Optional[ReplayBuffer],
                rng: np.random.Generator, sample_rng: Optional[np.random.Generator] = None,
                reward_mode: str = "attack") -> dict:
    """One perturbation, one query, one buffer push, then one Q and one policy update.

    With ``agent=None`` the action is uniform random and nothing is learned.
    """
    if not instance.can_step:
        raise RuntimeError(f"instance {instance.instance_id} has no queries or perturbations left")
    if not instance.attempt_open:
        instance.begin_attempt()
    n = instance.clean.n_nodes
    X = embed_sequence(instance.current, instance.feature)
    if agent is None:
        action = random_action(n, rng)
    else:
        reward_mode = agent.config.reward_mode
        action = select_action(agent, X, instance.steps_taken, len(buffer), rng)

    nxt = apply_action(instance.current, action)
    _, f_next = instance.oracle.query(nxt)
    f_prev = instance.f_current
    reward = compute_reward(f_prev, f_next, reward_mode)

    instance.current = nxt
    instance.f_current = f_next
    instance.step += 1
    instance.steps_taken += 1
    instance.attempt_best = min(instance.attempt_best, f_next)
    instance.attempt_bests[-1] = instance.attempt_best
    instance.best_f1 = min(instance.best_f1, f_next)

    q_loss = policy_loss = None
    if buffer is not None:
        buffer.push(Transition(X, action, reward, instance.instance_id))
    if agent is not None and len(buffer) >= agent.config.batch_size:
        batch = buffer.sample(agent.config.batch_size, sample_rng)
        q_loss = train_q_step(agent, batch)
        policy_loss = train_policy_step(agent, batch)

    return {
        "event": "step",
        "instance": instance.instance_id,
        "attempt": instance.attempt,
        "step": instance.step,
        "action": list(action),
        "f_prev": f_prev,
        "f_next": f_next,
        "reward": reward,
        "queries": instance.oracle.query_count,
        "q_loss": q_loss,
        "policy_loss": policy_loss,
    }


def _clean_record(instance: AttackInstance) -> dict:
    return {
        "event": "clean",
        "instance": instance.instance_id,
        "f_next": instance.clean_f1,
        "queries": instance.oracle.query_count,
    }


def run_attempt(instance: AttackInstance, agent: Optional[ActorCritic], buffer: Optional[ReplayBuffer],
                rng: np.random.Generator, sample_rng: Optional[np.random.Generator] = None,
                sink: Optional[StepSink] = None) -> float:
    """Restart from the clean sequence and take up to K steps; returns the attempt minimum."""
    if instance.clean_f1 is None:
        instance.query_clean()
        if sink:
            sink(_clean_record(instance))
    instance.begin_attempt()
    while instance.attempt_open and instance.can_step:
        rec = attack_step(instance, agent, buffer, rng, sample_rng)
        if sink:
            sink(rec)
    return instance.attempt_best


@dataclass
class InstanceResult:
    instance_id: int
    clean_f1: float
    best_f1: float
    queries: int
    steps: int
    attempts: int
    attempt_bests: list


def _result(inst: AttackInstance) -> InstanceResult:
    return InstanceResult(inst.instance_id, inst.clean_f1, inst.best_f1, inst.oracle.query_count,
                          inst.steps_taken, inst.attempt, list(inst.attempt_bests))


def run_metp(instances: list[AttackInstance], agent: Optional[ActorCritic], buffer: Optional[ReplayBuffer],
             rng: np.random.Generator, sample_rng: Optional[np.random.Generator] = None,
             sink: Optional[StepSink] = None) -> list[InstanceResult]:
    """Round-robin one step per instance until every instance runs out of queries."""
    if not instances:
        raise ValueError("need at least one instance")
    for inst in instances:
        if inst.clean_f1 is None and inst.oracle.remaining > 0:
            inst.query_clean()
            if sink:
                sink(_clean_record(inst))
    active = [inst for inst in instances if inst.can_step]
    while active:
        for inst in active:
            rec = attack_step(inst, agent, buffer, rng, sample_rng)
            if sink:
                sink(rec)
        active = [inst for inst in active if inst.can_step]
    return [_result(inst) for inst in instances]


def random_attack_baseline(instance: AttackInstance, rng: np.random.Generator,
                           sink: Optional[StepSink] = None) -> InstanceResult:
    """Uniform random add/delete pairs through the same attempt and budget structure."""
    return run_metp([instance], None, None, rng, sink=sink)[0]


def noop_action(seq: DynGraphSequence) -> Optional[AttackAction]:
    """Self-loop add plus deletion of a pair absent from every snapshot; None if the graph is complete."""
    n = seq.n_nodes
    present = seq.adj.any(axis=0)
    for u in range(n):
        for v in range(u + 1, n):
            if not present[u, v]:
                return AttackAction(0, 0, u, v)
    return None
