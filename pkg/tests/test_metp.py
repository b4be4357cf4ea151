import numpy as np
import pytest

from lpdg_attack.agent import ActorCritic, AgentConfig, ReplayBuffer
from lpdg_attack.data import gen_synthetic
from lpdg_attack.graph import AttackAction, AttackBudget, DynGraphSequence, edge_diff, edge_set
from lpdg_attack.gse import degree_feature
from lpdg_attack.metp import (
    AttackInstance,
    attack_step,
    noop_action,
    random_attack_baseline,
    run_attempt,
    run_metp,
)
from lpdg_attack.predictors import LpdgOracle, PredictorParams


def make_instances(n=8, t=3, count=3, k=4, limit=None, seed=0, kind="decay_frequency"):
    data = gen_synthetic(n, t, 0.3, 0.2, seed, count)
    limit = limit if limit is not None else 5 * k
    return [
        AttackInstance(i, d.sequence, d.truth, LpdgOracle(PredictorParams(kind=kind), d.truth, limit),
                       degree_feature(d.sequence, seed + i), k)
        for i, d in enumerate(data)
    ]


def make_agent(n, seed=0, **cfg):
    cfg.setdefault("batch_size", 4)
    cfg.setdefault("hidden_sizes", (8,))
    config = AgentConfig(**cfg)
    return ActorCritic(n, config, np.random.default_rng(seed)), ReplayBuffer(config.buffer_capacity)


class TestAttackStep:
    def test_k_steps_cost_k_queries(self):
        inst = make_instances(count=1, k=4)[0]
        agent, buffer = make_agent(8)
        rng = np.random.default_rng(1)
        inst.query_clean()
        for k in range(1, 5):
            rec = attack_step(inst, agent, buffer, rng, np.random.default_rng(2))
            assert rec["queries"] == 1 + k and rec["step"] == k

    def test_attempt_best_non_increasing(self):
        inst = make_instances(count=1, k=6, limit=30)[0]
        rng = np.random.default_rng(3)
        inst.query_clean()
        inst.begin_attempt()
        bests = [inst.attempt_best]
        while inst.attempt_open:
            attack_step(inst, None, None, rng)
            bests.append(inst.attempt_best)
        assert all(b <= a for a, b in zip(bests, bests[1:]))
        assert bests[-1] <= inst.clean_f1

    def test_noop_action_zero_reward(self, monkeypatch):
        inst = make_instances(count=1)[0]
        action = noop_action(inst.clean)
        assert action is not None
        import lpdg_attack.metp as metp
        monkeypatch.setattr(metp, "random_action", lambda n, rng: action)
        inst.query_clean()
        rec = attack_step(inst, None, None, np.random.default_rng(0))
        assert rec["reward"] == 0.0 and rec["f_next"] == inst.clean_f1
        assert inst.current == inst.clean

    def test_records_and_buffer(self):
        inst = make_instances(count=1)[0]
        agent, buffer = make_agent(8)
        inst.query_clean()
        rec = attack_step(inst, agent, buffer, np.random.default_rng(0), np.random.default_rng(1))
        assert set(rec) >= {"event", "instance", "attempt", "step", "action", "f_next", "reward", "queries",
                            "q_loss", "policy_loss"}
        assert len(buffer) == 1 and rec["q_loss"] is None

    def test_exhausted_instance_rejected(self):
        inst = make_instances(count=1, k=2, limit=2)[0]
        inst.query_clean()
        attack_step(inst, None, None, np.random.default_rng(0))
        with pytest.raises(RuntimeError):
            attack_step(inst, None, None, np.random.default_rng(0))


class TestAttempts:
    def test_zero_budget(self):
        inst = make_instances(count=1, k=0, limit=5)[0]
        best = run_attempt(inst, None, None, np.random.default_rng(0))
        assert best == inst.clean_f1 and inst.steps_taken == 0
        assert inst.oracle.query_count == 1

    def test_restart_from_clean_and_edge_diff(self):
        inst = make_instances(count=1, k=3, limit=40)[0]
        rng = np.random.default_rng(5)
        for _ in range(4):
            run_attempt(inst, None, None, rng)
            assert edge_diff(inst.current, inst.clean) <= 2 * inst.clean.n_snapshots * inst.k_limit
        assert inst.attempt == 4 and inst.steps_taken == 12

    def test_five_k_with_clean_query(self):
        # the clean query takes one slot of I = 5K: four full attempts and a fifth of K - 1 steps
        k = 4
        inst = make_instances(count=1, k=k, limit=5 * k)[0]
        res = random_attack_baseline(inst, np.random.default_rng(0))
        assert res.queries == 5 * k and res.steps == 5 * k - 1 and res.attempts == 5
        inst = make_instances(count=1, k=k, limit=5 * k + 1)[0]
        res = random_attack_baseline(inst, np.random.default_rng(0))
        assert res.steps == 5 * k and res.attempts == 5

    def test_best_is_min_over_queries(self):
        inst = make_instances(count=1, k=3, limit=16)[0]
        log = []
        res = random_attack_baseline(inst, np.random.default_rng(2), sink=log.append)
        assert res.best_f1 == min(rec["f_next"] for rec in log)
        assert log[0]["event"] == "clean" and res.best_f1 <= res.clean_f1
        assert res.best_f1 == min(res.attempt_bests)


class TestRunMetp:
    def test_accounting_and_fairness(self):
        insts = make_instances(count=3, k=4, limit=17)
        agent, buffer = make_agent(8)
        log = []
        results = run_metp(insts, agent, buffer, np.random.default_rng(0), np.random.default_rng(1), sink=log.append)
        assert buffer.pushes == sum(r.steps for r in results)
        for r in results:
            assert r.queries == 1 + r.steps <= 17
        steps = [rec for rec in log if rec["event"] == "step"]
        # round-robin: instance order cycles 0, 1, 2
        assert [rec["instance"] for rec in steps[:9]] == [0, 1, 2] * 3
        done = {}
        for pos, rec in enumerate(steps):
            done[rec["instance"]] = pos
        assert max(done.values()) - min(done.values()) < len(insts)

    def test_unequal_budgets_drop_out(self):
        insts = make_instances(count=2, k=2)
        insts[1].oracle = LpdgOracle(insts[1].oracle.params, insts[1].truth, 3)
        results = run_metp(insts, None, None, np.random.default_rng(0))
        assert [r.queries for r in results] == [10, 3]

    def test_single_instance_equals_gse_ablation(self):
        def run():
            inst = make_instances(count=1, k=3, limit=15)[0]
            agent, buffer = make_agent(8, seed=4)
            log = []
            run_metp([inst], agent, buffer, np.random.default_rng(0), np.random.default_rng(1), sink=log.append)
            return log
        assert run() == run()

    def test_training_starts_once_buffer_fills(self):
        insts = make_instances(count=2, k=4, limit=13)
        agent, buffer = make_agent(8, batch_size=5)
        log = []
        run_metp(insts, agent, buffer, np.random.default_rng(0), np.random.default_rng(1), sink=log.append)
        steps = [rec for rec in log if rec["event"] == "step"]
        assert all(rec["q_loss"] is None for rec in steps[:4])
        assert all(rec["q_loss"] is not None and rec["policy_loss"] is not None for rec in steps[4:])

    def test_deterministic(self):
        def run():
            insts = make_instances(count=2, k=3, limit=10)
            agent, buffer = make_agent(8, seed=1)
            log = []
            run_metp(insts, agent, buffer, np.random.default_rng(0), np.random.default_rng(1), sink=log.append)
            return log
        assert run() == run()

    def test_empty_schedule(self):
        with pytest.raises(ValueError):
            run_metp([], None, None, np.random.default_rng(0))


class TestRandomBaseline:
    def test_same_budget_as_agent(self):
        a = make_instances(count=1, k=3, limit=14)[0]
        b = make_instances(count=1, k=3, limit=14)[0]
        agent, buffer = make_agent(8)
        ra = random_attack_baseline(a, np.random.default_rng(0))
        rb = run_metp([b], agent, buffer, np.random.default_rng(0), np.random.default_rng(1))[0]
        assert ra.queries == rb.queries == 14 and ra.steps == rb.steps

    def test_best_below_clean_over_seeds(self):
        for seed in range(10):
            inst = make_instances(count=1, k=3, limit=15, seed=seed)[0]
            res = random_attack_baseline(inst, np.random.default_rng(seed))
            assert res.best_f1 <= res.clean_f1

    def test_boundary_instance_shows_drop(self):
        # (0, 1) appears in the last two of three snapshots: score (0.9 + 1) / 2.71 ~ 0.701 sits
        # above 0.6, and any deletion of it or addition elsewhere shifts F1
        seq = DynGraphSequence.from_edge_sets(4, [[(2, 3)], [(0, 1), (2, 3)], [(0, 1), (2, 3)]])
        truth = edge_set([(0, 1), (2, 3)])
        inst = AttackInstance(0, seq, truth, LpdgOracle(PredictorParams(threshold=0.6), truth, 40),
                              degree_feature(seq, 0), 2)
        res = random_attack_baseline(inst, np.random.default_rng(0))
        assert res.clean_f1 == 1.0 and res.best_f1 < 1.0


def test_noop_action_on_complete_graph():
    full = np.ones((2, 3, 3), dtype=np.uint8)
    full[:, range(3), range(3)] = 0
    assert noop_action(DynGraphSequence(full)) is None
    assert noop_action(DynGraphSequence.from_edge_sets(3, [[(0, 1)]])) == AttackAction(0, 0, 0, 2)


def test_budget_build_matches_instances():
    b = AttackBudget.build(8, 0.3, 1000)
    assert b.k_limit == 10 and b.interaction_limit == 50
