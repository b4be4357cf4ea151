import numpy as np
import pytest

from lpdg_attack.agent import ActorCritic, AgentConfig, Transition
from lpdg_attack.graph import AttackAction, DynGraphSequence
from lpdg_attack.neural import HIDDEN


def random_sequence(rng: np.random.Generator, n: int, t: int, p: float = 0.3) -> DynGraphSequence:
    upper = np.triu((rng.random((t, n, n)) < p).astype(np.uint8), k=1)
    return DynGraphSequence(upper | upper.transpose(0, 2, 1))


def central_diff(f, arr, step=1e-5):
    grad = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        old = arr[idx]
        arr[idx] = old + step
        up = f()
        arr[idx] = old - step
        down = f()
        arr[idx] = old
        grad[idx] = (up - down) / (2 * step)
    return grad


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8)


def small_agent(rng, n, hidden=(7,), **cfg):
    return ActorCritic(n, AgentConfig(hidden_sizes=hidden, **cfg), rng)


def random_batch(rng, n, t, size):
    return [
        Transition(rng.normal(size=(t, n, HIDDEN)), AttackAction(*(int(v) for v in rng.integers(0, n, 4))),
                   float(rng.normal(scale=0.1)), 0)
        for _ in range(size)
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    _CRITERIA.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
