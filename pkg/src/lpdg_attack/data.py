"""Edge-stream files and synthetic dynamic graphs.

Edge-stream format: one ``t u v`` line per edge, whitespace separated,
0-based node ids, 1-based timestamps. Lines starting with ``#`` are
comments, except an optional header ``# n_nodes=<N> n_timestamps=<S>`` that
fixes the node universe and timestamp count (needed when a snapshot is empty).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .graph import DynGraphSequence, EdgeSet, edges_of

_HEADER = re.compile(r"#\s*n_nodes=(\d+)\s+n_timestamps=(\d+)")


class EdgeStreamError(ValueError):
    pass


@dataclass(frozen=True)
class InstanceData:
    """T input snapshots and the snapshot T+1 they should predict."""

    sequence: DynGraphSequence
    truth: EdgeSet

    @property
    def n_nodes(self) -> int:
        return self.sequence.n_nodes


def _read_stream(path: Path):
    header = None
    edges: dict[int, set] = {}
    max_node = -1
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _HEADER.match(line)
                if m:
                    header = (int(m.group(1)), int(m.group(2)))
                continue
            parts = line.split()
            try:
                if len(parts) != 3:
                    raise ValueError
                t, u, v = (int(p) for p in parts)
            except ValueError:
                raise EdgeStreamError(f"{path}:{lineno}: expected 't u v' integers, got {line!r}") from None
            if t < 1 or u < 0 or v < 0:
                raise EdgeStreamError(f"{path}:{lineno}: timestamps start at 1 and node ids at 0")
            max_node = max(max_node, u, v)
            bucket = edges.setdefault(t, set())
            if u != v:
                bucket.add((min(u, v), max(u, v)))
    return header, edges, max_node


def load_edge_stream(path: str | Path, n_snapshots: int | None = None) -> list[InstanceData]:
    """Split a stream into consecutive windows of ``n_snapshots + 1`` timestamps.

    Without ``n_snapshots`` the whole stream is one instance whose last
    timestamp is the ground truth.
    """
    path = Path(path)
    header, edges, max_node = _read_stream(path)
    n_nodes = max_node + 1
    n_times = max(edges) if edges else 0
    if header is not None:
        if header[0] < n_nodes or header[1] < n_times:
            raise EdgeStreamError(f"{path}: header {header} smaller than the data it describes")
        n_nodes, n_times = header
    else:
        missing = sorted(set(range(1, n_times + 1)) - set(edges))
        if missing:
            raise EdgeStreamError(f"{path}: no edges at timestamps {missing[:10]}")
    if n_nodes < 2:
        raise EdgeStreamError(f"{path}: need at least two nodes")
    window = (n_times if n_snapshots is None else n_snapshots + 1)
    if window < 2 or n_times < window:
        raise EdgeStreamError(f"{path}: {n_times} timestamps cannot fill a window of {window}")

    out = []
    for start in range(1, n_times - window + 2, window):
        snaps = [edges.get(t, ()) for t in range(start, start + window)]
        seq = DynGraphSequence.from_edge_sets(n_nodes, snaps[:-1])
        out.append(InstanceData(seq, frozenset(snaps[-1])))
    return out


def write_edge_stream(path: str | Path, instances: Iterable[InstanceData]) -> None:
    """Write instances back to back; reload with ``n_snapshots=T`` to get them back."""
    instances = list(instances)
    if not instances:
        raise ValueError("nothing to write")
    n_nodes = instances[0].n_nodes
    window = instances[0].sequence.n_snapshots + 1
    lines = []
    t = 0
    for inst in instances:
        if inst.n_nodes != n_nodes or inst.sequence.n_snapshots + 1 != window:
            raise ValueError("all instances must share node count and length")
        snaps = [edges_of(a) for a in inst.sequence.adj] + [inst.truth]
        for snap in snaps:
            t += 1
            lines.extend(f"{t} {u} {v}" for u, v in sorted(snap))
    with open(path, "w") as fh:
        fh.write(f"# n_nodes={n_nodes} n_timestamps={t}\n")
        fh.write("\n".join(lines))
        fh.write("\n")


def erdos_renyi(n_nodes: int, p: float, rng: np.random.Generator) -> np.ndarray:
    iu = np.triu_indices(n_nodes, k=1)
    a = np.zeros((n_nodes, n_nodes), dtype=np.uint8)
    a[iu] = rng.random(len(iu[0])) < p
    return a | a.T


def gen_synthetic(n_nodes: int, n_snapshots: int, p_base: float, p_del: float, seed: int,
                  n_instances: int = 10) -> list[InstanceData]:
    """Instances drawn from one shared G(N, p_base) base graph.

    Every instance draws its own T + 1 snapshots, each dropping every base
    edge independently with probability ``p_del``; the last one is the truth.
    """
    if n_nodes < 2 or n_snapshots < 1 or n_instances < 1:
        raise ValueError("need n_nodes >= 2, n_snapshots >= 1, n_instances >= 1")
    if not (0 <= p_base <= 1 and 0 <= p_del <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    base = erdos_renyi(n_nodes, p_base, rng)
    iu = np.triu_indices(n_nodes, k=1)
    out = []
    for _ in range(n_instances):
        snaps = np.zeros((n_snapshots + 1, n_nodes, n_nodes), dtype=np.uint8)
        for t in range(n_snapshots + 1):
            keep = rng.random(len(iu[0])) >= p_del
            upper = np.zeros((n_nodes, n_nodes), dtype=np.uint8)
            upper[iu] = base[iu] & keep
            snaps[t] = upper | upper.T
        out.append(InstanceData(DynGraphSequence(snaps[:-1]), edges_of(snaps[-1])))
    return out
