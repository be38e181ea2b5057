"""Seeded synthetic temporal graphs for tests and demos."""
from __future__ import annotations

import numpy as np

from .graph_store import TemporalEdgeList

GROWTH_RULES = ("preferential", "uniform")


def gen_synthetic(n_nodes, n_steps, growth="preferential", seed=0) -> TemporalEdgeList:
    """Grow a simple graph on ``n_nodes`` nodes by one new edge per step.

    Under ``"preferential"`` growth each endpoint is drawn with probability
    proportional to ``degree + 1``, so a pair is chosen with probability
    proportional to the product; ``"uniform"`` ignores degree.  Self-loops
    and repeated pairs are redrawn.  Edge ``k`` (1-based) gets timestamp
    ``k``.
    """
    if growth not in GROWTH_RULES:
        raise ValueError(f"growth must be one of {GROWTH_RULES}")
    if n_nodes < 2 and n_steps > 0:
        raise ValueError("need at least 2 nodes to place an edge")
    if n_steps > n_nodes * (n_nodes - 1) // 2:
        raise ValueError("more steps than possible edges")
    rng = np.random.Generator(np.random.PCG64(seed))
    # urn holds every node once plus one entry per edge endpoint, so a
    # uniform urn draw is degree + 1 proportional
    urn = np.empty(n_nodes + 2 * n_steps, dtype=np.int64)
    urn[:n_nodes] = np.arange(n_nodes)
    size = n_nodes
    seen = set()
    out = np.empty((n_steps, 3), dtype=np.int64)
    batch = np.empty(0, dtype=np.int64)
    pos = 0
    for step in range(n_steps):
        while True:
            if pos + 2 > len(batch):
                batch = rng.random(1024)
                pos = 0
            r1, r2 = batch[pos], batch[pos + 1]
            pos += 2
            if growth == "preferential":
                a = int(urn[int(r1 * size)])
                b = int(urn[int(r2 * size)])
            else:
                a = int(r1 * n_nodes)
                b = int(r2 * n_nodes)
            if a == b:
                continue
            key = (min(a, b), max(a, b))
            if key in seen:
                continue
            break
        seen.add(key)
        urn[size] = a
        urn[size + 1] = b
        size += 2
        out[step] = (key[0], key[1], step + 1)
    return TemporalEdgeList.from_records(out, n_nodes=n_nodes)
