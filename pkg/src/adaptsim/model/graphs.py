"""Graph generators for the gossip benchmark.

Thin wrappers over networkx that validate parameters, drop any self-loops and
return sorted adjacency lists.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx

from .base import ModelConfigError

KINDS = ("random", "small_world", "scale_free", "complete", "two_cliques")


@dataclass(frozen=True)
class Graph:
    n: int
    adjacency: tuple[tuple[int, ...], ...]
    kind: str

    @property
    def n_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, nbrs in enumerate(self.adjacency) for v in nbrs if u < v]

    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            for w in self.adjacency[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n

    def dump(self) -> str:
        return "".join(f"{v}: {','.join(map(str, nb))}\n" for v, nb in enumerate(self.adjacency))


def generate_graph(kind: str, n: int, params: dict | None = None, seed: int = 0) -> Graph:
    params = dict(params or {})
    if n < 2:
        raise ModelConfigError(f"graph needs n >= 2, got {n}")
    if kind == "random":
        p = float(params.pop("p", 0.1))
        if not 0.0 <= p <= 1.0:
            raise ModelConfigError(f"random graph: p must be in [0, 1], got {p}")
        g = nx.gnp_random_graph(n, p, seed=seed)
    elif kind == "small_world":
        k = int(params.pop("k", 4))
        beta = float(params.pop("beta", 0.1))
        if k < 2 or k % 2 or k >= n:
            raise ModelConfigError(f"small_world: k must be even with 2 <= k < n, got {k}")
        if not 0.0 <= beta <= 1.0:
            raise ModelConfigError(f"small_world: beta must be in [0, 1], got {beta}")
        g = nx.watts_strogatz_graph(n, k, beta, seed=seed)
    elif kind == "scale_free":
        m = int(params.pop("m", 2))
        if m < 1 or m >= n:
            raise ModelConfigError(f"scale_free: m must satisfy 1 <= m < n, got {m}")
        g = nx.barabasi_albert_graph(n, m, seed=seed)
    elif kind == "complete":
        g = nx.complete_graph(n)
    elif kind == "two_cliques":
        if n % 2 or n < 4:
            raise ModelConfigError(f"two_cliques: n must be even and >= 4, got {n}")
        # cliques [0, n/2) and [n/2, n) joined by the single edge (n/2-1, n/2)
        g = nx.barbell_graph(n // 2, 0)
    else:
        raise ModelConfigError(f"unknown graph kind {kind!r}")
    if params:
        raise ModelConfigError(f"{kind}: unknown graph parameters {sorted(params)}")
    g.remove_edges_from(list(nx.selfloop_edges(g)))
    adj = tuple(tuple(sorted(g.neighbors(v))) for v in range(n))
    return Graph(n, adj, kind)
