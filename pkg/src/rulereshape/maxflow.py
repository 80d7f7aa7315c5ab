"""Dinic maximum flow on small dense-ish graphs with real capacities."""

from __future__ import annotations

import math
from collections import deque


class FlowNetwork:
    """Directed network with residual edges stored pairwise (``e ^ 1`` is the
    reverse of ``e``). Capacities may be ``math.inf``."""

    def __init__(self, n: int, eps: float = 0.0):
        self.n = n
        self.eps = eps
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[float] = []

    def add_edge(self, u: int, v: int, cap: float) -> None:
        self.adj[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(cap)
        self.adj[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(0.0)

    def _levels(self, s: int, t: int) -> list[int] | None:
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for e in self.adj[u]:
                v = self.to[e]
                if level[v] < 0 and self.cap[e] > self.eps:
                    level[v] = level[u] + 1
                    q.append(v)
        return level if level[t] >= 0 else None

    def _blocking_flow(self, s: int, t: int, level: list[int]) -> float:
        adj, to, cap, eps = self.adj, self.to, self.cap, self.eps
        it = [0] * self.n
        total = 0.0
        path: list[int] = []
        u = s
        while True:
            if u == t:
                f = min(cap[e] for e in path)
                for e in path:
                    cap[e] -= f
                    cap[e ^ 1] += f
                total += f
                # Resume from the tail of the first saturated edge.
                j = next(j for j, e in enumerate(path) if cap[e] <= eps)
                del path[j:]
                u = to[path[-1]] if path else s
                continue
            edges = adj[u]
            advanced = False
            while it[u] < len(edges):
                e = edges[it[u]]
                v = to[e]
                if cap[e] > eps and level[v] == level[u] + 1:
                    path.append(e)
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if advanced:
                continue
            if u == s:
                return total
            level[u] = -1
            e = path.pop()
            u = to[e ^ 1]
            it[u] += 1

    def max_flow(self, s: int, t: int) -> float:
        flow = 0.0
        while True:
            level = self._levels(s, t)
            if level is None:
                return flow
            f = self._blocking_flow(s, t, level)
            if f == 0.0 or math.isinf(f):
                return flow + f
            flow += f

    def reachable(self, s: int) -> list[bool]:
        """Vertices reachable from ``s`` in the residual graph (source side
        of a minimum cut once ``max_flow`` has run)."""
        seen = [False] * self.n
        seen[s] = True
        q = deque([s])
        while q:
            u = q.popleft()
            for e in self.adj[u]:
                v = self.to[e]
                if not seen[v] and self.cap[e] > self.eps:
                    seen[v] = True
                    q.append(v)
        return seen
