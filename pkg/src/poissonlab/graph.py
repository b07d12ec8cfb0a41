"""Bounded-degree graphs: construction, BFS distances, balls and boundaries."""

from __future__ import annotations

import hashlib
import io
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GraphError
from .seeding import make_rng

DEFAULT_RETRY_BUDGET = 1000


@dataclass(frozen=True)
class Graph:
    """Immutable simple undirected connected graph on vertices ``0..n-1``.

    ``max_degree`` is the declared degree bound (K+1).  It may exceed the
    largest actual degree, which is how paths and cycles are admitted with
    K = 2.
    """

    n: int
    adjacency: tuple[tuple[int, ...], ...]
    max_degree: int
    seed: int | None = None
    _bfs_cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.n < 1 or len(self.adjacency) != self.n:
            raise GraphError("adjacency must have one list per vertex")
        for x, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise GraphError(f"adjacency of {x} is not sorted and duplicate free")
            for y in nbrs:
                if y == x:
                    raise GraphError(f"self-loop at {x}")
                if not 0 <= y < self.n:
                    raise GraphError(f"neighbor {y} of {x} out of range")
                if x not in self.adjacency[y]:
                    raise GraphError(f"adjacency not symmetric for edge ({x}, {y})")
            if len(nbrs) > self.max_degree:
                raise GraphError(f"vertex {x} has degree {len(nbrs)} > {self.max_degree}")
        if self.max_degree < 3:
            raise GraphError("max_degree must be at least 3 (K >= 2)")
        if self.n > 1 and np.any(self.bfs(0) < 0):
            raise GraphError("graph is not connected")

    @property
    def K(self) -> int:
        return self.max_degree - 1

    @property
    def fingerprint(self) -> str:
        cached = self._bfs_cache.get("fingerprint")
        if cached is None:
            h = hashlib.sha256(str(self.n).encode())
            for x, nbrs in enumerate(self.adjacency):
                h.update(repr((x, nbrs)).encode())
            cached = self._bfs_cache["fingerprint"] = h.hexdigest()[:16]
        return cached

    def degree(self, x: int) -> int:
        return len(self.adjacency[x])

    def edges(self) -> list[tuple[int, int]]:
        return [(x, y) for x, nbrs in enumerate(self.adjacency) for y in nbrs if x < y]

    def bfs(self, source: int) -> np.ndarray:
        """Hop distances from ``source``; -1 marks unreachable vertices."""
        cached = self._bfs_cache.get(source)
        if cached is not None:
            return cached
        self._check_vertex(source)
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for v in self.adjacency[u]:
                if dist[v] < 0:
                    dist[v] = du
                    queue.append(v)
        dist.flags.writeable = False
        self._bfs_cache[source] = dist
        return dist

    def eccentricity(self, x: int) -> int:
        return int(self.bfs(x).max())

    def diameter(self) -> int:
        return max(self.eccentricity(x) for x in range(self.n))

    def adjacency_matrix(self) -> np.ndarray:
        """0/1 adjacency matrix (no sign convention applied)."""
        a = np.zeros((self.n, self.n))
        for x, nbrs in enumerate(self.adjacency):
            a[x, list(nbrs)] = 1.0
        return a

    def _check_vertex(self, x):
        if not 0 <= x < self.n:
            raise GraphError(f"vertex {x} out of range for n={self.n}")


@dataclass(frozen=True)
class VertexSet:
    members: tuple[int, ...]
    graph_id: str = ""

    @classmethod
    def of(cls, g: Graph, vertices: Iterable[int]) -> "VertexSet":
        members = tuple(sorted(set(int(v) for v in vertices)))
        for v in members:
            g._check_vertex(v)
        return cls(members, g.fingerprint)

    @classmethod
    def whole(cls, g: Graph) -> "VertexSet":
        return cls(tuple(range(g.n)), g.fingerprint)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, v):
        return v in self._lookup

    @property
    def _lookup(self):
        # frozen dataclass: cache via object.__setattr__
        try:
            return self.__dict__["_set"]
        except KeyError:
            s = frozenset(self.members)
            object.__setattr__(self, "_set", s)
            return s

    def index(self) -> dict[int, int]:
        """Map from vertex id to its position in ``members``."""
        return {v: i for i, v in enumerate(self.members)}

    def union(self, other: "VertexSet") -> "VertexSet":
        if self.graph_id and other.graph_id and self.graph_id != other.graph_id:
            raise GraphError("vertex sets come from different graphs")
        return VertexSet(tuple(sorted(set(self.members) | set(other.members))),
                         self.graph_id or other.graph_id)

    def issubset(self, other: "VertexSet") -> bool:
        return self._lookup <= other._lookup


def distance(g: Graph, x: int, y: int) -> int:
    g._check_vertex(y)
    d = int(g.bfs(x)[y])
    if d < 0:
        raise GraphError(f"vertices {x} and {y} are not connected")
    return d


def ball(g: Graph, x: int, r: int) -> VertexSet:
    if r < 0:
        raise GraphError("radius must be non-negative")
    dist = g.bfs(x)
    return VertexSet(tuple(np.flatnonzero((dist >= 0) & (dist <= r)).tolist()), g.fingerprint)


def sphere(g: Graph, x: int, r: int) -> VertexSet:
    dist = g.bfs(x)
    return VertexSet(tuple(np.flatnonzero(dist == r).tolist()), g.fingerprint)


def inner_boundary(g: Graph, b: VertexSet, ambient: VertexSet | None = None) -> VertexSet:
    """Vertices of ``b`` with at least one neighbor in ``ambient`` but outside ``b``.

    ``ambient`` defaults to the whole graph; pass the support of a restricted
    operator to get the boundary inside that subgraph.
    """
    if len(b) == 0:
        raise GraphError("boundary of an empty set")
    inside = b._lookup
    amb = None if ambient is None else ambient._lookup
    out = []
    for x in b.members:
        for y in g.adjacency[x]:
            if y not in inside and (amb is None or y in amb):
                out.append(x)
                break
    return VertexSet(tuple(out), g.fingerprint)


# -- volume and surface bounds ------------------------------------------------

def volume_bound(K: int, r: int) -> int:
    """1 + (K+1) * sum_{m<r} K^m, the exact worst case for |B_r(x)|."""
    return 1 + (K + 1) * sum(K**m for m in range(r))


def check_volume_bounds(g: Graph) -> None:
    """Raise GraphError unless |B_r(x)| <= 3K^r and |dB_r(x)| <= 1.5K^r for all x, r."""
    K = g.K
    for x in range(g.n):
        dist = g.bfs(x)
        ecc = int(dist.max())
        for r in range(1, ecc + 1):
            vol = int(np.count_nonzero(dist <= r))
            if vol > volume_bound(K, r) or vol > 3 * K**r:
                raise GraphError(f"|B_{r}({x})| = {vol} exceeds the volume bound")
            surf = len(inner_boundary(g, ball(g, x, r)))
            if surf > (K + 1) * K ** (r - 1) or surf > 1.5 * K**r:
                raise GraphError(f"|dB_{r}({x})| = {surf} exceeds the surface bound")


# -- constructors -------------------------------------------------------------

def from_edges(n: int, edges: Iterable[Sequence[int]], max_degree: int | None = None,
               seed: int | None = None) -> Graph:
    adj: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) out of range for n={n}")
        if u == v:
            raise GraphError(f"self-loop at {u}")
        if v in adj[u]:
            raise GraphError(f"duplicate edge ({u}, {v})")
        adj[u].add(v)
        adj[v].add(u)
    actual = max((len(a) for a in adj), default=0)
    if max_degree is None:
        max_degree = max(3, actual)
    return Graph(n, tuple(tuple(sorted(a)) for a in adj), max_degree, seed)


def path_graph(n: int) -> Graph:
    return from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise GraphError("a cycle needs at least 3 vertices")
    return from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def regular_tree(K: int, depth: int) -> Graph:
    """The ball of radius ``depth`` in the (K+1)-regular tree, root 0.

    Interior vertices have degree K+1, leaves degree 1.
    """
    edges = []
    frontier = [0]
    nxt = 1
    for level in range(depth):
        new = []
        for v in frontier:
            for _ in range(K + 1 if level == 0 else K):
                edges.append((v, nxt))
                new.append(nxt)
                nxt += 1
        frontier = new
    return from_edges(nxt, edges, max_degree=K + 1)


def random_regular(n: int, degree: int, seed: int,
                   max_attempts: int = DEFAULT_RETRY_BUDGET) -> Graph:
    """Random ``degree``-regular simple connected graph via the pairing model.

    Each attempt pairs ``n * degree`` stubs uniformly at random and is
    rejected outright if it yields a loop, a multi-edge, or a disconnected
    graph.  Accepted graphs are uniform over simple regular graphs (then
    conditioned on connectivity).
    """
    if (n * degree) % 2:
        raise GraphError(f"n * degree = {n * degree} is odd")
    if degree < 2:
        raise GraphError("degree must be at least 2")
    if n <= degree:
        raise GraphError("need n > degree")
    rng = make_rng(seed)
    stubs = np.repeat(np.arange(n), degree)
    for _ in range(max_attempts):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        u = pairs.min(axis=1)
        v = pairs.max(axis=1)
        if np.any(u == v):
            continue
        keys = u * n + v
        if np.unique(keys).size != keys.size:
            continue
        adj = [[] for _ in range(n)]
        for a, b in zip(u.tolist(), v.tolist()):
            adj[a].append(b)
            adj[b].append(a)
        try:
            return Graph(n, tuple(tuple(sorted(a)) for a in adj), max(3, degree), seed)
        except GraphError:
            continue  # disconnected
    raise GraphError(f"no simple connected {degree}-regular graph on {n} vertices "
                     f"after {max_attempts} attempts")


# -- edge-list serialization --------------------------------------------------

def write_edgelist(g: Graph, dest) -> None:
    """Header ``n degree seed`` then one ``u v`` line per edge (u < v).

    ``degree`` is the declared bound ``max_degree``; seed is ``-`` if unknown.
    """
    lines = [f"{g.n} {g.max_degree} {'-' if g.seed is None else g.seed}"]
    lines += [f"{u} {v}" for u, v in g.edges()]
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    else:
        dest.write(text)


def read_edgelist(src) -> Graph:
    if isinstance(src, (str, Path)):
        text = Path(src).read_text()
    else:
        text = src.read()
    rows = [ln.split() for ln in io.StringIO(text) if ln.strip() and not ln.startswith("#")]
    if not rows or len(rows[0]) != 3:
        raise GraphError("missing header line 'n degree seed'")
    n, max_degree = int(rows[0][0]), int(rows[0][1])
    seed = None if rows[0][2] == "-" else int(rows[0][2])
    edges = []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise GraphError(f"line {k}: expected 'u v'")
        edges.append((int(row[0]), int(row[1])))
    seen = set()
    for u, v in edges:
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphError(f"duplicate edge {key}")
        seen.add(key)
    return from_edges(n, edges, max_degree=max_degree, seed=seed)
