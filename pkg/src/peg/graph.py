"""Graph representation, ingestion, generation, and distance utilities.

All play happens on an undirected simple connected graph with dense node
ids 0..n-1.  Self-loops are forbidden in storage; the "stay" action exists
only through the closed-neighborhood convention (a node plus its adjacent
nodes is the legal one-step move set of any agent standing on it).
"""

from __future__ import annotations

import json
from collections import deque
from typing import Iterable, Sequence

import numpy as np

from .errors import GenerationError, ParseError, SizeError, ValidationError

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def content_hash(n: int, edges: Iterable[tuple[int, int]]) -> int:
    """64-bit FNV-1a hash of (n, canonically sorted edge set).

    Invariant to edge-list permutation and endpoint order; used to bind
    solved tables to the graph they were computed on.
    """
    canon = sorted((u, v) if u < v else (v, u) for u, v in edges)
    buf = bytearray(n.to_bytes(8, "little"))
    for u, v in canon:
        buf += u.to_bytes(4, "little")
        buf += v.to_bytes(4, "little")
    return _fnv1a(bytes(buf))


class Graph:
    """Immutable undirected simple connected graph.

    Attributes:
        n: node count; ids are exactly 0..n-1.
        adjacency: per-node sorted tuple of neighbor ids (symmetric, no
            self-loops, no duplicates).
        coords: optional per-node (x, y) pairs, metadata only.
        id: 64-bit content hash of (n, edge set).
    """

    def __init__(self, n: int, edges: Sequence[tuple[int, int]],
                 coords: Sequence[tuple[float, float]] | None = None):
        if n < 1:
            raise ValidationError("graph needs at least one node")
        nbrs: list[set[int]] = [set() for _ in range(n)]
        seen: set[tuple[int, int]] = set()
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"edge ({u},{v}) out of range for n={n}")
            if u == v:
                raise ValidationError(f"self-loop at node {u}")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise ValidationError(f"duplicate edge ({u},{v})")
            seen.add(key)
            nbrs[u].add(v)
            nbrs[v].add(u)
        self.n = n
        self.adjacency: tuple[tuple[int, ...], ...] = tuple(
            tuple(sorted(s)) for s in nbrs)
        if coords is not None:
            if len(coords) != n:
                raise ValidationError("coords length must equal node count")
            coords = tuple((float(x), float(y)) for x, y in coords)
        self.coords = coords
        self.id = content_hash(n, seen)

        # Closed neighborhoods ({v} plus neighbors, ascending) both as
        # tuples and as a CSR-style flat layout for vectorized reductions.
        closed = []
        indptr = np.zeros(n + 1, dtype=np.int64)
        for v in range(n):
            cn = tuple(sorted((v, *self.adjacency[v])))
            closed.append(cn)
            indptr[v + 1] = indptr[v] + len(cn)
        self.closed: tuple[tuple[int, ...], ...] = tuple(closed)
        self.cn_indptr = indptr
        self.cn_indices = np.fromiter(
            (u for cn in closed for u in cn), dtype=np.int64, count=indptr[-1])
        self.cn_sizes = np.diff(indptr)
        self._dist: np.ndarray | None = None
        self._check_connected()

    def _check_connected(self) -> None:
        if self.n == 1:
            return
        dist = self.bfs_distances(0)
        if (dist < 0).any():
            missing = int(np.flatnonzero(dist < 0)[0])
            raise ValidationError(f"graph is disconnected (node {missing} unreachable)")

    # -- queries --------------------------------------------------------

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def num_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    @property
    def average_degree(self) -> float:
        return 2.0 * self.num_edges / self.n

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]

    def closed_neighbors(self, v: int) -> tuple[int, ...]:
        """{v} plus adjacency[v], ascending: the action set of an agent at v."""
        if not 0 <= v < self.n:
            raise IndexError(f"node {v} out of range for n={self.n}")
        return self.closed[v]

    def bfs_distances(self, source: int) -> np.ndarray:
        """Hop counts from source to every node (-1 for unreachable)."""
        if not 0 <= source < self.n:
            raise IndexError(f"node {source} out of range for n={self.n}")
        dist = np.full(self.n, -1, dtype=np.int32)
        dist[source] = 0
        queue = deque([source])
        adj = self.adjacency
        while queue:
            u = queue.popleft()
            du = dist[u]
            for w in adj[u]:
                if dist[w] < 0:
                    dist[w] = du + 1
                    queue.append(w)
        return dist

    def distance_matrix(self) -> np.ndarray:
        """All-pairs hop distances, computed once and cached."""
        if self._dist is None:
            out = np.empty((self.n, self.n), dtype=np.int32)
            for v in range(self.n):
                out[v] = self.bfs_distances(v)
            self._dist = out
        return self._dist

    @property
    def diameter(self) -> int:
        return int(self.distance_matrix().max())

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.id == other.id and self.n == other.n

    def __hash__(self) -> int:
        return self.id

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.num_edges}, id={self.id:#018x})"

    # pickling support for parallel evaluation (drop numpy caches)
    def __reduce__(self):
        return (Graph, (self.n, self.edges(), self.coords))


# -- node-set helpers (bitset semantics over 0..n-1) ---------------------

def make_mask(n: int, ids: Iterable[int]) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    for v in ids:
        if not 0 <= v < n:
            raise IndexError(f"node {v} out of range for n={n}")
        mask[v] = True
    return mask


def mask_ids(mask: np.ndarray) -> list[int]:
    return [int(v) for v in np.flatnonzero(mask)]


# -- ingestion -----------------------------------------------------------

def load_json(data: bytes | str) -> Graph:
    """Parse and validate the graph JSON schema.

    Schema: {"nodes": [int...], "edges": [[int, int]...],
             "coords": optional [[x, y]...]}; node ids must be 0..n-1.
    """
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ParseError("top-level value must be an object")
    try:
        nodes = obj["nodes"]
        edges = obj["edges"]
    except KeyError as e:
        raise ParseError(f"missing key {e}") from e
    if not isinstance(nodes, list) or not all(isinstance(v, int) for v in nodes):
        raise ParseError("nodes must be a list of integers")
    if not isinstance(edges, list) or not all(
            isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e)
            for e in edges):
        raise ParseError("edges must be a list of [u, v] integer pairs")
    coords = obj.get("coords")
    if coords is not None:
        if not isinstance(coords, list) or not all(
                isinstance(c, list) and len(c) == 2 and
                all(isinstance(x, (int, float)) for x in c) for c in coords):
            raise ParseError("coords must be a list of [x, y] number pairs")
        coords = [tuple(c) for c in coords]
    n = len(nodes)
    if sorted(nodes) != list(range(n)):
        raise ValidationError("node ids must be exactly 0..n-1 with no gaps")
    return Graph(n, [(e[0], e[1]) for e in edges], coords)


def to_json(g: Graph) -> str:
    obj: dict = {"nodes": list(range(g.n)), "edges": [list(e) for e in g.edges()]}
    if g.coords is not None:
        obj["coords"] = [list(c) for c in g.coords]
    return json.dumps(obj)


# -- generators ----------------------------------------------------------

def generate_grid(rows: int, cols: int) -> Graph:
    """4-connected lattice; node id = row*cols + col."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise SizeError(f"grid {rows}x{cols} has fewer than 2 nodes")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    coords = [(float(c), float(r)) for r in range(rows) for c in range(cols)]
    return Graph(rows * cols, edges, coords)


def generate_geometric(n: int, radius: float, seed: int,
                       max_retries: int = 20) -> Graph:
    """Connected random geometric graph on the unit square.

    Points are sampled uniformly and joined when within `radius`.  If the
    raw sample is disconnected we resample up to `max_retries` times, then
    augment the last sample by bridging each component to its geometrically
    nearest neighbor component, so the result is connected by construction
    and deterministic for a fixed seed.
    """
    if n < 2:
        raise SizeError("geometric graph needs at least 2 nodes")
    rng = np.random.default_rng(seed)
    pts = None
    edges: set[tuple[int, int]] = set()
    for _ in range(max_retries + 1):
        pts = rng.random((n, 2))
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        iu, ju = np.nonzero(np.triu(d2 <= radius * radius, k=1))
        edges = {(int(u), int(v)) for u, v in zip(iu, ju)}
        if _components(n, edges) == 1:
            return Graph(n, sorted(edges), [tuple(p) for p in pts])
    # bridge components of the final sample
    for _ in range(n):
        labels = _component_labels(n, edges)
        if labels.max() == 0:
            break
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        d2[labels[:, None] == labels[None, :]] = np.inf
        u, v = np.unravel_index(int(np.argmin(d2)), d2.shape)
        if not np.isfinite(d2[u, v]):  # pragma: no cover - unreachable for n >= 2
            raise GenerationError("could not bridge components")
        edges.add((min(int(u), int(v)), max(int(u), int(v))))
    return Graph(n, sorted(edges), [tuple(p) for p in pts])


def _component_labels(n: int, edges: set[tuple[int, int]]) -> np.ndarray:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    labels = np.full(n, -1, dtype=np.int64)
    comp = 0
    for s in range(n):
        if labels[s] >= 0:
            continue
        labels[s] = comp
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if labels[w] < 0:
                    labels[w] = comp
                    queue.append(w)
        comp += 1
    return labels


def _components(n: int, edges: set[tuple[int, int]]) -> int:
    return int(_component_labels(n, edges).max()) + 1


# convenience constructors used throughout the test-suite and docs

def path_graph(n: int) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])
