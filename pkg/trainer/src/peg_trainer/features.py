"""Graph bookkeeping and per-node state features.

The trainer never imports the engine; it reads the same graph JSON
files the server loads and rebuilds what it needs (adjacency, hop
distances, diameter) locally.  A state is featurized as an (n, m+2)
matrix: one shortest-path-distance column per pursuer normalized by
the graph diameter, a feasible-set indicator, and the belief mass.
The privileged critic variant appends an evader one-hot column.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class GraphInfo:
    graph_id: str
    n: int
    adjacency: tuple[tuple[int, ...], ...]
    closed: tuple[tuple[int, ...], ...]
    dist: np.ndarray       # (n, n) hop counts
    diameter: int
    adj_mask: np.ndarray   # (n, n) float32, adjacency plus self-connections


def _bfs(adjacency, source: int, n: int) -> np.ndarray:
    dist = np.full(n, -1, dtype=np.int32)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adjacency[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def graph_info_from_dict(graph_id: str, obj: dict) -> GraphInfo:
    nodes = obj["nodes"]
    n = len(nodes)
    if sorted(nodes) != list(range(n)):
        raise ValueError(f"graph {graph_id}: ids must be 0..n-1")
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for u, v in obj["edges"]:
        nbrs[u].add(v)
        nbrs[v].add(u)
    adjacency = tuple(tuple(sorted(s)) for s in nbrs)
    dist = np.stack([_bfs(adjacency, v, n) for v in range(n)])
    if (dist < 0).any():
        raise ValueError(f"graph {graph_id} is disconnected")
    closed = tuple(tuple(sorted((v, *adjacency[v]))) for v in range(n))
    mask = np.eye(n, dtype=np.float32)
    for u in range(n):
        for v in adjacency[u]:
            mask[u, v] = 1.0
    return GraphInfo(graph_id=graph_id, n=n, adjacency=adjacency,
                     closed=closed, dist=dist, diameter=int(dist.max()),
                     adj_mask=mask)


def load_graph_dir(path: str) -> dict[str, GraphInfo]:
    infos = {}
    for p in sorted(Path(path).glob("*.json")):
        infos[p.stem] = graph_info_from_dict(p.stem, json.loads(p.read_text()))
    if not infos:
        raise ValueError(f"no graph JSON files in {path}")
    return infos


def build_features(info: GraphInfo, pursuers: list[int], pos_ids: list[int],
                   belief_pairs: list[list[float]],
                   evader: int | None = None) -> np.ndarray:
    """(n, m+2) state feature matrix; m+3 with the privileged evader column."""
    dia = max(info.diameter, 1)
    cols = [info.dist[:, p].astype(np.float32) / dia for p in pursuers]
    pos = np.zeros(info.n, dtype=np.float32)
    pos[list(pos_ids)] = 1.0
    cols.append(pos)
    belief = np.zeros(info.n, dtype=np.float32)
    for v, mass in belief_pairs:
        belief[int(v)] = mass
    cols.append(belief)
    if evader is not None:
        one_hot = np.zeros(info.n, dtype=np.float32)
        one_hot[evader] = 1.0
        cols.append(one_hot)
    return np.stack(cols, axis=1)


def featurize(obs: dict, info: GraphInfo) -> np.ndarray:
    """Feature matrix for an observation exactly as served on the wire."""
    return build_features(info, obs["pursuers"], obs["pos"], obs["belief"])


# -- tiny graph builders used for the toy training corpus -----------------

def cycle_graph_json(n: int) -> dict:
    return {"nodes": list(range(n)),
            "edges": [[i, (i + 1) % n] for i in range(n)]}


def path_graph_json(n: int) -> dict:
    return {"nodes": list(range(n)),
            "edges": [[i, i + 1] for i in range(n - 1)]}


def y_tree_json(arm: int = 2) -> dict:
    """Three arms of `arm` nodes joined at a hub (node 0)."""
    edges = []
    n = 1 + 3 * arm
    for a in range(3):
        prev = 0
        for k in range(arm):
            node = 1 + a * arm + k
            edges.append([prev, node])
            prev = node
    return {"nodes": list(range(n)), "edges": edges}


def write_toy_corpus(path: str) -> list[str]:
    """The default three-graph training set; returns graph ids."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    corpus = {"cycle8": cycle_graph_json(8),
              "path9": path_graph_json(9),
              "ytree10": y_tree_json(3)}
    for name, obj in corpus.items():
        (root / f"{name}.json").write_text(json.dumps(obj))
    return sorted(corpus)
