"""Table-induced decision rules plus baseline pursuers and evaders.

Every pursuer rule scores each candidate joint move (the Cartesian
product of per-pursuer closed neighborhoods, enumerated in lexicographic
order) and takes the argmin; evader rules score candidate nodes and take
the argmax.  INFINITY sorts above every finite entry, so comparisons need
no special casing; only the belief-weighted average replaces INFINITY
with a finite surrogate exceeding any possible capture time.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .dp import INFINITY, DistanceTable, JointState, config_index
from .errors import DimensionError, EmptyPos, IllegalAnnouncement, ZeroMass
from .graph import Graph

PURSUER_POLICY_NAMES = ("dp-minimax", "dp-pos", "dp-belief",
                        "shortest-path", "random", "stay")
EVADER_POLICY_NAMES = ("dp-sync-evader", "dp-async-evader", "random", "stay")


@dataclass
class TieBreak:
    """How equal-scoring moves are resolved.

    lowest_index (default) picks the first candidate in enumeration
    order, making every policy a pure function of its inputs;
    seeded_uniform draws uniformly among the tied candidates from its
    own rng stream.
    """

    mode: str = "lowest_index"
    rng: np.random.Generator | None = None

    @classmethod
    def lowest(cls) -> "TieBreak":
        return cls("lowest_index", None)

    @classmethod
    def seeded(cls, seed_or_rng) -> "TieBreak":
        rng = (seed_or_rng if isinstance(seed_or_rng, np.random.Generator)
               else np.random.default_rng(seed_or_rng))
        return cls("seeded_uniform", rng)

    def choose(self, ties: np.ndarray) -> int:
        if self.mode == "lowest_index" or ties.size == 1:
            return int(ties[0])
        return int(self.rng.choice(ties))


def inf_surrogate(t: DistanceTable) -> int:
    """Finite stand-in for INFINITY inside weighted averages: one more
    than n**(m+1), an upper bound on any finite capture time."""
    return t.n**(t.m + 1) + 1


def joint_moves(g: Graph, pursuers: tuple[int, ...]) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """All legal joint moves (lexicographic) and their config indices."""
    moves = list(product(*(g.closed[p] for p in pursuers)))
    cfgs = np.fromiter((config_index(g.n, mv) for mv in moves),
                       dtype=np.int64, count=len(moves))
    return moves, cfgs


def _check(t: DistanceTable, g: Graph, pursuers: tuple[int, ...]) -> None:
    if t.n != g.n:
        raise DimensionError(f"table n={t.n} does not match graph n={g.n}")
    if len(pursuers) != t.m:
        raise DimensionError(f"{len(pursuers)} pursuers, table expects {t.m}")


# -- pursuer rules ---------------------------------------------------------

def pursuer_minimax(g: Graph, t: DistanceTable, s: JointState,
                    tb: TieBreak | None = None) -> tuple[int, ...]:
    """argmin over joint moves of the worst table value over the evader's
    closed neighborhood; the perfect-information pursuit rule."""
    tb = tb or TieBreak.lowest()
    _check(t, g, s.pursuers)
    moves, cfgs = joint_moves(g, s.pursuers)
    scores = t.entries2d[cfgs][:, list(g.closed[s.evader])].max(axis=1)
    ties = np.flatnonzero(scores == scores.min())
    return moves[tb.choose(ties)]


def pursuer_pos(g: Graph, t: DistanceTable, pursuers: tuple[int, ...],
                pos: np.ndarray, tb: TieBreak | None = None) -> tuple[int, ...]:
    """Minimax over every node the evader might reach from the feasible
    set: worst case over the closed neighborhood of Pos."""
    tb = tb or TieBreak.lowest()
    _check(t, g, pursuers)
    src = np.flatnonzero(pos)
    if not src.size:
        raise EmptyPos("feasible set is empty")
    reach = np.unique(np.concatenate([g.cn_indices[g.cn_indptr[v]:g.cn_indptr[v + 1]]
                                      for v in src]))
    moves, cfgs = joint_moves(g, pursuers)
    scores = t.entries2d[cfgs][:, reach].max(axis=1)
    ties = np.flatnonzero(scores == scores.min())
    return moves[tb.choose(ties)]


def pursuer_belief(g: Graph, t: DistanceTable, pursuers: tuple[int, ...],
                   belief: np.ndarray, tb: TieBreak | None = None) -> tuple[int, ...]:
    """argmin of the belief-weighted average of per-node worst values.

    The normalizing denominator is the same for every candidate move, so
    the argmin skips it; that makes the rule exactly invariant to scaling
    the belief by any positive constant.  INFINITY entries enter the
    average as inf_surrogate(t).
    """
    tb = tb or TieBreak.lowest()
    _check(t, g, pursuers)
    if belief.shape != (g.n,):
        raise DimensionError(f"belief must have shape ({g.n},)")
    if (belief < 0).any():
        raise ZeroMass("belief has negative mass")
    support = np.flatnonzero(belief > 0)
    if not support.size or belief.sum() <= 0:
        raise ZeroMass("belief has no positive mass")
    counts = g.cn_sizes[support]
    cols = np.concatenate([g.cn_indices[g.cn_indptr[v]:g.cn_indptr[v + 1]]
                           for v in support])
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    moves, cfgs = joint_moves(g, pursuers)
    gathered = t.entries2d[cfgs][:, cols]
    per_node_worst = np.maximum.reduceat(gathered, starts, axis=1).astype(np.float64)
    per_node_worst[per_node_worst == INFINITY] = inf_surrogate(t)
    scores = per_node_worst @ belief[support]
    ties = np.flatnonzero(scores == scores.min())
    return moves[tb.choose(ties)]


def shortest_path_pursuer(g: Graph, s: JointState) -> tuple[int, ...]:
    """Each pursuer independently steps to the closed neighbor nearest the
    evader (lowest node id among ties)."""
    dist = g.distance_matrix()
    move = []
    for p in s.pursuers:
        options = g.closed[p]
        d = dist[list(options), s.evader]
        move.append(options[int(np.argmin(d))])
    return tuple(move)


def random_pursuer(g: Graph, pursuers: tuple[int, ...],
                   rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(g.closed[p][int(rng.integers(len(g.closed[p])))]
                 for p in pursuers)


# -- evader rules ----------------------------------------------------------

def evader_sync(g: Graph, t: DistanceTable, s: JointState,
                tb: TieBreak | None = None) -> int:
    """argmax over the evader's closed neighborhood of the best-case table
    value over the pursuers' joint replies; the simultaneous-move rule."""
    tb = tb or TieBreak.lowest()
    _check(t, g, s.pursuers)
    _, cfgs = joint_moves(g, s.pursuers)
    options = list(g.closed[s.evader])
    scores = t.entries2d[cfgs][:, options].min(axis=0)
    ties = np.flatnonzero(scores == scores.max())
    return options[tb.choose(ties)]


def evader_async(g: Graph, t: DistanceTable, s: JointState,
                 announced: tuple[int, ...],
                 tb: TieBreak | None = None) -> int:
    """argmax of the table under the pursuers' announced joint move; no
    inner enumeration is needed once the move is known."""
    tb = tb or TieBreak.lowest()
    _check(t, g, s.pursuers)
    if len(announced) != len(s.pursuers) or any(
            a not in g.closed[p] for a, p in zip(announced, s.pursuers)):
        raise IllegalAnnouncement(f"{announced} is not legal from {s.pursuers}")
    row = t.entries2d[config_index(g.n, announced)]
    options = list(g.closed[s.evader])
    scores = row[options]
    ties = np.flatnonzero(scores == scores.max())
    return options[tb.choose(ties)]


def random_evader(g: Graph, s_e: int, rng: np.random.Generator) -> int:
    """Uniform draw over the closed neighborhood; the default opponent
    model of the belief update."""
    options = g.closed[s_e]
    return options[int(rng.integers(len(options)))]
