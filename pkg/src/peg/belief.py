"""Feasible-position set and belief vector maintained from observations.

The tracker answers one question for the pursuers: where can the evader
be, and with what weight?  While the evader is out of range, the feasible
set grows by one closed-neighborhood dilation per timestep minus whatever
the pursuers currently see; the belief is pushed through an assumed
opponent move kernel and renormalized.  The moment the evader is seen,
both collapse to the observed node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dp import DistanceTable, JointState
from .errors import TrackerCollapse
from .graph import Graph
from .policies import TieBreak, evader_async


@dataclass(frozen=True)
class ObservationModel:
    """Hop-range sensing: a node is observed iff within `range` hops of a
    pursuer or of one of the static auxiliary sensors."""

    range: int = 2
    sensors: tuple[int, ...] = ()

    def __post_init__(self):
        if self.range < 0:
            raise ValueError("observation range must be >= 0")


def observed_set(g: Graph, pursuers: tuple[int, ...],
                 om: ObservationModel) -> np.ndarray:
    """Boolean mask of nodes within om.range hops of any pursuer/sensor."""
    sources = list(pursuers) + list(om.sensors)
    dist = g.distance_matrix()
    return (dist[sources] <= om.range).any(axis=0)


class OpponentModel:
    """Assumed evader move kernel: rows are distributions over closed
    neighborhoods.  Subclasses implement propagate()."""

    def propagate(self, g: Graph, belief: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class UniformOpponent(OpponentModel):
    """Default kernel: uniform over the closed neighborhood of each node."""

    def propagate(self, g: Graph, belief: np.ndarray) -> np.ndarray:
        raw = np.zeros(g.n)
        src = np.flatnonzero(belief > 0)
        if not src.size:
            return raw
        counts = g.cn_sizes[src]
        targets = np.concatenate([g.cn_indices[g.cn_indptr[v]:g.cn_indptr[v + 1]]
                                  for v in src])
        weights = np.repeat(belief[src] / counts, counts)
        np.add.at(raw, targets, weights)
        return raw


class KnownAsyncOpponent(OpponentModel):
    """Kernel that mirrors the actual table-driven asynchronous evader.

    The pursuers know their own announced joint move, so for a
    deterministic evader the predicted response from each feasible node
    is exact: a point mass on that node's argmax reply.  set_announced
    must be called with the pursuers' move before each propagation.
    """

    def __init__(self, table: DistanceTable, tb: TieBreak | None = None):
        self.table = table
        self.tb = tb or TieBreak.lowest()
        self.announced: tuple[int, ...] | None = None

    def set_announced(self, announced: tuple[int, ...]) -> None:
        self.announced = announced

    def propagate(self, g: Graph, belief: np.ndarray) -> np.ndarray:
        if self.announced is None:
            raise TrackerCollapse("known-opponent kernel has no announced move")
        raw = np.zeros(g.n)
        for v in np.flatnonzero(belief > 0):
            nxt = evader_async(g, self.table,
                               JointState(self.announced, int(v)),
                               self.announced, self.tb)
            raw[nxt] += belief[v]
        return raw


@dataclass
class BeliefState:
    """Feasible mask plus a probability vector supported on it."""

    pos: np.ndarray
    belief: np.ndarray

    def copy(self) -> "BeliefState":
        return BeliefState(self.pos.copy(), self.belief.copy())

    def pos_ids(self) -> list[int]:
        return [int(v) for v in np.flatnonzero(self.pos)]

    def belief_pairs(self) -> list[tuple[int, float]]:
        return [(int(v), float(self.belief[v]))
                for v in np.flatnonzero(self.belief > 0)]

    def to_dict(self) -> dict:
        return {"pos": self.pos_ids(),
                "belief": [[v, m] for v, m in self.belief_pairs()]}


def init(n: int, s_e0: int) -> BeliefState:
    """Game start: the intruder's initial position is revealed, so the
    feasible set is that single node and the belief is a point mass."""
    pos = np.zeros(n, dtype=bool)
    pos[s_e0] = True
    belief = np.zeros(n)
    belief[s_e0] = 1.0
    return BeliefState(pos, belief)


def _dilate(g: Graph, mask: np.ndarray) -> np.ndarray:
    out = np.zeros_like(mask)
    src = np.flatnonzero(mask)
    if src.size:
        targets = np.concatenate([g.cn_indices[g.cn_indptr[v]:g.cn_indptr[v + 1]]
                                  for v in src])
        out[targets] = True
    return out


def update(bs: BeliefState, g: Graph, s_p_new: tuple[int, ...],
           om: ObservationModel, evader_pos: int,
           opp: OpponentModel | None = None) -> BeliefState:
    """One tracker step after both sides have moved.

    evader_pos is only tested for membership in the observed set; when it
    is out of range the update never reads it, keeping the tracker honest
    about what the pursuers can know.  Raises TrackerCollapse if the
    feasible set or the belief mass vanish, which is unreachable under
    every-step updates with a legally moving evader.
    """
    opp = opp or UniformOpponent()
    observed = observed_set(g, s_p_new, om)
    if observed[evader_pos]:
        return init(g.n, evader_pos)
    pos = _dilate(g, bs.pos) & ~observed
    if not pos.any():
        raise TrackerCollapse("feasible set became empty")
    belief = opp.propagate(g, bs.belief)
    belief[~pos] = 0.0
    mass = belief.sum()
    if mass <= 0:
        raise TrackerCollapse("belief mass vanished")
    return BeliefState(pos, belief / mass)


def unknown_state(g: Graph, s_p: tuple[int, ...],
                  om: ObservationModel) -> BeliefState:
    """Fallback when all location knowledge is lost (used only by the
    reduced-update-frequency ablation): uniform over unobserved nodes."""
    pos = ~observed_set(g, s_p, om)
    if not pos.any():
        pos = np.ones(g.n, dtype=bool)
    belief = pos / pos.sum()
    return BeliefState(pos.copy(), belief)
