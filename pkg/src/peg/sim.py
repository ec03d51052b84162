"""Episode engine and batch evaluator.

A timestep runs in a fixed order: the pursuers commit a joint move from
whatever they are allowed to see, the evader answers with that announced
move in hand, capture is checked on the full post-move state, and only
then does the tracker digest the new positions.  Capture is never
evaluated mid-step: an evader may legally step out of a would-be capture
before the check happens.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from . import belief as belief_mod
from .belief import BeliefState, KnownAsyncOpponent, ObservationModel, UniformOpponent, observed_set
from .dp import CaptureSpec, DistanceTable, JointState, terminal
from .errors import ConfigError, HashMismatch, IllegalMove, NoValidStart, TrackerCollapse
from .graph import Graph
from .policies import (EVADER_POLICY_NAMES, PURSUER_POLICY_NAMES, TieBreak,
                       evader_async, evader_sync, pursuer_belief,
                       pursuer_minimax, pursuer_pos, random_evader,
                       random_pursuer, shortest_path_pursuer)

EXTERNAL_PURSUER = "external"


@dataclass
class EpisodeConfig:
    graph: Graph
    m: int = 2
    capture: CaptureSpec = CaptureSpec.adjacent()
    obs: ObservationModel = ObservationModel(range=2)
    pursuer: str = "dp-belief"
    evader: str = "dp-async-evader"
    table: DistanceTable | None = None
    max_steps: int = 128
    seed: int = 0
    min_start_separation: int | None = None  # defaults to obs.range
    require_finite_d: bool = False
    update_period: int = 1
    tiebreak: str = "lowest"  # lowest | seeded
    opponent_model: str = "uniform"  # uniform | known

    def __post_init__(self):
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.m < 1:
            raise ConfigError("need at least one pursuer")
        if self.update_period < 1:
            raise ConfigError("update_period must be >= 1")
        if self.tiebreak not in ("lowest", "seeded"):
            raise ConfigError(f"unknown tiebreak {self.tiebreak!r}")
        if self.opponent_model not in ("uniform", "known"):
            raise ConfigError(f"unknown opponent model {self.opponent_model!r}")
        if self.pursuer not in PURSUER_POLICY_NAMES + (EXTERNAL_PURSUER,):
            raise ConfigError(f"unknown pursuer policy {self.pursuer!r}")
        if self.evader not in EVADER_POLICY_NAMES:
            raise ConfigError(f"unknown evader policy {self.evader!r}")
        needs_table = (self.pursuer.startswith("dp-")
                       or self.evader.startswith("dp-")
                       or self.require_finite_d
                       or self.opponent_model == "known")
        if needs_table:
            if self.table is None:
                raise ConfigError("this configuration needs a solved table")
            if self.table.graph_hash != self.graph.id:
                raise HashMismatch("table was solved for a different graph")
            if self.table.m != self.m:
                raise ConfigError(
                    f"table has m={self.table.m}, config has m={self.m}")
            if self.table.capture != self.capture:
                raise ConfigError("table capture spec differs from config")

    @property
    def separation(self) -> int:
        return (self.obs.range if self.min_start_separation is None
                else self.min_start_separation)


@dataclass
class TraceStep:
    pursuers: tuple[int, ...]
    evader: int
    pos: tuple[int, ...]
    belief: tuple[tuple[int, float], ...]
    observed: bool

    def to_dict(self) -> dict:
        return {"pursuers": list(self.pursuers), "evader": self.evader,
                "pos": list(self.pos),
                "belief": [[v, m] for v, m in self.belief],
                "observed": self.observed}


@dataclass
class EpisodeResult:
    captured: bool
    steps: int
    trace: list[TraceStep] = field(default_factory=list)


@dataclass
class EvalReport:
    episodes: int
    successes: int
    success_rate: float
    mean_capture_steps: float | None
    seed: int

    def to_dict(self) -> dict:
        return {"episodes": self.episodes, "successes": self.successes,
                "success_rate": self.success_rate,
                "mean_capture_steps": self.mean_capture_steps,
                "seed": self.seed}


def _valid_start_mask(cfg: EpisodeConfig) -> np.ndarray:
    """(n**m * n,) boolean over flat state indices."""
    g, m = cfg.graph, cfg.m
    n = g.n
    far = g.distance_matrix() > cfg.separation
    comp = np.arange(n**m, dtype=np.int64)
    ok = far[comp % n]
    comp //= n
    for _ in range(1, m):
        ok &= far[comp % n]
        comp //= n
    ok = ok.reshape(-1)
    if cfg.require_finite_d:
        from .dp import INFINITY
        ok &= cfg.table.entries != INFINITY
    return ok


def sample_initial(cfg: EpisodeConfig, rng: np.random.Generator) -> JointState:
    """Uniform over joint states whose every pursuer-evader distance
    exceeds the separation (strictly), optionally restricted to finite-D
    states; deterministic for a given rng state."""
    g, m = cfg.graph, cfg.m
    n = g.n
    total = n**(m + 1)
    if total <= 1 << 22:
        valid = np.flatnonzero(_valid_start_mask(cfg))
        if not valid.size:
            raise NoValidStart(
                f"no start satisfies separation > {cfg.separation}")
        idx = int(valid[rng.integers(valid.size)])
        from .dp import unpack_state
        return unpack_state(n, m, idx)
    dist = g.distance_matrix()
    sep = cfg.separation
    from .dp import INFINITY, state_index
    for _ in range(20000):
        pursuers = tuple(int(v) for v in rng.integers(n, size=m))
        e = int(rng.integers(n))
        if all(dist[p, e] > sep for p in pursuers):
            if cfg.require_finite_d and \
                    cfg.table.entries[state_index(n, JointState(pursuers, e))] == INFINITY:
                continue
            return JointState(pursuers, e)
    raise NoValidStart("rejection sampling found no valid start")


# -- policy adapters ---------------------------------------------------------

class _Pursuer:
    def act(self, ep: "Episode") -> tuple[int, ...]:
        raise NotImplementedError


class _MinimaxPursuer(_Pursuer):
    def __init__(self, table, tb):
        self.table, self.tb = table, tb

    def act(self, ep):
        return pursuer_minimax(ep.g, self.table,
                               JointState(ep.s_p, ep.s_e), self.tb)


class _PosPursuer(_Pursuer):
    def __init__(self, table, tb):
        self.table, self.tb = table, tb

    def act(self, ep):
        return pursuer_pos(ep.g, self.table, ep.s_p, ep.tracker.pos, self.tb)


class _BeliefPursuer(_Pursuer):
    def __init__(self, table, tb):
        self.table, self.tb = table, tb

    def act(self, ep):
        return pursuer_belief(ep.g, self.table, ep.s_p,
                              ep.tracker.belief, self.tb)


class _ShortestPathPursuer(_Pursuer):
    def act(self, ep):
        return shortest_path_pursuer(ep.g, JointState(ep.s_p, ep.s_e))


class _RandomPursuer(_Pursuer):
    def __init__(self, rng):
        self.rng = rng

    def act(self, ep):
        return random_pursuer(ep.g, ep.s_p, self.rng)


class _StayPursuer(_Pursuer):
    def act(self, ep):
        return tuple(ep.s_p)


class _Evader:
    def act(self, ep: "Episode", announced: tuple[int, ...]) -> int:
        raise NotImplementedError


class _AsyncEvader(_Evader):
    def __init__(self, table, tb):
        self.table, self.tb = table, tb

    def act(self, ep, announced):
        return evader_async(ep.g, self.table, JointState(ep.s_p, ep.s_e),
                            announced, self.tb)


class _SyncEvader(_Evader):
    """Simultaneous-move opponent: scores with the pre-move pursuer
    positions and never sees the announcement."""

    def __init__(self, table, tb):
        self.table, self.tb = table, tb

    def act(self, ep, announced):
        return evader_sync(ep.g, self.table, JointState(ep.s_p, ep.s_e), self.tb)


class _RandomEvader(_Evader):
    def __init__(self, rng):
        self.rng = rng

    def act(self, ep, announced):
        return random_evader(ep.g, ep.s_e, self.rng)


class _StayEvader(_Evader):
    def act(self, ep, announced):
        return ep.s_e


def _make_pursuer(cfg: EpisodeConfig, tb: TieBreak,
                  rng: np.random.Generator) -> _Pursuer | None:
    name = cfg.pursuer
    if name == EXTERNAL_PURSUER:
        return None
    if name == "dp-minimax":
        return _MinimaxPursuer(cfg.table, tb)
    if name == "dp-pos":
        return _PosPursuer(cfg.table, tb)
    if name == "dp-belief":
        return _BeliefPursuer(cfg.table, tb)
    if name == "shortest-path":
        return _ShortestPathPursuer()
    if name == "random":
        return _RandomPursuer(rng)
    return _StayPursuer()


def _make_evader(cfg: EpisodeConfig, tb: TieBreak,
                 rng: np.random.Generator) -> _Evader:
    name = cfg.evader
    if name == "dp-async-evader":
        return _AsyncEvader(cfg.table, tb)
    if name == "dp-sync-evader":
        return _SyncEvader(cfg.table, tb)
    if name == "random":
        return _RandomEvader(rng)
    return _StayEvader()


class Episode:
    """One seeded game, stepped either by an internal pursuer policy or
    by externally supplied joint actions (the wire protocol case)."""

    def __init__(self, cfg: EpisodeConfig, episode_index: int = 0,
                 start: JointState | None = None):
        self.cfg = cfg
        self.g = cfg.graph
        ss = np.random.SeedSequence(cfg.seed, spawn_key=(episode_index,))
        starts, s_p_rng, s_e_rng, s_pt, s_et = ss.spawn(5)
        self.start_rng = np.random.default_rng(starts)
        if cfg.tiebreak == "seeded":
            p_tb = TieBreak.seeded(np.random.default_rng(s_pt))
            e_tb = TieBreak.seeded(np.random.default_rng(s_et))
        else:
            p_tb = e_tb = TieBreak.lowest()
        self.pursuer = _make_pursuer(cfg, p_tb, np.random.default_rng(s_p_rng))
        self.evader = _make_evader(cfg, e_tb, np.random.default_rng(s_e_rng))
        self.opp = (KnownAsyncOpponent(cfg.table)
                    if cfg.opponent_model == "known" and cfg.evader == "dp-async-evader"
                    else UniformOpponent())
        if start is None:
            start = sample_initial(cfg, self.start_rng)
        elif len(start.pursuers) != cfg.m or not all(
                0 <= v < self.g.n for v in (*start.pursuers, start.evader)):
            raise ConfigError(f"start state {start} does not fit the config")
        self.s_p: tuple[int, ...] = start.pursuers
        self.s_e: int = start.evader
        self.tracker: BeliefState = belief_mod.init(self.g.n, self.s_e)
        self.steps = 0
        self.captured = terminal(self.g, cfg.capture, start)
        self.trace: list[TraceStep] = [self._snapshot()]

    def _snapshot(self) -> TraceStep:
        observed = bool(observed_set(self.g, self.s_p, self.cfg.obs)[self.s_e])
        return TraceStep(
            pursuers=tuple(self.s_p), evader=self.s_e,
            pos=tuple(self.tracker.pos_ids()),
            belief=tuple(self.tracker.belief_pairs()),
            observed=observed)

    @property
    def done(self) -> bool:
        return self.captured or self.steps >= self.cfg.max_steps

    def legal_joint(self, move: tuple[int, ...]) -> bool:
        return (len(move) == len(self.s_p)
                and all(a in self.g.closed[p] for a, p in zip(move, self.s_p)))

    def step(self, actions: tuple[int, ...] | None = None) -> bool:
        """Advance one timestep; returns the post-move capture flag."""
        if self.done:
            raise IllegalMove("episode is already finished")
        if actions is None:
            announced = self.pursuer.act(self)
        else:
            announced = tuple(int(a) for a in actions)
        if not self.legal_joint(announced):
            raise IllegalMove(f"pursuer move {announced} illegal from {self.s_p}")
        reply = int(self.evader.act(self, announced))
        if reply not in self.g.closed[self.s_e]:
            raise IllegalMove(f"evader move {reply} illegal from {self.s_e}")
        self.s_p = announced
        self.s_e = reply
        self.steps += 1
        self.captured = terminal(self.g, self.cfg.capture,
                                 JointState(self.s_p, self.s_e))
        if self.steps % self.cfg.update_period == 0:
            if isinstance(self.opp, KnownAsyncOpponent):
                self.opp.set_announced(announced)
            try:
                self.tracker = belief_mod.update(
                    self.tracker, self.g, self.s_p, self.cfg.obs,
                    self.s_e, self.opp)
            except TrackerCollapse:
                if self.cfg.update_period == 1:
                    raise
                # stale-update mode may legitimately lose the evader
                self.tracker = belief_mod.unknown_state(self.g, self.s_p,
                                                        self.cfg.obs)
        self.trace.append(self._snapshot())
        return self.captured

    def run(self) -> EpisodeResult:
        while not self.done:
            self.step()
        return EpisodeResult(captured=self.captured, steps=self.steps,
                             trace=self.trace)


def run_episode(cfg: EpisodeConfig, episode_index: int = 0,
                start: JointState | None = None) -> EpisodeResult:
    return Episode(cfg, episode_index, start=start).run()


_WORKER_CFG: EpisodeConfig | None = None


def _worker_init(cfg: EpisodeConfig) -> None:
    global _WORKER_CFG
    _WORKER_CFG = cfg


def _worker_run(index: int) -> tuple[bool, int]:
    r = run_episode(_WORKER_CFG, index)
    return r.captured, r.steps


def evaluate(cfg: EpisodeConfig, episodes: int, jobs: int = 1) -> EvalReport:
    """Aggregate independent seeded episodes.

    Episode i always draws from the (cfg.seed, i) stream, so results are
    identical whatever the job count, and two evaluations sharing a seed
    are paired start-for-start.
    """
    if episodes < 1:
        raise ConfigError("episodes must be >= 1")
    outcomes: list[tuple[bool, int]] = []
    if jobs <= 1:
        for i in range(episodes):
            r = run_episode(cfg, i)
            outcomes.append((r.captured, r.steps))
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(jobs, initializer=_worker_init, initargs=(cfg,)) as pool:
            outcomes = pool.map(_worker_run, range(episodes), chunksize=16)
    successes = sum(1 for c, _ in outcomes if c)
    mean_steps = (sum(s for c, s in outcomes if c) / successes
                  if successes else None)
    return EvalReport(episodes=episodes, successes=successes,
                      success_rate=successes / episodes,
                      mean_capture_steps=mean_steps, seed=cfg.seed)
