"""Line-delimited JSON environment server over stdio.

One episode at a time, strict request/response alternation, one JSON
object per line.  The client plays the pursuers; the configured evader
answers each announced joint move inside the server, so the asynchronous
contract holds across the wire.  In the default non-privileged mode no
response ever carries the evader's position while it is out of range.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO

import numpy as np

from .belief import ObservationModel
from .dp import CaptureSpec, DistanceTable, solve
from .errors import IllegalMove, PegError, ProtocolError, UnknownGraph
from .graph import Graph, load_json
from .policies import TieBreak, pursuer_belief
from .sim import EXTERNAL_PURSUER, Episode, EpisodeConfig


@dataclass
class EnvOptions:
    evader: str = "dp-async-evader"
    obs_range: int = 2
    capture: CaptureSpec = CaptureSpec.adjacent()
    m: int = 2
    max_steps: int = 128
    guidance: bool = False
    privileged: bool = False
    update_period: int = 1
    tiebreak: str = "lowest"


class EnvServer:
    """Serves reset/step/graphs/close over paired text streams."""

    def __init__(self, registry: dict[str, tuple[Graph, DistanceTable]],
                 options: EnvOptions | None = None):
        self.registry = registry
        self.options = options or EnvOptions()
        self.seq = 0
        self.episode: Episode | None = None
        self.episode_options: EnvOptions = self.options
        self.graph_id: str | None = None
        self._diameters: dict[str, int] = {}

    # -- wire plumbing ----------------------------------------------------

    def serve(self, instream: IO[str], outstream: IO[str]) -> None:
        for line in instream:
            line = line.strip()
            if not line:
                continue
            resp, close = self._dispatch_line(line)
            outstream.write(json.dumps(resp, sort_keys=True) + "\n")
            outstream.flush()
            if close:
                break

    def _dispatch_line(self, line: str) -> tuple[dict, bool]:
        self.seq += 1
        try:
            try:
                req = json.loads(line)
            except json.JSONDecodeError as e:
                raise ProtocolError(f"malformed request line: {e}") from e
            if not isinstance(req, dict) or "cmd" not in req:
                raise ProtocolError("request must be an object with a cmd field")
            return self.handle(req)
        except PegError as e:
            return {"seq": self.seq, "error": type(e).__name__,
                    "message": str(e)}, False

    # -- command handling --------------------------------------------------

    def handle(self, req: dict) -> tuple[dict, bool]:
        cmd = req["cmd"]
        if cmd == "graphs":
            listing = [{"graph_id": gid, "n": g.n,
                        "hash": f"{g.id:#018x}", "m": t.m}
                       for gid, (g, t) in sorted(self.registry.items())]
            return {"seq": self.seq, "graphs": listing}, False
        if cmd == "reset":
            return self._reset(req), False
        if cmd == "step":
            return self._step(req), False
        if cmd == "close":
            return {"seq": self.seq, "ok": True}, True
        raise ProtocolError(f"unknown cmd {cmd!r}")

    def _reset(self, req: dict) -> dict:
        gid = req.get("graph_id")
        if gid is None and len(self.registry) == 1:
            gid = next(iter(self.registry))
        if gid not in self.registry:
            raise UnknownGraph(f"graph {gid!r} is not registered")
        graph, table = self.registry[gid]
        opts = self.options
        overrides = req.get("options") or {}
        allowed = {"privileged", "guidance", "max_steps", "evader",
                   "update_period", "obs_range"}
        bad = set(overrides) - allowed
        if bad:
            raise ProtocolError(f"unknown reset options {sorted(bad)}")
        if overrides:
            opts = replace(opts, **overrides)
        seed = int(req.get("seed", 0))
        cfg = EpisodeConfig(
            graph=graph, m=table.m, capture=table.capture,
            obs=ObservationModel(range=opts.obs_range),
            pursuer=EXTERNAL_PURSUER, evader=opts.evader, table=table,
            max_steps=opts.max_steps, seed=seed,
            update_period=opts.update_period, tiebreak=opts.tiebreak)
        self.episode = Episode(cfg)
        self.episode_options = opts
        self.graph_id = gid
        return self._response(reward=None)

    def _step(self, req: dict) -> dict:
        if self.episode is None:
            raise ProtocolError("step before reset")
        if self.episode.done:
            raise ProtocolError("episode is done; reset to continue")
        actions = req.get("actions")
        if not isinstance(actions, list) or not all(
                isinstance(a, int) for a in actions):
            raise ProtocolError("actions must be a list of node ids")
        try:
            captured = self.episode.step(tuple(actions))
        except IllegalMove as e:
            from .errors import IllegalAction
            raise IllegalAction(str(e)) from e
        return self._response(reward=1.0 if captured else 0.0)

    # -- observation building ----------------------------------------------

    def _diameter(self, gid: str) -> int:
        if gid not in self._diameters:
            self._diameters[gid] = self.registry[gid][0].diameter
        return self._diameters[gid]

    def _features(self, ep: Episode) -> list[list[float]]:
        g = ep.g
        dia = max(self._diameter(self.graph_id), 1)
        dist = g.distance_matrix()
        cols = [dist[:, p] / dia for p in ep.s_p]
        cols.append(ep.tracker.pos.astype(float))
        cols.append(ep.tracker.belief)
        mat = np.stack(cols, axis=1)
        return [[round(float(x), 9) for x in row] for row in mat]

    def _response(self, reward: float | None) -> dict:
        ep = self.episode
        opts = self.episode_options
        snap = ep.trace[-1]
        obs = {
            "t": ep.steps,
            "pursuers": list(ep.s_p),
            "pos": list(snap.pos),
            "belief": [[v, m] for v, m in snap.belief],
            "observed": snap.observed,
            "legal_actions": [list(ep.g.closed[p]) for p in ep.s_p],
            "features": self._features(ep),
        }
        if snap.observed or opts.privileged:
            obs["evader"] = ep.s_e
        done = ep.done
        info: dict = {"graph_id": self.graph_id, "privileged": opts.privileged,
                      "captured": ep.captured}
        if opts.guidance and not done:
            info["ref_action"] = list(pursuer_belief(
                ep.g, ep.cfg.table, ep.s_p, ep.tracker.belief,
                TieBreak.lowest()))
        resp = {"seq": self.seq, "obs": obs, "done": done, "info": info}
        if reward is not None:
            resp["reward"] = reward
        return resp


def load_registry(graphs_dir: str, m: int, capture: CaptureSpec,
                  budget: int = 2**31) -> dict[str, tuple[Graph, DistanceTable]]:
    """Load every *.json graph in a directory; use the sibling *.pegd
    table when present, otherwise solve one on the spot."""
    registry: dict[str, tuple[Graph, DistanceTable]] = {}
    root = Path(graphs_dir)
    for path in sorted(root.glob("*.json")):
        graph = load_json(path.read_bytes())
        table_path = path.with_suffix(".pegd")
        if table_path.exists():
            table = DistanceTable.load(str(table_path), graph)
        else:
            table = solve(graph, m, capture, budget=budget)
        registry[path.stem] = (graph, table)
    if not registry:
        raise UnknownGraph(f"no graphs found in {graphs_dir}")
    return registry
