"""Training loop: guided discrete SAC against the episode server.

One server process hosts the graph corpus; each episode samples a
graph, collects transitions under the current policy (the privileged
evader position and the served reference action ride along into the
replay buffer), and every few episodes the networks take a round of
gradient steps.  Every loss value is checked for finiteness as it is
produced.  Config values mirror the published hyperparameter table by
default; toy runs override the optimizer settings via file or flags.
"""

from __future__ import annotations

import argparse
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .client import EnvClient, EnvError
from .features import load_graph_dir, write_toy_corpus
from .sac import (ReplayBuffer, SacConfig, SacState, Transition, act,
                  state_from_obs, update)


@dataclass
class TrainerConfig:
    graphs_dir: str = "toy_graphs"
    episodes: int = 2000
    seed: int = 0
    m: int = 2
    capture: str = "adjacent"
    evader: str = "dp-async-evader"
    obs_range: int = 1
    max_steps: int = 32
    warmup_episodes: int = 10
    eval_episodes: int = 100
    out_dir: str | None = None
    peg_cmd: str = "peg"
    sac: SacConfig = field(default_factory=SacConfig)

    @classmethod
    def from_file(cls, path: str) -> "TrainerConfig":
        """Flat key=value file; SAC keys live in the same namespace."""
        cfg = cls()
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            cfg.set_option(key.strip(), value.strip())
        return cfg

    def set_option(self, key: str, value: str) -> None:
        for target in (self, self.sac):
            if hasattr(target, key) and key != "sac":
                current = getattr(target, key)
                if isinstance(current, bool):
                    parsed = value.lower() in ("1", "true", "yes")
                elif isinstance(current, int):
                    parsed = int(value)
                elif isinstance(current, float):
                    parsed = float(value)
                else:
                    parsed = value
                setattr(target, key, parsed)
                return
        raise KeyError(f"unknown config key {key!r}")


@dataclass
class TrainResult:
    final_success: float
    curve: list[tuple[int, float]]
    loss_log: list[dict]
    all_losses_finite: bool
    checkpoint: str | None
    episodes: int


def evaluate_policy(client: EnvClient, sac: SacState,
                    infos: dict, episodes: int, seed_base: int = 10**8) -> float:
    """Greedy success rate over fresh seeded episodes, round-robin graphs."""
    gids = sorted(infos)
    wins = 0
    for i in range(episodes):
        gid = gids[i % len(gids)]
        resp = client.reset(gid, seed=seed_base + i)
        state = state_from_obs(gid, resp["obs"])
        done = resp["done"]
        reward = 0.0
        while not done:
            action = act(sac.policy, infos[gid], state, rng=None,
                         dtype=sac.dtype)
            resp = client.step(list(action))
            done = resp["done"]
            reward = resp["reward"]
            state = state_from_obs(gid, resp["obs"])
        wins += int(reward >= 1.0)
    return wins / episodes


def run_training(cfg: TrainerConfig) -> TrainResult:
    torch.manual_seed(cfg.seed)
    infos = load_graph_dir(cfg.graphs_dir)
    gids = sorted(infos)
    sac = SacState(cfg.sac)
    buffer = ReplayBuffer(cfg.sac.buffer_capacity)
    py_rng = random.Random(cfg.seed)
    np_rng = np.random.default_rng(cfg.seed)
    curve: list[tuple[int, float]] = []
    loss_log: list[dict] = []
    window: deque[float] = deque(maxlen=100)
    finite = True

    with EnvClient(cfg.graphs_dir, m=cfg.m, capture=cfg.capture,
                   evader=cfg.evader, obs_range=cfg.obs_range,
                   max_steps=cfg.max_steps, guidance=True, privileged=True,
                   peg_cmd=cfg.peg_cmd) as client:
        for ep in range(cfg.episodes):
            gid = gids[int(np_rng.integers(len(gids)))]
            try:
                resp = client.reset(gid, seed=cfg.seed * 1_000_000 + ep)
                state = state_from_obs(gid, resp["obs"])
                ref = tuple(resp["info"]["ref_action"])
                done = resp["done"]
                reward = 0.0
                while not done:
                    action = act(sac.policy, infos[gid], state, rng=np_rng,
                                 dtype=sac.dtype)
                    step = client.step(list(action))
                    done = step["done"]
                    reward = step["reward"]
                    nxt = state_from_obs(gid, step["obs"])
                    buffer.push(Transition(state=state, action=action,
                                           ref_action=ref, reward=reward,
                                           done=done, next_state=nxt))
                    if not done:
                        ref = tuple(step["info"]["ref_action"])
                        state = nxt
            except EnvError as e:
                raise EnvError(e.kind,
                               f"episode {ep} on graph {gid!r}: {e}") from e
            window.append(reward)
            if (ep + 1) % 50 == 0:
                curve.append((ep + 1, sum(window) / len(window)))
            due = (ep + 1) % cfg.sac.update_interval == 0
            if due and ep >= cfg.warmup_episodes and \
                    len(buffer) >= cfg.sac.batch_size:
                report = update(sac, infos, buffer, py_rng)
                finite &= all(math.isfinite(v) for v in report.values())
                loss_log.append({"episode": ep + 1, **report})

        final = evaluate_policy(client, sac, infos, cfg.eval_episodes)

    checkpoint = None
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        checkpoint = str(out / f"policy_seed{cfg.seed}_beta{cfg.sac.beta}.pt")
        sac.save(checkpoint)
        (out / f"curve_seed{cfg.seed}_beta{cfg.sac.beta}.json").write_text(
            json.dumps({"curve": curve, "final_success": final,
                        "loss_log": loss_log[-20:]}))
    return TrainResult(final_success=final, curve=curve, loss_log=loss_log,
                       all_losses_finite=finite, checkpoint=checkpoint,
                       episodes=cfg.episodes)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="peg-train",
        description="guided SAC training against a pursuit episode server")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--graphs-dir")
    parser.add_argument("--episodes", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--update-epochs", type=int)
    parser.add_argument("--update-interval", type=int)
    parser.add_argument("--eval-episodes", type=int)
    parser.add_argument("--out-dir")
    parser.add_argument("--make-toy-corpus", action="store_true",
                        help="write the default three toy graphs first")
    args = parser.parse_args(argv)

    cfg = TrainerConfig.from_file(args.config) if args.config else TrainerConfig()
    overrides = {"graphs_dir": args.graphs_dir, "episodes": args.episodes,
                 "seed": args.seed, "beta": args.beta, "lr": args.lr,
                 "batch_size": args.batch_size,
                 "update_epochs": args.update_epochs,
                 "update_interval": args.update_interval,
                 "eval_episodes": args.eval_episodes, "out_dir": args.out_dir}
    for key, value in overrides.items():
        if value is not None:
            cfg.set_option(key, str(value))
    if args.make_toy_corpus:
        write_toy_corpus(cfg.graphs_dir)
    result = run_training(cfg)
    print(json.dumps({"final_success": result.final_success,
                      "episodes": result.episodes,
                      "all_losses_finite": result.all_losses_finite,
                      "checkpoint": result.checkpoint}))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
