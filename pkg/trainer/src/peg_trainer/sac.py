"""Discrete soft actor-critic over joint pursuer moves, with guidance.

The joint policy is decomposed sequentially: agent l's distribution is
produced with agents < l already moved in the feature matrix, so the
full joint distribution is enumerated by expanding each agent's closed
neighborhood in turn (action sets are tiny at toy scale).  All
expectations over actions are exact sums, which keeps the losses
deterministic functions of the parameters - handy for the
finite-difference gradient checks.

Losses:
  critic   J_Q = 1/2 (Q(s,a) - (r + gamma * E[V(s')]))^2, twin minimum
           targets with soft-updated copies;
  policy   J_pi = E_a~pi [ alpha * log pi - min Q ], Q detached;
  guidance L = J_pi - beta * log pi(s, a*), a* served by the env;
  alpha    J(alpha) = -alpha * (log pi + target entropy), target
           entropy = coef * log(#legal joint actions).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

import numpy as np
import torch
from torch import nn

from .features import GraphInfo, build_features
from .model import CriticNet, PolicyNet


@dataclass
class State:
    graph_id: str
    pursuers: tuple[int, ...]
    pos: tuple[int, ...]
    belief: tuple[tuple[int, float], ...]
    evader: int


@dataclass
class Transition:
    state: State
    action: tuple[int, ...]
    ref_action: tuple[int, ...]
    reward: float
    done: bool
    next_state: State


def state_from_obs(graph_id: str, obs: dict) -> State:
    return State(graph_id=graph_id, pursuers=tuple(obs["pursuers"]),
                 pos=tuple(obs["pos"]),
                 belief=tuple((int(v), float(p)) for v, p in obs["belief"]),
                 evader=int(obs["evader"]))


class ReplayBuffer:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: list[Transition] = []
        self.cursor = 0

    def push(self, t: Transition) -> None:
        if len(self.items) < self.capacity:
            self.items.append(t)
        else:
            self.items[self.cursor] = t
            self.cursor = (self.cursor + 1) % self.capacity

    def sample(self, rng: random.Random, k: int) -> list[Transition]:
        return rng.sample(self.items, min(k, len(self.items)))

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class SacConfig:
    m: int = 2
    gamma: float = 0.99
    target_entropy_coef: float = 0.05
    embed_dim: int = 128
    heads: int = 8
    encoder_layers: int = 6
    batch_size: int = 128
    lr: float = 1e-5
    update_epochs: int = 8
    beta: float = 0.0
    tau: float = 0.005
    buffer_capacity: int = 20_000
    update_interval: int = 4  # episodes between update rounds
    alpha_init: float = 1.0
    alpha_lr: float | None = None  # defaults to lr


class SacState:
    """Networks, targets, temperature, and their optimizers."""

    def __init__(self, cfg: SacConfig, dtype: torch.dtype = torch.float32):
        self.cfg = cfg
        self.dtype = dtype
        actor_f = cfg.m + 2
        critic_f = cfg.m + 3  # privileged evader one-hot column
        kw = dict(dim=cfg.embed_dim, heads=cfg.heads, layers=cfg.encoder_layers)
        self.policy = PolicyNet(actor_f, **kw).to(dtype)
        self.q1 = CriticNet(critic_f, cfg.m, **kw).to(dtype)
        self.q2 = CriticNet(critic_f, cfg.m, **kw).to(dtype)
        self.q1_target = CriticNet(critic_f, cfg.m, **kw).to(dtype)
        self.q2_target = CriticNet(critic_f, cfg.m, **kw).to(dtype)
        self.q1_target.load_state_dict(self.q1.state_dict())
        self.q2_target.load_state_dict(self.q2.state_dict())
        for p in (*self.q1_target.parameters(), *self.q2_target.parameters()):
            p.requires_grad_(False)
        self.log_alpha = torch.tensor([float(np.log(cfg.alpha_init))],
                                      dtype=dtype, requires_grad=True)
        self.policy_opt = torch.optim.Adam(self.policy.parameters(), lr=cfg.lr)
        self.q_opt = torch.optim.Adam(
            list(self.q1.parameters()) + list(self.q2.parameters()), lr=cfg.lr)
        self.alpha_opt = torch.optim.Adam(
            [self.log_alpha], lr=cfg.lr if cfg.alpha_lr is None else cfg.alpha_lr)

    @property
    def alpha(self) -> torch.Tensor:
        return self.log_alpha.exp()

    def soft_update_targets(self) -> None:
        with torch.no_grad():
            for tgt, src in ((self.q1_target, self.q1), (self.q2_target, self.q2)):
                for pt, ps in zip(tgt.parameters(), src.parameters()):
                    pt.mul_(1.0 - self.cfg.tau).add_(self.cfg.tau * ps)

    def save(self, path: str) -> None:
        torch.save({
            "cfg": self.cfg.__dict__,
            "policy": self.policy.state_dict(),
            "q1": self.q1.state_dict(),
            "q2": self.q2.state_dict(),
            "q1_target": self.q1_target.state_dict(),
            "q2_target": self.q2_target.state_dict(),
            "log_alpha": self.log_alpha.detach(),
        }, path)

    @classmethod
    def load(cls, path: str) -> "SacState":
        blob = torch.load(path, weights_only=False)
        state = cls(SacConfig(**blob["cfg"]))
        state.policy.load_state_dict(blob["policy"])
        state.q1.load_state_dict(blob["q1"])
        state.q2.load_state_dict(blob["q2"])
        state.q1_target.load_state_dict(blob["q1_target"])
        state.q2_target.load_state_dict(blob["q2_target"])
        with torch.no_grad():
            state.log_alpha.copy_(blob["log_alpha"])
        return state


# -- batched featurization ---------------------------------------------------

def _pad_batch(infos: dict[str, GraphInfo], feats: list[np.ndarray],
               gids: list[str], dtype: torch.dtype):
    n_max = max(infos[g].n for g in gids)
    b = len(feats)
    f = feats[0].shape[1]
    x = torch.zeros(b, n_max, f, dtype=dtype)
    adj = torch.zeros(b, n_max, n_max, dtype=dtype)
    valid = torch.zeros(b, n_max, dtype=torch.bool)
    for i, (mat, gid) in enumerate(zip(feats, gids)):
        info = infos[gid]
        x[i, :info.n] = torch.from_numpy(mat).to(dtype)
        adj[i, :info.n, :info.n] = torch.from_numpy(info.adj_mask).to(dtype)
        valid[i, :info.n] = True
    return x, adj, valid


def _pad_neighbors(options: list[tuple[int, ...]]):
    k_max = max(len(o) for o in options)
    nbrs = torch.zeros(len(options), k_max, dtype=torch.long)
    mask = torch.zeros(len(options), k_max, dtype=torch.bool)
    for i, opt in enumerate(options):
        nbrs[i, :len(opt)] = torch.tensor(opt)
        mask[i, :len(opt)] = True
    return nbrs, mask


def joint_action_sets(infos: dict[str, GraphInfo],
                      states: list[State]) -> list[list[tuple[int, ...]]]:
    """Legal joint moves per state, in sequential-expansion order."""
    out = []
    for s in states:
        info = infos[s.graph_id]
        joints: list[tuple[int, ...]] = [()]
        for p in s.pursuers:
            joints = [j + (q,) for j in joints for q in info.closed[p]]
        out.append(joints)
    return out


def joint_log_probs(policy: PolicyNet, infos: dict[str, GraphInfo],
                    states: list[State], dtype: torch.dtype):
    """Exact joint distribution per state via sequential expansion.

    Returns (joints, logp, mask): per-sample joint tuples in expansion
    order, a (B, A_max) log-probability tensor, and its validity mask.
    """
    m = len(states[0].pursuers)
    sample_idx = list(range(len(states)))
    positions = [list(s.pursuers) for s in states]
    acc = torch.zeros(len(states), dtype=dtype)
    for level in range(m):
        feats = []
        options = []
        gids = []
        for si, pos_l in zip(sample_idx, positions):
            s = states[si]
            info = infos[s.graph_id]
            feats.append(build_features(info, pos_l, list(s.pos),
                                        [[v, p] for v, p in s.belief]))
            options.append(info.closed[pos_l[level]])
            gids.append(s.graph_id)
        x, adj, valid = _pad_batch(infos, feats, gids, dtype)
        acting = torch.tensor([p[level] for p in positions], dtype=torch.long)
        nbrs, nbr_mask = _pad_neighbors(options)
        lp = policy(x, adj, valid, acting, nbrs, nbr_mask)
        new_idx = []
        new_pos = []
        rows = []
        cols = []
        for r, (si, pos_l, opts) in enumerate(zip(sample_idx, positions, options)):
            for k, node in enumerate(opts):
                moved = pos_l.copy()
                moved[level] = node
                new_idx.append(si)
                new_pos.append(moved)
                rows.append(r)
                cols.append(k)
        acc = acc[rows] + lp[rows, cols]
        sample_idx, positions = new_idx, new_pos
    joints_per_sample: list[list[tuple[int, ...]]] = [[] for _ in states]
    slots: list[list[int]] = [[] for _ in states]
    for flat, (si, pos_l) in enumerate(zip(sample_idx, positions)):
        joints_per_sample[si].append(tuple(pos_l))
        slots[si].append(flat)
    a_max = max(len(j) for j in joints_per_sample)
    logp = torch.full((len(states), a_max), torch.finfo(dtype).min, dtype=dtype)
    mask = torch.zeros(len(states), a_max, dtype=torch.bool)
    for si, flat_ids in enumerate(slots):
        logp[si, :len(flat_ids)] = acc[flat_ids]
        mask[si, :len(flat_ids)] = True
    return joints_per_sample, logp, mask


def critic_inputs(infos: dict[str, GraphInfo], states: list[State],
                  dtype: torch.dtype):
    feats = [build_features(infos[s.graph_id], list(s.pursuers), list(s.pos),
                            [[v, p] for v, p in s.belief], evader=s.evader)
             for s in states]
    return _pad_batch(infos, feats, [s.graph_id for s in states], dtype)


def _pad_actions(action_sets: list[list[tuple[int, ...]]], m: int):
    a_max = max(len(a) for a in action_sets)
    acts = torch.zeros(len(action_sets), a_max, m, dtype=torch.long)
    mask = torch.zeros(len(action_sets), a_max, dtype=torch.bool)
    for i, joints in enumerate(action_sets):
        acts[i, :len(joints)] = torch.tensor(joints)
        mask[i, :len(joints)] = True
    return acts, mask


# -- losses -------------------------------------------------------------------

def compute_losses(sac: SacState, infos: dict[str, GraphInfo],
                   batch: list[Transition]) -> dict[str, torch.Tensor]:
    cfg = sac.cfg
    dtype = sac.dtype
    states = [t.state for t in batch]
    next_states = [t.next_state for t in batch]
    rewards = torch.tensor([t.reward for t in batch], dtype=dtype)
    done = torch.tensor([t.done for t in batch], dtype=dtype)

    # targets from the next-state joint distribution
    with torch.no_grad():
        nxt_joints, nxt_logp, nxt_mask = joint_log_probs(
            sac.policy, infos, next_states, dtype)
        nxt_probs = nxt_logp.exp() * nxt_mask
        nxt_x, nxt_adj, nxt_valid = critic_inputs(infos, next_states, dtype)
        nxt_acts, _ = _pad_actions(nxt_joints, cfg.m)
        q_next = torch.minimum(
            sac.q1_target(nxt_x, nxt_adj, nxt_valid, nxt_acts),
            sac.q2_target(nxt_x, nxt_adj, nxt_valid, nxt_acts))
        ent_term = torch.where(nxt_mask, nxt_logp, torch.zeros_like(nxt_logp))
        v_next = (nxt_probs * (q_next - sac.alpha * ent_term)).sum(dim=1)
        target = rewards + cfg.gamma * (1.0 - done) * v_next

    x, adj, valid = critic_inputs(infos, states, dtype)
    joints, logp, mask = joint_log_probs(sac.policy, infos, states, dtype)
    probs = logp.exp() * mask
    acts, _ = _pad_actions(joints, cfg.m)
    taken = torch.tensor([t.action for t in batch],
                         dtype=torch.long).unsqueeze(1)
    # one encoder pass per critic covers the taken action and the
    # whole candidate set
    q1_all = sac.q1(x, adj, valid, torch.cat([taken, acts], dim=1))
    q2_all = sac.q2(x, adj, valid, torch.cat([taken, acts], dim=1))
    q1_taken, q2_taken = q1_all[:, 0], q2_all[:, 0]
    j_q1 = 0.5 * ((q1_taken - target) ** 2).mean()
    j_q2 = 0.5 * ((q2_taken - target) ** 2).mean()

    # policy terms over the current-state joint distribution
    q_pi = torch.minimum(q1_all[:, 1:], q2_all[:, 1:]).detach()
    safe_logp = torch.where(mask, logp, torch.zeros_like(logp))
    j_pi = (probs * (sac.alpha.detach() * safe_logp - q_pi)).sum(dim=1).mean()

    ref_lp = []
    for i, t in enumerate(batch):
        ref_lp.append(logp[i, joints[i].index(tuple(t.ref_action))])
    guidance = -torch.stack(ref_lp).mean()
    policy_loss = j_pi + cfg.beta * guidance

    entropy = -(probs * safe_logp).sum(dim=1)
    target_entropy = cfg.target_entropy_coef * \
        torch.log(mask.sum(dim=1).to(dtype))
    j_alpha = (sac.alpha * (entropy - target_entropy).detach()).mean()

    return {"j_q1": j_q1, "j_q2": j_q2, "j_pi": j_pi, "guidance": guidance,
            "policy_loss": policy_loss, "j_alpha": j_alpha,
            "entropy": entropy.mean(), "alpha": sac.alpha.detach()}


def update(sac: SacState, infos: dict[str, GraphInfo],
           buffer: ReplayBuffer, rng: random.Random) -> dict[str, float]:
    """One update round: cfg.update_epochs gradient steps on fresh batches."""
    report: dict[str, float] = {}
    for _ in range(sac.cfg.update_epochs):
        batch = buffer.sample(rng, sac.cfg.batch_size)
        losses = compute_losses(sac, infos, batch)

        sac.q_opt.zero_grad()
        (losses["j_q1"] + losses["j_q2"]).backward()
        sac.q_opt.step()

        sac.policy_opt.zero_grad()
        losses["policy_loss"].backward()
        sac.policy_opt.step()

        sac.alpha_opt.zero_grad()
        losses["j_alpha"].backward()
        sac.alpha_opt.step()

        sac.soft_update_targets()
        report = {k: float(v.detach()) for k, v in losses.items()}
    return report


# -- acting -------------------------------------------------------------------

def act(policy: PolicyNet, info: GraphInfo, state: State,
        rng: np.random.Generator | None = None,
        dtype: torch.dtype = torch.float32) -> tuple[int, ...]:
    """Sample (or argmax when rng is None) one joint move, agent by agent."""
    positions = list(state.pursuers)
    with torch.no_grad():
        for level in range(len(positions)):
            feats = build_features(info, positions, list(state.pos),
                                   [[v, p] for v, p in state.belief])
            x, adj, valid = _pad_batch({info.graph_id: info}, [feats],
                                       [info.graph_id], dtype)
            options = info.closed[positions[level]]
            nbrs, nbr_mask = _pad_neighbors([options])
            lp = policy(x, adj, valid,
                        torch.tensor([positions[level]]), nbrs, nbr_mask)[0]
            probs = lp[:len(options)].exp().numpy().astype(np.float64)
            probs /= probs.sum()
            if rng is None:
                choice = int(np.argmax(probs))
            else:
                choice = int(rng.choice(len(options), p=probs))
            positions[level] = options[choice]
    return tuple(positions)
