import math
import random

import numpy as np
import pytest
import torch

from peg_trainer import (EnvClient, ReplayBuffer, SacConfig, SacState,
                         compute_losses, evaluate_policy, joint_action_sets,
                         joint_log_probs, state_from_obs, update)
from peg_trainer.sac import _pad_actions, act

from conftest import random_state, random_transition


def make_batch(infos, rng, k=8):
    return [random_transition(infos, rng) for _ in range(k)]


def zero_critic_outputs(sac):
    for net in (sac.q1, sac.q2, sac.q1_target, sac.q2_target):
        last = net.head[-1]
        with torch.no_grad():
            last.weight.zero_()
            last.bias.zero_()


class TestJointDistribution:
    def test_probabilities_sum_to_one(self, infos, tiny_cfg):
        torch.manual_seed(0)
        sac = SacState(tiny_cfg)
        rng = np.random.default_rng(0)
        states = [random_state(infos, rng) for _ in range(6)]
        joints, logp, mask = joint_log_probs(sac.policy, infos, states,
                                             torch.float32)
        probs = logp.exp() * mask
        assert torch.allclose(probs.sum(dim=1),
                              torch.ones(len(states)), atol=1e-5)

    def test_joint_count_is_product_of_closed_sizes(self, infos, tiny_cfg):
        rng = np.random.default_rng(1)
        state = random_state(infos, rng)
        info = infos[state.graph_id]
        sets = joint_action_sets(infos, [state])[0]
        want = 1
        for p in state.pursuers:
            want *= len(info.closed[p])
        assert len(sets) == want
        assert len(set(sets)) == want

    def test_expansion_order_matches_action_sets(self, infos, tiny_cfg):
        torch.manual_seed(2)
        sac = SacState(tiny_cfg)
        rng = np.random.default_rng(2)
        states = [random_state(infos, rng) for _ in range(3)]
        joints, _, _ = joint_log_probs(sac.policy, infos, states, torch.float32)
        assert joints == joint_action_sets(infos, states)

    def test_uniform_policy_logp_is_minus_log_k(self, infos, tiny_cfg):
        # zeroing the pointer query makes every agent's pointer uniform,
        # so each joint action has probability 1/k
        torch.manual_seed(3)
        sac = SacState(tiny_cfg)
        with torch.no_grad():
            sac.policy.merge.weight.zero_()
            sac.policy.merge.bias.zero_()
        rng = np.random.default_rng(3)
        states = [random_state(infos, rng) for _ in range(4)]
        joints, logp, mask = joint_log_probs(sac.policy, infos, states,
                                             torch.float32)
        for i, js in enumerate(joints):
            want = -math.log(len(js))
            got = logp[i, :len(js)]
            assert torch.allclose(got, torch.full_like(got, want), atol=1e-5)


class TestLosses:
    def test_beta_zero_policy_loss_is_plain_sac(self, infos, tiny_cfg):
        torch.manual_seed(4)
        sac = SacState(tiny_cfg)
        batch = make_batch(infos, np.random.default_rng(4))
        losses = compute_losses(sac, infos, batch)
        assert float(losses["policy_loss"]) == float(losses["j_pi"])

    def test_guidance_term_scales_with_beta(self, infos, tiny_cfg):
        torch.manual_seed(5)
        cfg = SacConfig(**{**tiny_cfg.__dict__, "beta": 0.1})
        sac = SacState(cfg)
        batch = make_batch(infos, np.random.default_rng(5))
        losses = compute_losses(sac, infos, batch)
        assert float(losses["policy_loss"]) == pytest.approx(
            float(losses["j_pi"]) + 0.1 * float(losses["guidance"]), rel=1e-6)

    def test_guidance_is_negative_mean_ref_logprob(self, infos, tiny_cfg):
        torch.manual_seed(6)
        sac = SacState(tiny_cfg)
        batch = make_batch(infos, np.random.default_rng(6))
        losses = compute_losses(sac, infos, batch)
        joints, logp, _ = joint_log_probs(
            sac.policy, infos, [t.state for t in batch], torch.float32)
        want = -np.mean([float(logp[i, joints[i].index(t.ref_action)])
                         for i, t in enumerate(batch)])
        assert float(losses["guidance"]) == pytest.approx(want, rel=1e-6)

    def test_zero_rewards_zero_q_zero_alpha_gives_zero_jq(self, infos, tiny_cfg):
        torch.manual_seed(7)
        sac = SacState(tiny_cfg)
        zero_critic_outputs(sac)
        with torch.no_grad():
            sac.log_alpha.fill_(-40.0)  # alpha ~ 4e-18
        rng = np.random.default_rng(7)
        batch = make_batch(infos, rng)
        for t in batch:
            t.reward = 0.0
            t.done = False
        losses = compute_losses(sac, infos, batch)
        assert abs(float(losses["j_q1"])) < 1e-12
        assert abs(float(losses["j_q2"])) < 1e-12

    def test_one_sgd_step_reduces_jq_on_frozen_batch(self, infos, tiny_cfg):
        torch.manual_seed(8)
        sac = SacState(tiny_cfg)
        batch = make_batch(infos, np.random.default_rng(8))
        losses = compute_losses(sac, infos, batch)
        before = losses["j_q1"] + losses["j_q2"]
        params = list(sac.q1.parameters()) + list(sac.q2.parameters())
        opt = torch.optim.SGD(params, lr=1e-3)
        opt.zero_grad()
        before.backward()
        opt.step()
        after = compute_losses(sac, infos, batch)
        assert float(after["j_q1"] + after["j_q2"]) < float(before)

    def test_entropy_matches_target_form(self, infos, tiny_cfg):
        # uniform policy over k joint moves has entropy log k, so
        # J(alpha) = alpha * (1 - coef) * log k
        torch.manual_seed(9)
        sac = SacState(tiny_cfg)
        with torch.no_grad():
            sac.policy.merge.weight.zero_()
            sac.policy.merge.bias.zero_()
        rng = np.random.default_rng(9)
        batch = make_batch(infos, rng)
        losses = compute_losses(sac, infos, batch)
        ks = [len(j) for j in
              joint_action_sets(infos, [t.state for t in batch])]
        want = float(sac.alpha) * np.mean(
            [(1 - sac.cfg.target_entropy_coef) * math.log(k) for k in ks])
        assert float(losses["j_alpha"]) == pytest.approx(want, rel=1e-4)


class TestReplayBuffer:
    def test_wraparound(self, infos):
        rng = np.random.default_rng(10)
        buf = ReplayBuffer(capacity=5)
        items = [random_transition(infos, rng) for _ in range(8)]
        for t in items:
            buf.push(t)
        assert len(buf) == 5
        assert items[5] in buf.items  # oldest overwritten

    def test_sample_deterministic(self, infos):
        rng = np.random.default_rng(11)
        buf = ReplayBuffer(capacity=50)
        for _ in range(20):
            buf.push(random_transition(infos, rng))
        a = buf.sample(random.Random(3), 8)
        b = buf.sample(random.Random(3), 8)
        assert a == b


class TestUpdateAndCheckpoint:
    def test_update_reports_finite_losses(self, infos, tiny_cfg):
        torch.manual_seed(12)
        sac = SacState(tiny_cfg)
        rng = np.random.default_rng(12)
        buf = ReplayBuffer(200)
        for _ in range(40):
            buf.push(random_transition(infos, rng))
        report = update(sac, infos, buf, random.Random(0))
        assert report
        assert all(math.isfinite(v) for v in report.values())

    def test_checkpoint_roundtrip_same_actions(self, infos, tiny_cfg, tmp_path):
        torch.manual_seed(13)
        sac = SacState(tiny_cfg)
        path = str(tmp_path / "ckpt.pt")
        sac.save(path)
        clone = SacState.load(path)
        rng = np.random.default_rng(13)
        for _ in range(10):
            st = random_state(infos, rng)
            info = infos[st.graph_id]
            assert act(sac.policy, info, st, rng=None) == \
                act(clone.policy, info, st, rng=None)


def test_checkpoint_reload_reproduces_evaluation(corpus_dir, infos, tiny_cfg,
                                                 tmp_path):
    torch.manual_seed(14)
    sac = SacState(tiny_cfg)
    path = str(tmp_path / "ckpt.pt")
    sac.save(path)
    clone = SacState.load(path)
    with EnvClient(corpus_dir, obs_range=1, max_steps=16) as client:
        a = evaluate_policy(client, sac, infos, episodes=12)
        b = evaluate_policy(client, sac, infos, episodes=12)
        c = evaluate_policy(client, clone, infos, episodes=12)
    assert a == b == c
