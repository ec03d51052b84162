import numpy as np
import pytest
import torch

from peg_trainer import (SacConfig, SacState, State, Transition,
                         load_graph_dir, write_toy_corpus)

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("graphs")
    write_toy_corpus(str(path))
    return str(path)


@pytest.fixture(scope="session")
def infos(corpus_dir):
    return load_graph_dir(corpus_dir)


@pytest.fixture(scope="session")
def tiny_cfg():
    # small net for plumbing tests; the full-size architecture is used in
    # the acceptance module
    return SacConfig(embed_dim=32, heads=4, encoder_layers=2, batch_size=16,
                     lr=3e-4, update_epochs=1, update_interval=4)


def random_state(infos, rng, gid=None) -> State:
    gid = gid or sorted(infos)[int(rng.integers(len(infos)))]
    info = infos[gid]
    pursuers = tuple(int(v) for v in rng.integers(info.n, size=2))
    evader = int(rng.integers(info.n))
    pos = tuple(sorted({evader, *info.closed[evader][:2]}))
    mass = rng.random(len(pos)) + 0.1
    mass /= mass.sum()
    belief = tuple((int(v), float(m)) for v, m in zip(pos, mass))
    return State(gid, pursuers, pos, belief, evader)


def random_transition(infos, rng) -> Transition:
    st = random_state(infos, rng)
    info = infos[st.graph_id]
    action = tuple(info.closed[p][int(rng.integers(len(info.closed[p])))]
                   for p in st.pursuers)
    ref = tuple(info.closed[p][0] for p in st.pursuers)
    nxt = State(st.graph_id, action, st.pos, st.belief, st.evader)
    return Transition(state=st, action=action, ref_action=ref,
                      reward=float(rng.random() < 0.2), done=bool(rng.random() < 0.1),
                      next_state=nxt)
