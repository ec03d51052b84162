"""Toy-scale guided SAC trainer for graph pursuit policies.

Talks JSON lines to a `peg env-serve` subprocess; never imports the
engine package.  See train.run_training for the entry point.
"""

from .client import EnvClient, EnvError
from .features import (GraphInfo, build_features, featurize, graph_info_from_dict,
                       load_graph_dir, write_toy_corpus)
from .model import CriticNet, PolicyNet
from .sac import (ReplayBuffer, SacConfig, SacState, State, Transition, act,
                  compute_losses, joint_action_sets, joint_log_probs,
                  state_from_obs, update)
from .train import TrainerConfig, TrainResult, evaluate_policy, run_training

__all__ = [
    "CriticNet", "EnvClient", "EnvError", "GraphInfo", "PolicyNet",
    "ReplayBuffer", "SacConfig", "SacState", "State", "TrainResult",
    "TrainerConfig", "Transition", "act", "build_features", "compute_losses",
    "evaluate_policy", "featurize", "graph_info_from_dict",
    "joint_action_sets", "joint_log_probs", "load_graph_dir",
    "run_training", "state_from_obs", "update", "write_toy_corpus",
]
