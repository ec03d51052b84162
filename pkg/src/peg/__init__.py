"""Graph pursuit-evasion engine.

Solves worst-case capture-distance tables over joint pursuer/evader
states, derives pursuer and evader policies for synchronous,
asynchronous-move, and partially observable play, and evaluates them in
a seeded episode simulator.  A brute-force oracle validates the solver
at small scale and a JSON-lines stdio protocol exposes episodes to
external agents.
"""

from .belief import BeliefState, ObservationModel, observed_set
from .dp import INFINITY, CaptureSpec, DistanceTable, JointState, solve, terminal
from .graph import Graph, generate_geometric, generate_grid, load_json
from .oracle import assert_equal, horizon_minimax, marking_fixpoint
from .policies import TieBreak
from .sim import EpisodeConfig, EvalReport, EpisodeResult, evaluate, run_episode

__all__ = [
    "INFINITY",
    "BeliefState",
    "CaptureSpec",
    "DistanceTable",
    "EpisodeConfig",
    "EpisodeResult",
    "EvalReport",
    "Graph",
    "JointState",
    "ObservationModel",
    "TieBreak",
    "assert_equal",
    "evaluate",
    "generate_geometric",
    "generate_grid",
    "horizon_minimax",
    "load_json",
    "marking_fixpoint",
    "observed_set",
    "run_episode",
    "solve",
    "terminal",
]

__version__ = "0.1.0"
