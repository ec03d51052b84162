"""Command-line front door; every subcommand is a thin shell over the
library (argument parsing, file IO, and printing only)."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .belief import ObservationModel
from .dp import CaptureSpec, DistanceTable, solve
from .envproto import EnvOptions, EnvServer, load_registry
from .errors import PegError
from .graph import generate_geometric, generate_grid, load_json, to_json
from .oracle import assert_equal, marking_fixpoint
from .sim import EpisodeConfig, evaluate, run_episode


def _read_graph(path: str):
    return load_json(Path(path).read_bytes())


def _emit(obj: dict, as_json: bool, human: str) -> None:
    if as_json:
        print(json.dumps(obj, sort_keys=True))
    else:
        print(human)


def _add_shared_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="graph JSON file")
    p.add_argument("--table", help="solved .pegd table (solved fresh if omitted)")
    p.add_argument("--m", type=int, default=2, help="pursuer count")
    p.add_argument("--capture", default="adjacent",
                   help="colocated | adjacent | radius:k")
    p.add_argument("--range", dest="obs_range", type=int, default=2,
                   help="observation range in hops")
    p.add_argument("--max-steps", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--update-period", type=int, default=1,
                   help="run the tracker update every k steps")
    p.add_argument("--tiebreak", choices=["lowest", "seeded"], default="lowest")
    p.add_argument("--opponent-model", choices=["uniform", "known"],
                   default="uniform")
    p.add_argument("--separation", type=int, default=None,
                   help="minimum start separation (defaults to --range)")
    p.add_argument("--require-finite-d", action="store_true")
    p.add_argument("--json", action="store_true")


def _episode_config(args) -> EpisodeConfig:
    graph = _read_graph(args.graph)
    capture = CaptureSpec.parse(args.capture)
    if args.table:
        table = DistanceTable.load(args.table, graph)
    else:
        needs = (args.pursuer.startswith("dp-") or args.evader.startswith("dp-")
                 or args.require_finite_d or args.opponent_model == "known")
        table = solve(graph, args.m, capture) if needs else None
    return EpisodeConfig(
        graph=graph, m=args.m, capture=capture,
        obs=ObservationModel(range=args.obs_range),
        pursuer=args.pursuer, evader=args.evader, table=table,
        max_steps=args.max_steps, seed=args.seed,
        min_start_separation=args.separation,
        require_finite_d=args.require_finite_d,
        update_period=args.update_period, tiebreak=args.tiebreak,
        opponent_model=args.opponent_model)


def cmd_solve(args) -> int:
    graph = _read_graph(args.graph)
    capture = CaptureSpec.parse(args.capture)
    table = solve(graph, args.m, capture, budget=args.budget)
    if args.out:
        table.save(args.out)
    info = {"n": table.n, "m": table.m, "capture": str(capture),
            "states": int(table.entries.size),
            "max_finite_d": table.max_finite(),
            "infinite_states": table.infinite_count(),
            "out": args.out}
    _emit(info, args.json,
          f"solved {info['states']} states: max finite D = {info['max_finite_d']}, "
          f"infinite states = {info['infinite_states']}"
          + (f", wrote {args.out}" if args.out else ""))
    return 0


def cmd_gen(args) -> int:
    if args.kind == "grid":
        graph = generate_grid(args.rows, args.cols)
    else:
        graph = generate_geometric(args.n, args.radius, args.seed)
    text = to_json(graph)
    if args.out and args.out != "-":
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}: n={graph.n}, edges={graph.num_edges}, "
              f"avg degree={graph.average_degree:.2f}")
    else:
        print(text)
    return 0


def cmd_eval(args) -> int:
    cfg = _episode_config(args)
    report = evaluate(cfg, args.episodes, jobs=args.jobs)
    payload = report.to_dict()
    payload.update({"pursuer": args.pursuer, "evader": args.evader,
                    "range": args.obs_range})
    mean = ("-" if report.mean_capture_steps is None
            else f"{report.mean_capture_steps:.1f}")
    _emit(payload, args.json,
          f"{args.pursuer} vs {args.evader} | episodes={report.episodes} "
          f"success_rate={report.success_rate:.2f} mean_capture_steps={mean}")
    return 0


def cmd_play(args) -> int:
    cfg = _episode_config(args)
    result = run_episode(cfg, episode_index=args.episode_index)
    if args.trace or args.trace_out:
        lines = "\n".join(json.dumps(t.to_dict(), sort_keys=True)
                          for t in result.trace)
        if args.trace_out:
            Path(args.trace_out).write_text(lines + "\n")
        else:
            print(lines)
    summary = {"captured": result.captured, "steps": result.steps}
    _emit(summary, args.json,
          f"captured={result.captured} steps={result.steps}")
    return 0


def cmd_verify(args) -> int:
    graph = _read_graph(args.graph)
    capture = CaptureSpec.parse(args.capture)
    table = solve(graph, args.m, capture)
    oracle = marking_fixpoint(graph, args.m, capture, budget=args.budget)
    report = assert_equal(table, oracle)
    if args.json:
        print(json.dumps(report.to_dict(), sort_keys=True))
    else:
        print(f"{len(report.differences)} differences over "
              f"{report.total} states")
    return 0 if report.matches else 1


def cmd_env_serve(args) -> int:
    capture = CaptureSpec.parse(args.capture)
    registry = load_registry(args.graphs, args.m, capture)
    options = EnvOptions(
        evader=args.evader, obs_range=args.obs_range, capture=capture,
        m=args.m, max_steps=args.max_steps, guidance=args.guidance,
        privileged=args.privileged, update_period=args.update_period,
        tiebreak=args.tiebreak)
    EnvServer(registry, options).serve(sys.stdin, sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peg",
        description="pursuit-evasion tables, policies, and episode tooling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="fill and store a distance table")
    p.add_argument("--graph", required=True)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--capture", default="adjacent")
    p.add_argument("--out", help="output .pegd path")
    p.add_argument("--budget", type=int, default=2**31)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gen", help="generate a graph JSON file")
    gsub = p.add_subparsers(dest="kind", required=True)
    pg = gsub.add_parser("grid")
    pg.add_argument("--rows", type=int, required=True)
    pg.add_argument("--cols", type=int, required=True)
    pg.add_argument("--out", default="-")
    pg.set_defaults(func=cmd_gen)
    pr = gsub.add_parser("geometric")
    pr.add_argument("--n", type=int, required=True)
    pr.add_argument("--radius", type=float, required=True)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out", default="-")
    pr.set_defaults(func=cmd_gen)

    p = sub.add_parser("eval", help="batch success-rate evaluation")
    _add_shared_eval_flags(p)
    p.add_argument("--pursuer", required=True)
    p.add_argument("--evader", required=True)
    p.add_argument("--episodes", type=int, default=500)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("play", help="run one episode, optionally tracing")
    _add_shared_eval_flags(p)
    p.add_argument("--pursuer", required=True)
    p.add_argument("--evader", required=True)
    p.add_argument("--episode-index", type=int, default=0)
    p.add_argument("--trace", action="store_true",
                   help="print one JSON object per timestep")
    p.add_argument("--trace-out", help="write the trace to a file")
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("verify", help="compare the solver against the oracle")
    p.add_argument("--graph", required=True)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--capture", default="adjacent")
    p.add_argument("--budget", type=int, default=2**20)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("env-serve", help="serve episodes over stdio JSON lines")
    p.add_argument("--graphs", required=True, help="directory of graph JSON files")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--capture", default="adjacent")
    p.add_argument("--evader", default="dp-async-evader")
    p.add_argument("--range", dest="obs_range", type=int, default=2)
    p.add_argument("--max-steps", type=int, default=128)
    p.add_argument("--guidance", action="store_true")
    p.add_argument("--privileged", action="store_true")
    p.add_argument("--update-period", type=int, default=1)
    p.add_argument("--tiebreak", choices=["lowest", "seeded"], default="lowest")
    p.set_defaults(func=cmd_env_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PegError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
