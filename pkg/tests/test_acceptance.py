"""Acceptance suite: one test per exit criterion, each printing a
PASS/FAIL line with the measured quantity (run with -s to see them).

Quantitative targets and tolerances are pinned here, not configurable:
seeds are fixed so every number below is reproducible bit-for-bit.
"""

import time

import numpy as np
import pytest

from peg.belief import ObservationModel
from peg.dp import INFINITY, CaptureSpec, JointState, solve, unpack_state
from peg.graph import (cycle_graph, generate_geometric, generate_grid,
                       make_mask, path_graph)
from peg.oracle import assert_equal, marking_fixpoint, recurrence_violations
from peg.policies import (TieBreak, pursuer_belief, pursuer_minimax,
                          pursuer_pos)
from peg.sim import Episode, EpisodeConfig, evaluate, run_episode

ADJ = CaptureSpec.adjacent()

_CACHE: dict = {}


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def grid10():
    return generate_grid(10, 10)


@pytest.fixture(scope="module")
def t_grid10(grid10):
    return solve(grid10, 2, ADJ)


@pytest.fixture(scope="module")
def geo200():
    g = generate_geometric(200, 0.12, seed=3)
    t0 = time.perf_counter()
    table = solve(g, 2, ADJ)
    _CACHE["geo200_solve_seconds"] = time.perf_counter() - t0
    return g, table


def small_graph_suite():
    """50 seeded geometric graphs (n <= 12) plus the named small graphs."""
    graphs = [("P2", path_graph(2)), ("P5", path_graph(5)),
              ("C4", cycle_graph(4)), ("grid4", generate_grid(4, 4))]
    for seed in range(50):
        n = 4 + seed % 9  # cycles 4..12
        graphs.append((f"geo{seed}", generate_geometric(n, 0.4, seed=seed)))
    return graphs


def test_criterion_1_oracle_equivalence():
    t0 = time.perf_counter()
    diffs = 0
    checked = 0
    tables = {}
    for name, g in small_graph_suite():
        for m in (1, 2):
            table = solve(g, m, ADJ)
            oracle = marking_fixpoint(g, m, ADJ)
            rep = assert_equal(table, oracle)
            diffs += len(rep.differences)
            checked += 1
            tables[(name, m)] = (g, table)
    _CACHE["small_tables"] = tables
    elapsed = time.perf_counter() - t0
    report(1, diffs == 0 and elapsed < 60.0,
           f"{checked} solver/oracle comparisons, {diffs} differing entries, "
           f"{elapsed:.1f}s (< 60s)")


def test_criterion_2_one_step_recurrence(geo200):
    grid5 = generate_grid(5, 5)
    v_grid = recurrence_violations(grid5, solve(grid5, 2, ADJ)).size
    g, table = geo200
    v_geo = recurrence_violations(g, table).size
    report(2, v_grid == 0 and v_geo == 0,
           f"recurrence violations: 5x5 grid m=2 -> {v_grid}, "
           f"geometric n=200 m=2 -> {v_geo}")


def test_criterion_3_exact_capture_at_table_value(grid10, t_grid10):
    rng = np.random.default_rng(2024)
    finite = np.flatnonzero((t_grid10.entries > 0)
                            & (t_grid10.entries != INFINITY))
    starts = rng.choice(finite, size=100, replace=False)
    base = dict(graph=grid10, m=2, capture=ADJ,
                obs=ObservationModel(range=2), table=t_grid10,
                max_steps=128, min_start_separation=0)
    exact = 0
    bounded = 0
    for i, idx in enumerate(starts):
        s = unpack_state(100, 2, int(idx))
        d = t_grid10.lookup(s)
        r_opt = run_episode(EpisodeConfig(pursuer="dp-minimax",
                                          evader="dp-async-evader",
                                          seed=500 + i, **base), start=s)
        exact += int(r_opt.captured and r_opt.steps == d)
        r_rand = run_episode(EpisodeConfig(pursuer="dp-minimax",
                                           evader="random",
                                           seed=900 + i, **base), start=s)
        bounded += int(r_rand.captured and r_rand.steps <= d)
    report(3, exact == 100 and bounded == 100,
           f"100 finite-D starts: optimal-evader capture at exactly D in "
           f"{exact}/100, random-evader within D in {bounded}/100")


def test_criterion_4_infinite_state_survival():
    tables = _CACHE.get("small_tables")
    if tables is None:  # criterion 1 did not run first
        tables = {}
        for name, g in small_graph_suite():
            for m in (1, 2):
                tables[(name, m)] = (g, solve(g, m, ADJ))
    survived = 0
    trials = 0

    def survive(g, table, s, pursuer, seed):
        cfg = EpisodeConfig(graph=g, m=table.m, capture=ADJ,
                            obs=ObservationModel(range=1), pursuer=pursuer,
                            evader="dp-async-evader", table=table,
                            max_steps=1000, seed=seed, min_start_separation=0)
        r = run_episode(cfg, start=s)
        return (not r.captured) and r.steps == 1000

    c4, t_c4 = tables[("C4", 1)]
    inf_idx = np.flatnonzero(t_c4.entries == INFINITY)
    for idx in inf_idx:
        s = unpack_state(4, 1, int(idx))
        trials += 1
        survived += int(survive(c4, t_c4, s, "dp-minimax", 0))
        for k in range(20):
            trials += 1
            survived += int(survive(c4, t_c4, s, "random", k))
    # every other infinite state found across the small-graph suite
    extra = 0
    for (name, m), (g, table) in sorted(tables.items()):
        if name == "C4" and m == 1:
            continue
        inf_idx = np.flatnonzero(table.entries == INFINITY)
        if not inf_idx.size or extra >= 8:
            continue
        rng = np.random.default_rng(extra)
        s = unpack_state(g.n, m, int(rng.choice(inf_idx)))
        trials += 2
        survived += int(survive(g, table, s, "dp-minimax", 1))
        survived += int(survive(g, table, s, "random", 2))
        extra += 1
    report(4, survived == trials,
           f"{survived}/{trials} infinite-D survival runs reached 1000 steps "
           f"uncaptured ({extra} extra graphs beyond C4)")


def test_criterion_5_table1_grid_row(grid10, t_grid10):
    t0 = time.perf_counter()
    rates = {}
    for pursuer in ("dp-belief", "dp-pos", "shortest-path"):
        cfg = EpisodeConfig(graph=grid10, m=2, capture=ADJ,
                            obs=ObservationModel(range=2), pursuer=pursuer,
                            evader="dp-async-evader", table=t_grid10,
                            max_steps=128, seed=1)
        rates[pursuer] = evaluate(cfg, 500).success_rate
    elapsed = time.perf_counter() - t0
    _CACHE["grid_row"] = rates
    ok = (0.68 <= rates["dp-belief"] <= 0.88
          and 0.49 <= rates["dp-pos"] <= 0.69
          and rates["shortest-path"] <= 0.05
          and elapsed < 600.0)
    report(5, ok,
           f"500-episode grid rates: belief={rates['dp-belief']:.3f} "
           f"(target 0.68..0.88), pos={rates['dp-pos']:.3f} (0.49..0.69), "
           f"shortest-path={rates['shortest-path']:.3f} (<=0.05); "
           f"{elapsed:.0f}s single-threaded (< 600s)")


def test_criterion_6_table3_range_trend(grid10, t_grid10):
    rates = []
    for r in (2, 3, 4, 5, 6):
        cfg = EpisodeConfig(graph=grid10, m=2, capture=ADJ,
                            obs=ObservationModel(range=r), pursuer="dp-belief",
                            evader="dp-async-evader", table=t_grid10,
                            max_steps=128, seed=1)
        rates.append(evaluate(cfg, 500).success_rate)
    nondecreasing = all(a <= b for a, b in zip(rates, rates[1:]))
    report(6, nondecreasing and rates[3] >= 0.99,
           "belief success over ranges 2..6 = "
           + ", ".join(f"{r:.3f}" for r in rates)
           + f" (nondecreasing, >= 0.99 at range 5: {rates[3]:.3f})")


def test_criterion_7_point_mass_reduction(grid10, t_grid10, geo200):
    geo, t_geo = geo200
    mismatches = 0
    total = 0
    for g, table, seed in ((grid10, t_grid10, 7), (geo, t_geo, 8)):
        rng = np.random.default_rng(seed)
        for _ in range(1000):
            pursuers = tuple(int(v) for v in rng.integers(g.n, size=table.m))
            e = int(rng.integers(g.n))
            want = pursuer_minimax(g, table, JointState(pursuers, e))
            pos = make_mask(g.n, [e])
            point = np.zeros(g.n)
            point[e] = 1.0
            got_pos = pursuer_pos(g, table, pursuers, pos)
            got_bel = pursuer_belief(g, table, pursuers, point)
            mismatches += int(got_pos != want) + int(got_bel != want)
            total += 2
    report(7, mismatches == 0,
           f"{total} singleton-Pos/point-belief reductions, "
           f"{mismatches} mismatches")


def test_criterion_8_tracker_soundness(grid10, t_grid10):
    steps = 0
    violations = 0
    episode_idx = 0
    evaders = ("dp-async-evader", "random", "stay", "dp-sync-evader")
    while steps < 10_000:
        evader = evaders[episode_idx % len(evaders)]
        cfg = EpisodeConfig(graph=grid10, m=2, capture=ADJ,
                            obs=ObservationModel(range=2), pursuer="dp-belief",
                            evader=evader, table=t_grid10, max_steps=128,
                            seed=3000 + episode_idx)
        result = run_episode(cfg, episode_idx)  # raises on TrackerCollapse
        for snap in result.trace:
            if not snap.observed:
                inside = snap.evader in snap.pos
                massed = dict(snap.belief).get(snap.evader, 0.0) > 0
                violations += int(not (inside and massed))
        steps += result.steps
        episode_idx += 1
    report(8, violations == 0,
           f"{steps} partially observable steps across {episode_idx} episodes "
           f"(mixed evaders), {violations} soundness violations, no collapse")


def test_criterion_9_update_period_trend(grid10, t_grid10):
    rates = []
    for k in (1, 2, 3):
        cfg = EpisodeConfig(graph=grid10, m=2, capture=ADJ,
                            obs=ObservationModel(range=2), pursuer="dp-belief",
                            evader="dp-async-evader", table=t_grid10,
                            max_steps=128, seed=1, update_period=k)
        rates.append(evaluate(cfg, 500).success_rate)
    ok = rates[0] >= rates[1] >= rates[2] - 0.05
    report(9, ok,
           f"belief success by update period 1/2/3 = "
           + ", ".join(f"{r:.3f}" for r in rates)
           + " (monotone with 0.05 slack)")


def test_criterion_10_performance(geo200):
    g, table = geo200
    solve_seconds = _CACHE["geo200_solve_seconds"]
    table_mb = table.nbytes / 2**20
    cfg = EpisodeConfig(graph=g, m=2, capture=ADJ,
                        obs=ObservationModel(range=2), pursuer="dp-belief",
                        evader="dp-async-evader", table=table,
                        max_steps=128, seed=5)
    # warm the distance cache, then time full steps (belief policy,
    # evader reply, tracker update)
    Episode(cfg, 0)
    steps = 0
    t0 = time.perf_counter()
    for i in range(30):
        ep = Episode(cfg, i)
        while not ep.done:
            ep.step()
            steps += 1
    per_step_ms = (time.perf_counter() - t0) / steps * 1000
    ok = solve_seconds < 60.0 and table_mb < 64.0 and per_step_ms < 5.0
    report(10, ok,
           f"n=200 m=2: solve {solve_seconds:.1f}s (< 60s), table "
           f"{table_mb:.1f} MB (< 64 MB), policy+tracker step "
           f"{per_step_ms:.2f} ms over {steps} steps (< 5 ms)")
