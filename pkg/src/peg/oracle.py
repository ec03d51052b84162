"""Independent brute-force references for validating solved tables.

`marking_fixpoint` recomputes the capture-distance table by repeatedly
applying the one-step minimax recurrence to the whole table (Jacobi
sweeps from a snapshot, no in-sweep reuse) until nothing changes.  It
shares no traversal logic with the frontier solver, so agreement between
the two is strong evidence for both.  `horizon_minimax` is a plain
exhaustive game-tree search for spot checks on tiny instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .dp import INFINITY, CaptureSpec, DistanceTable, JointState, terminal, terminal_mask
from .errors import BudgetError, DimensionError
from .graph import Graph


@dataclass
class OracleTable:
    """Same shape as DistanceTable, float entries with np.inf, plus the
    number of sweeps the fixed-point iteration needed."""

    n: int
    m: int
    capture: CaptureSpec
    entries: np.ndarray
    sweeps: int

    def lookup(self, s: JointState) -> float:
        cfg = 0
        for i, p in enumerate(s.pursuers):
            cfg += p * self.n**i
        return float(self.entries[cfg * self.n + s.evader])


def _closed_reduce_rows(op: np.ufunc, g: Graph, mat: np.ndarray,
                        chunk_cols: int = 4096) -> np.ndarray:
    """out[v, :] = op over u in closed(v) of mat[u, :], chunked over columns."""
    starts = g.cn_indptr[:-1]
    idx = g.cn_indices
    cols = mat.shape[1]
    out = np.empty((g.n, cols), dtype=mat.dtype)
    for lo in range(0, cols, chunk_cols):
        hi = min(cols, lo + chunk_cols)
        out[:, lo:hi] = op.reduceat(mat[idx, lo:hi], starts, axis=0)
    return out


def _evader_closed_max(g: Graph, table2d: np.ndarray,
                       chunk_rows: int = 8192) -> np.ndarray:
    """maxE[c, x] = max over e' in closed(x) of table2d[c, e']."""
    starts = g.cn_indptr[:-1]
    idx = g.cn_indices
    rows = table2d.shape[0]
    out = np.empty_like(table2d)
    for lo in range(0, rows, chunk_rows):
        hi = min(rows, lo + chunk_rows)
        out[lo:hi] = np.maximum.reduceat(table2d[lo:hi][:, idx], starts, axis=1)
    return out


def _pursuer_closed_min(g: Graph, m: int, mat: np.ndarray) -> np.ndarray:
    """minP[c, x] = min over configs c' componentwise adjacent to c of mat[c', x].

    mat is (n**m, n); config axis layout puts pursuer 0 in the least
    significant digit, so axis k of the reshaped tensor is pursuer m-1-k.
    """
    n = g.n
    shaped = mat.reshape((n,) * m + (n,))
    for ax in range(m):
        moved = np.moveaxis(shaped, ax, 0)
        flat = np.ascontiguousarray(moved).reshape(n, -1)
        reduced = _closed_reduce_rows(np.minimum, g, flat)
        shaped = np.moveaxis(reduced.reshape(moved.shape), 0, ax)
    return np.ascontiguousarray(shaped).reshape(mat.shape)


def bellman_backup(g: Graph, m: int, table2d: np.ndarray) -> np.ndarray:
    """One application of 1 + min_pursuer max_evader over closed moves."""
    return _pursuer_closed_min(g, m, _evader_closed_max(g, table2d)) + 1.0


def marking_fixpoint(g: Graph, m: int, cap: CaptureSpec,
                     budget: int = 2**20) -> OracleTable:
    """Sweep the recurrence over every state until a fixed point.

    Entries start at 0 on terminal states and infinity elsewhere and can
    only decrease, so termination is guaranteed; the sweep count is at
    most the largest finite distance plus one.
    """
    if m < 1:
        raise DimensionError("need at least one pursuer")
    total = g.n**(m + 1)
    if total > budget:
        raise BudgetError(f"n^(m+1) = {total} exceeds oracle budget {budget}")
    term = terminal_mask(g, m, cap)
    values = np.where(term, 0.0, np.inf)
    sweeps = 0
    while True:
        candidate = bellman_backup(g, m, values)
        updated = np.where(term, 0.0, np.minimum(values, candidate))
        sweeps += 1
        if np.array_equal(updated, values):
            break
        values = updated
    return OracleTable(n=g.n, m=m, capture=cap, entries=values.reshape(-1),
                       sweeps=sweeps)


def recurrence_violations(g: Graph, t: DistanceTable) -> np.ndarray:
    """Flat indices of nonterminal states violating the one-step recurrence.

    Checks D = 1 + min_pursuer max_evader D over closed moves for every
    state with D > 0; infinity on both sides counts as agreement.
    """
    values = t.entries2d.astype(np.float64)
    values[t.entries2d == INFINITY] = np.inf
    rhs = bellman_backup(g, t.m, values)
    bad = (values > 0) & ~((values == rhs) | (np.isinf(values) & np.isinf(rhs)))
    return np.flatnonzero(bad.reshape(-1))


@dataclass
class VerifyReport:
    """Entry-for-entry comparison of a solved table against the oracle."""

    total: int
    differences: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def matches(self) -> bool:
        return not self.differences

    def to_dict(self) -> dict:
        return {
            "total_states": self.total,
            "difference_count": len(self.differences),
            "differences": [
                {"index": i, "table": None if v == INFINITY else v,
                 "oracle": None if np.isinf(o) else int(o)}
                for i, v, o in self.differences
            ],
        }


def assert_equal(t: DistanceTable, o: OracleTable) -> VerifyReport:
    """List every state where the solved table and the oracle disagree."""
    if (t.n, t.m) != (o.n, o.m) or t.capture != o.capture:
        raise DimensionError(
            f"table ({t.n},{t.m},{t.capture}) vs oracle ({o.n},{o.m},{o.capture})")
    t_inf = t.entries == INFINITY
    o_inf = np.isinf(o.entries)
    o_int = np.where(o_inf, 0, o.entries).astype(np.int64)
    mismatch = (t_inf != o_inf) | (~t_inf & ~o_inf & (t.entries != o_int))
    idx = np.flatnonzero(mismatch)
    report = VerifyReport(total=t.entries.size)
    for i in idx:
        report.differences.append(
            (int(i), int(t.entries[i]), float(o.entries[i])))
    return report


def horizon_minimax(g: Graph, cap: CaptureSpec, s: JointState,
                    horizon: int) -> int:
    """Exhaustive asynchronous game-tree value, pursuers then evader per ply.

    Returns the exact worst-case capture step when it is <= horizon, and
    horizon + 1 when every pursuit line needs longer than the horizon.
    """
    closed = g.closed
    widest = max(len(c) for c in closed)
    branching = widest**len(s.pursuers) * widest
    if horizon * np.log(max(branching, 2)) > np.log(5e7):
        raise BudgetError(
            f"~{branching}^{horizon} game-tree nodes exceed the search budget")
    dist = g.distance_matrix()
    radius = cap.radius
    over = horizon + 1

    def value(pursuers: tuple[int, ...], e: int, h: int) -> int:
        if any(dist[p, e] <= radius for p in pursuers):
            return 0
        if h == 0:
            return over
        best = over
        for q in product(*(closed[p] for p in pursuers)):
            worst = 0
            for n_e in closed[e]:
                worst = max(worst, value(q, n_e, h - 1))
                if worst >= best:  # cannot improve the running min
                    break
            best = min(best, min(worst + 1, over))
            if best == 1:
                break
        return best

    if terminal(g, cap, s):
        return 0
    return value(s.pursuers, s.evader, horizon)
