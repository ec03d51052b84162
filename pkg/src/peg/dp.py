"""Worst-case capture-distance tables over joint pursuer/evader states.

The solver fills a dense table D indexed by (pursuer positions, evader
position) with the number of steps optimal pursuers need to capture an
optimal evader, or INFINITY when capture is impossible.  Terminal states
are seeded with 0 and values grow outward one step per level, so the
fill order is a plain FIFO frontier; every entry is written at most once.

Two interchangeable engines live here: `solve` (level-synchronous, numpy,
scales to millions of states) and `solve_queue` (a direct one-state-at-a-
time transcription kept for small instances and cross-checks).  Both obey
the same guard: an evader node n_e only propagates from a settled state
once every node in its closed neighborhood is settled at or below the
current level, because an unresolved escape (including staying put) must
block the marking.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import BinaryIO, NamedTuple

import numpy as np

from .errors import BudgetError, DimensionError, FormatError, HashMismatch
from .graph import Graph

INFINITY = 0xFFFF
_MAGIC = b"PEGD"
_VERSION = 1
_HEADER = struct.Struct("<4sHIHBBQ")

_MODE_CODES = {"colocated": 0, "adjacent": 1, "radius": 2}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}


@dataclass(frozen=True)
class CaptureSpec:
    """When the game ends: some pursuer within `radius` hops of the evader."""

    mode: str = "adjacent"
    radius: int = 1

    def __post_init__(self):
        if self.mode not in _MODE_CODES:
            raise ValueError(f"unknown capture mode {self.mode!r}")
        if self.radius < 0:
            raise ValueError("capture radius must be >= 0")
        if self.mode == "colocated" and self.radius != 0:
            raise ValueError("colocated capture has radius 0")
        if self.mode == "adjacent" and self.radius != 1:
            raise ValueError("adjacent capture has radius 1")

    @classmethod
    def colocated(cls) -> "CaptureSpec":
        return cls("colocated", 0)

    @classmethod
    def adjacent(cls) -> "CaptureSpec":
        return cls("adjacent", 1)

    @classmethod
    def within(cls, k: int) -> "CaptureSpec":
        return cls("radius", k)

    @classmethod
    def parse(cls, text: str) -> "CaptureSpec":
        if text == "colocated":
            return cls.colocated()
        if text == "adjacent":
            return cls.adjacent()
        if text.startswith("radius:"):
            return cls.within(int(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse capture spec {text!r}")

    def __str__(self) -> str:
        if self.mode == "radius":
            return f"radius:{self.radius}"
        return self.mode


class JointState(NamedTuple):
    pursuers: tuple[int, ...]
    evader: int


def config_index(n: int, pursuers: tuple[int, ...]) -> int:
    """Mixed-radix pursuer-config index: sum of pursuers[i] * n**i."""
    idx = 0
    for i, p in enumerate(pursuers):
        idx += p * n**i
    return idx


def state_index(n: int, s: JointState) -> int:
    return config_index(n, s.pursuers) * n + s.evader


def unpack_config(n: int, m: int, cfg: int) -> tuple[int, ...]:
    out = []
    for _ in range(m):
        out.append(cfg % n)
        cfg //= n
    return tuple(out)


def unpack_state(n: int, m: int, idx: int) -> JointState:
    return JointState(unpack_config(n, m, idx // n), idx % n)


def terminal(g: Graph, cap: CaptureSpec, s: JointState) -> bool:
    """True iff some pursuer is within cap.radius hops of the evader."""
    dist = g.distance_matrix()
    e = s.evader
    return any(dist[p, e] <= cap.radius for p in s.pursuers)


def terminal_mask(g: Graph, m: int, cap: CaptureSpec) -> np.ndarray:
    """(n**m, n) boolean: configs x evader nodes that end the game."""
    n = g.n
    near = g.distance_matrix() <= cap.radius  # near[v, e]
    comp = np.arange(n**m, dtype=np.int64)
    term = near[comp % n]
    comp //= n
    for _ in range(1, m):
        term |= near[comp % n]
        comp //= n
    return term


@dataclass
class DistanceTable:
    """Dense worst-case capture-step table.

    entries is a flat uint16 vector of length n**(m+1) in state-index
    order; INFINITY (0xFFFF) marks states the pursuers can never win.
    """

    n: int
    m: int
    capture: CaptureSpec
    graph_hash: int
    entries: np.ndarray

    @property
    def entries2d(self) -> np.ndarray:
        return self.entries.reshape(self.n**self.m, self.n)

    @property
    def nbytes(self) -> int:
        return self.entries.nbytes

    def check_state(self, s: JointState) -> None:
        if len(s.pursuers) != self.m:
            raise DimensionError(
                f"state has {len(s.pursuers)} pursuers, table expects {self.m}")
        if not all(0 <= p < self.n for p in s.pursuers) or not 0 <= s.evader < self.n:
            raise DimensionError(f"state {s} out of range for n={self.n}")

    def lookup(self, s: JointState) -> int:
        """O(1) read; returns a step count, INFINITY when unreachable."""
        self.check_state(s)
        return int(self.entries[state_index(self.n, s)])

    def max_finite(self) -> int:
        finite = self.entries[self.entries != INFINITY]
        return int(finite.max()) if finite.size else 0

    def infinite_count(self) -> int:
        return int((self.entries == INFINITY).sum())

    # -- persistence ------------------------------------------------------

    def save(self, sink: str | BinaryIO) -> None:
        header = _HEADER.pack(_MAGIC, _VERSION, self.n, self.m,
                              _MODE_CODES[self.capture.mode],
                              self.capture.radius, self.graph_hash)
        payload = self.entries.astype("<u2", copy=False).tobytes()
        if isinstance(sink, str):
            with open(sink, "wb") as fh:
                fh.write(header)
                fh.write(payload)
        else:
            sink.write(header)
            sink.write(payload)

    @classmethod
    def load(cls, source: str | bytes | BinaryIO, g: Graph) -> "DistanceTable":
        if isinstance(source, str):
            with open(source, "rb") as fh:
                data = fh.read()
        elif isinstance(source, bytes):
            data = source
        else:
            data = source.read()
        if len(data) < _HEADER.size:
            raise FormatError("truncated header")
        magic, version, n, m, mode_code, radius, graph_hash = _HEADER.unpack(
            data[:_HEADER.size])
        if magic != _MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != _VERSION:
            raise FormatError(f"unsupported version {version}")
        if mode_code not in _MODE_NAMES:
            raise FormatError(f"unknown capture mode byte {mode_code}")
        expected = _HEADER.size + 2 * n**(m + 1)
        if len(data) != expected:
            raise FormatError(f"file is {len(data)} bytes, expected {expected}")
        if graph_hash != g.id:
            raise HashMismatch(
                f"table was built for graph {graph_hash:#018x}, got {g.id:#018x}")
        if n != g.n:
            raise HashMismatch(f"table n={n} does not match graph n={g.n}")
        entries = np.frombuffer(data[_HEADER.size:], dtype="<u2").astype(np.uint16)
        cap = CaptureSpec(_MODE_NAMES[mode_code], radius)
        return cls(n=n, m=m, capture=cap, graph_hash=graph_hash, entries=entries)


def _take_rows(indptr: np.ndarray, indices: np.ndarray,
               rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated CSR rows plus per-row counts."""
    counts = indptr[rows + 1] - indptr[rows]
    total = int(counts.sum())
    if total == 0:
        return indices[:0], counts
    cum = np.cumsum(counts)
    pos = (np.arange(total, dtype=np.int64)
           - np.repeat(cum - counts, counts)
           + np.repeat(indptr[rows], counts))
    return indices[pos], counts


def solve(g: Graph, m: int, cap: CaptureSpec,
          budget: int = 2**31) -> DistanceTable:
    """Fill the full distance table for m pursuers on g.

    Level-synchronous frontier: all states of value d are expanded as one
    batch, which preserves the FIFO pop order (popped values never
    decrease) while letting numpy do the per-level work.  Values are
    write-once, so the result does not depend on any within-level order.
    """
    if m < 1:
        raise DimensionError("need at least one pursuer")
    n = g.n
    total = n**(m + 1)
    if total > budget:
        raise BudgetError(f"n^(m+1) = {total} exceeds budget {budget}")
    idx_t = np.int32 if total < 2**31 else np.int64
    indptr = g.cn_indptr.astype(idx_t)
    indices = g.cn_indices.astype(idx_t)

    term = terminal_mask(g, m, cap)
    entries = np.full(total, INFINITY, dtype=np.uint16)
    flat2d = entries.reshape(n**m, n)
    flat2d[term] = 0
    assigned = int(term.sum())

    # U[c, x]: how many nodes in the closed neighborhood of x still hold
    # an unassigned value under pursuer config c.  A (c, x) pair becomes
    # "ready" when U hits 0: every evader escape from x is settled, so x
    # propagates one level outward over the pursuer configs.
    from scipy.sparse import csr_matrix

    acl = csr_matrix(
        (np.ones(len(g.cn_indices), dtype=np.int16),
         g.cn_indices.astype(np.int64), g.cn_indptr),
        shape=(n, n))
    not_term = (~term).astype(np.int16)
    u = np.ascontiguousarray((acl @ not_term.T).T)  # counts over N[x]
    del term, not_term
    u_flat = u.reshape(-1)

    acl_f32 = csr_matrix(
        (np.ones(len(g.cn_indices), dtype=np.float32),
         g.cn_indices.astype(np.int64), g.cn_indptr),
        shape=(n, n))
    mean_closed = float(g.cn_sizes.mean())
    scratch = np.zeros(total, dtype=np.float32) if total >= 1 << 20 else None

    def expand_coo(pairs: np.ndarray) -> np.ndarray:
        """Targets of a small frontier: componentwise config dilation."""
        cfg = pairs // n
        xs = pairs % n
        part = np.zeros_like(cfg)
        rem = cfg
        mult = 1
        for _ in range(m):
            comp = rem % n
            rem = rem // n
            nbrs, counts = _take_rows(indptr, indices, comp)
            part = np.repeat(part, counts) + nbrs * idx_t(mult)
            rem = np.repeat(rem, counts)
            xs = np.repeat(xs, counts)
            mult *= n
        tgt = part * idx_t(n) + xs
        tgt = tgt[entries[tgt] == INFINITY]
        return np.unique(tgt) if tgt.size else tgt

    def expand_dense(pairs: np.ndarray) -> np.ndarray:
        """Targets of a big frontier: per-axis sparse-matmul dilation."""
        scratch.fill(0.0)
        scratch[pairs] = 1.0
        cur = scratch.reshape((n,) * m + (n,))
        for ax in range(m):
            moved = np.moveaxis(cur, ax, 0)
            flat = np.ascontiguousarray(moved).reshape(n, -1)
            cur = np.moveaxis((acl_f32 @ flat).reshape(moved.shape), 0, ax)
        hit = (cur.reshape(-1) > 0) & (entries == INFINITY)
        return np.flatnonzero(hit).astype(idx_t)

    ready = np.flatnonzero(u_flat == 0).astype(idx_t)
    d = 0
    chunk = 1 << 16
    while ready.size:
        if d + 1 >= INFINITY:
            raise OverflowError("finite distance reached the sentinel value")
        u_flat[ready] = -1  # processed marker
        heavy = (scratch is not None
                 and ready.size * mean_closed**m > total / 2)
        nxt: list[np.ndarray] = []
        batches = ([ready] if heavy else
                   [ready[lo:lo + chunk] for lo in range(0, ready.size, chunk)])
        for pairs in batches:
            new = expand_dense(pairs) if heavy else expand_coo(pairs)
            if not new.size:
                continue
            entries[new] = d + 1
            assigned += new.size
            # every pair (c, x) with a freshly settled member of N[x]
            # loses one unresolved escape
            nbr_x, counts = _take_rows(indptr, indices, new % n)
            touched = np.repeat(new // n, counts) * idx_t(n) + nbr_x
            uniq, cnt = np.unique(touched, return_counts=True)
            u_flat[uniq] -= cnt.astype(np.int16)
            nxt.append(uniq[u_flat[uniq] == 0])
        ready = np.concatenate(nxt) if nxt else ready[:0]
        d += 1
    assert assigned <= total
    return DistanceTable(n=n, m=m, capture=cap, graph_hash=g.id, entries=entries)


def solve_queue(g: Graph, m: int, cap: CaptureSpec,
                budget: int = 2**22) -> DistanceTable:
    """One-state-at-a-time FIFO transcription of the fill; small inputs only.

    Kept as the readable form of the algorithm and as a cross-check for
    the batched engine.  Asserts that popped values never decrease.
    """
    if m < 1:
        raise DimensionError("need at least one pursuer")
    n = g.n
    total = n**(m + 1)
    if total > budget:
        raise BudgetError(f"n^(m+1) = {total} exceeds budget {budget}")

    closed = g.closed
    cfg_closed: dict[tuple[int, ...], list[int]] = {}

    def config_neighbors(pursuers: tuple[int, ...]) -> list[int]:
        got = cfg_closed.get(pursuers)
        if got is None:
            got = [config_index(n, q) for q in product(*(closed[p] for p in pursuers))]
            cfg_closed[pursuers] = got
        return got

    values = np.full(total, -1, dtype=np.int64)
    queue: deque[tuple[int, tuple[int, ...], int]] = deque()
    for cfg in range(n**m):
        pursuers = unpack_config(n, m, cfg)
        base = cfg * n
        for e in range(n):
            if terminal(g, cap, JointState(pursuers, e)):
                values[base + e] = 0
                queue.append((cfg, pursuers, e))
    last = 0
    while queue:
        cfg, pursuers, e = queue.popleft()
        d = int(values[cfg * n + e])
        assert d >= last, "popped values must be nondecreasing"
        last = d
        if d + 1 >= INFINITY:
            raise OverflowError("finite distance reached the sentinel value")
        base = cfg * n
        for n_e in closed[e]:
            # every escape from n_e (staying included) must be settled at
            # or below d, otherwise n_e still has an unresolved way out
            if any(values[base + e2] < 0 or values[base + e2] > d
                   for e2 in closed[n_e]):
                continue
            for n_cfg in config_neighbors(pursuers):
                idx = n_cfg * n + n_e
                if values[idx] < 0:
                    values[idx] = d + 1
                    queue.append((n_cfg, unpack_config(n, m, n_cfg), n_e))
    entries = np.where(values < 0, INFINITY, values).astype(np.uint16)
    return DistanceTable(n=n, m=m, capture=cap, graph_hash=g.id, entries=entries)
