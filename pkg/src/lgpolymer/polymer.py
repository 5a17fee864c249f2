"""Partition-function kernels over a sampled environment.

Conventions
-----------
A lattice point is a plain ``(col, second)`` integer pair.  Two path
orientations exist over the same stored grid:

* descending ("line") queries: the second coordinate *decreases* along the
  walk, line 1 being the destination side.  This is the canonical convention
  for the curve/identity machinery.
* ascending ("row") queries: the second coordinate *increases*, as for the
  space-time landscape and the diagonal studies.

``log_Z_point`` infers the orientation from its endpoints (a strictly smaller
second coordinate at the target means a descending query); ``log_Z_up``
demands the ascending one.  A value of ``-inf`` means no admissible path or
multipath exists, which for single paths happens exactly when the target
column is left of the source column.

All sums over paths are done in log-space with pairwise log-sum-exp; raw
partition values are never materialized here (see :mod:`lgpolymer.exact` for
the exact-arithmetic twin used by identity verifiers).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .env import Environment, CapacityError
from .logspace import NEG_INF, lse, signed_lse

Point = tuple[int, int]

#: hard cap for the factorial determinant expansion
MAX_LGV_PATHS = 5

#: relative agreement between positive and negative determinant mass above
#: which the result is considered numerically destroyed
CANCELLATION_LIMIT = 1e-9


class ConditioningError(ArithmeticError):
    """Signed determinant lost its significant digits (or came out <= 0)."""


# ---------------------------------------------------------------------------
# numba kernels: oriented so the walk enters at [0, 0] and exits at [-1, -1]
# ---------------------------------------------------------------------------


@njit(cache=True)
def _lse2_nb(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    if b == -np.inf:
        return a
    return a + math.log1p(math.exp(b - a))


@njit(cache=True)
def dp_forward(a):
    """Free-energy table: T[c, r] = log sum over walks [0,0] -> [c,r]."""
    C, R = a.shape
    T = np.empty((C, R))
    T[0, 0] = a[0, 0]
    for r in range(1, R):
        T[0, r] = a[0, r] + T[0, r - 1]
    for c in range(1, C):
        T[c, 0] = a[c, 0] + T[c - 1, 0]
        for r in range(1, R):
            T[c, r] = a[c, r] + _lse2_nb(T[c - 1, r], T[c, r - 1])
    return T


@njit(cache=True)
def dp_forward_max(a):
    """Last-passage table: as :func:`dp_forward` with max instead of LSE."""
    C, R = a.shape
    T = np.empty((C, R))
    T[0, 0] = a[0, 0]
    for r in range(1, R):
        T[0, r] = a[0, r] + T[0, r - 1]
    for c in range(1, C):
        T[c, 0] = a[c, 0] + T[c - 1, 0]
        for r in range(1, R):
            left = T[c - 1, r]
            down = T[c, r - 1]
            T[c, r] = a[c, r] + (left if left >= down else down)
    return T


def dp_backward(a: np.ndarray) -> np.ndarray:
    """Table of log sums over walks [c, r] -> [-1, -1]."""
    rev = np.ascontiguousarray(a[::-1, ::-1])
    return dp_forward(rev)[::-1, ::-1]


# ---------------------------------------------------------------------------
# slicing and single-path values
# ---------------------------------------------------------------------------


def _oriented_box(env: Environment, u: Point, v: Point) -> np.ndarray | None:
    """Contiguous log-weight slice with u at [0,0] and v at [-1,-1].

    Returns None when the column ordering already rules out any path.
    """
    (a, ju), (b, jv) = u, v
    if b < a:
        return None
    if ju >= jv:  # descending (line) orientation
        box = env.box(a, b, jv, ju)[:, ::-1]
    else:  # ascending (row) orientation
        box = env.box(a, b, ju, jv)
    return np.ascontiguousarray(box)


def forward_table(env: Environment, u: Point, v: Point) -> np.ndarray:
    """Oriented DP table for the u -> v rectangle; [0, 0] is u, [-1, -1] is v.

    Entry [ci, ti] holds the log partition value from u to the cell ci
    columns right of u and ti steps along the walk direction of the second
    axis.  Raises when the column ordering makes the rectangle empty.
    """
    box = _oriented_box(env, u, v)
    if box is None:
        raise ValueError(f"no walk rectangle from {u} to {v}")
    return dp_forward(box)


def log_Z_point(env: Environment, u: Point, v: Point) -> float:
    """Log partition function over monotone walks from u to v.

    Orientation of the second axis is inferred from the endpoints; see the
    module docstring.  Both endpoint weights are included.
    """
    box = _oriented_box(env, u, v)
    if box is None:
        return NEG_INF
    return float(dp_forward(box)[-1, -1])


def log_Z_up(env: Environment, u: Point, v: Point) -> float:
    """Ascending-orientation partition value; v must lie weakly up-right of u."""
    if v[1] < u[1]:
        raise ValueError(f"ascending query needs row({v}) >= row({u})")
    if v[0] < u[0]:
        return NEG_INF
    return log_Z_point(env, u, v)


def last_passage(env: Environment, u: Point, v: Point) -> float:
    """Max-plus (zero-temperature) value over the same walk family."""
    box = _oriented_box(env, u, v)
    if box is None:
        return NEG_INF
    return float(dp_forward_max(box)[-1, -1])


def antidiagonal_targets(w: Point, a: int) -> tuple[Point, ...]:
    """Truncated anti-diagonal through w: {(w1 + i, w2 - i), |i| <= a}."""
    if a < 0:
        raise ValueError(f"need a >= 0, got {a}")
    w1, w2 = w
    return tuple((w1 + i, w2 - i) for i in range(-a, a + 1))


def log_Z_point_to_set(env: Environment, u: Point, targets: Sequence[Point]) -> float:
    """Log of the summed partition values from u to each target.

    All targets must sit on the same side of u's row (a mix of ascending and
    descending targets has no single walk family and raises).
    """
    targets = list(targets)
    if not targets:
        raise ValueError("empty target set")
    rows = [t[1] for t in targets]
    up = [r > u[1] for r in rows]
    down = [r < u[1] for r in rows]
    if any(up) and any(down):
        raise ValueError("targets straddle the source row; split the query")
    ascending = any(up)
    reachable = [t for t in targets if t[0] >= u[0]]
    if not reachable:
        return NEG_INF
    hi_col = max(t[0] for t in reachable)
    if ascending:
        far_row = max(rows)
        box = env.box(u[0], hi_col, u[1], far_row)
        table = dp_forward(np.ascontiguousarray(box))
        vals = [table[t[0] - u[0], t[1] - u[1]] for t in reachable]
    else:
        far_row = min(rows)
        box = env.box(u[0], hi_col, far_row, u[1])[:, ::-1]
        table = dp_forward(np.ascontiguousarray(box))
        vals = [table[t[0] - u[0], u[1] - t[1]] for t in reachable]
    return lse(vals)


def log_Z_max(env: Environment, sources: Sequence[Point], sinks: Sequence[Point]) -> float:
    """max over (u, v) pairs of the single-path values (−inf if none admissible)."""
    best = NEG_INF
    for u in sources:
        for v in sinks:
            val = log_Z_point(env, u, v)
            if val > best:
                best = val
    return best


# ---------------------------------------------------------------------------
# multipath endpoint data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EndpointPair:
    """Sources and sinks of a k-path family, stored sorted by column.

    The crossing-cancellation argument behind the determinant needs the
    sources on one common line and the sinks on another (columns distinct);
    that geometry is validated here.  Descending orientation is assumed
    (source line >= sink line).
    """

    sources: tuple[Point, ...]
    sinks: tuple[Point, ...]

    def __post_init__(self) -> None:
        if len(self.sources) != len(self.sinks) or not self.sources:
            raise ValueError("need equally many sources and sinks, at least one each")
        src = tuple(sorted(self.sources))
        snk = tuple(sorted(self.sinks))
        object.__setattr__(self, "sources", src)
        object.__setattr__(self, "sinks", snk)
        if len({c for c, _ in src}) != len(src) or len({c for c, _ in snk}) != len(snk):
            raise ValueError("columns within sources and within sinks must be distinct")
        if len({j for _, j in src}) != 1 or len({j for _, j in snk}) != 1:
            raise ValueError("sources must share a line; sinks must share a line")
        if src[0][1] < snk[0][1]:
            raise ValueError("descending orientation expected (source line >= sink line)")

    @property
    def k(self) -> int:
        return len(self.sources)


def _path_count(u: Point, v: Point) -> int:
    dc = v[0] - u[0]
    dl = u[1] - v[1]
    if dc < 0 or dl < 0:
        return 0
    return math.comb(dc + dl, dl)


def count_multipath(pair: EndpointPair) -> int:
    """Exact number of vertex-disjoint families (integer determinant)."""
    k = pair.k
    mat = [[_path_count(pair.sources[i], pair.sinks[j]) for j in range(k)] for i in range(k)]
    return _int_det(mat)


def _int_det(mat: list[list[int]]) -> int:
    """Exact integer determinant by fraction-free (Bareiss) elimination."""
    a = [row[:] for row in mat]
    n = len(a)
    sign = 1
    prev = 1
    for c in range(n - 1):
        if a[c][c] == 0:
            for r in range(c + 1, n):
                if a[r][c] != 0:
                    a[c], a[r] = a[r], a[c]
                    sign = -sign
                    break
            else:
                return 0
        for r in range(c + 1, n):
            for x in range(c + 1, n):
                a[r][x] = (a[r][x] * a[c][c] - a[r][c] * a[c][x]) // prev
            a[r][c] = 0
        prev = a[c][c]
    return sign * a[n - 1][n - 1]


def multipath_feasible(pair: EndpointPair) -> bool:
    return count_multipath(pair) > 0


_PERM_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _perms_and_signs(k: int) -> tuple[np.ndarray, np.ndarray]:
    if k not in _PERM_CACHE:
        perms = np.array(list(itertools.permutations(range(k))), dtype=np.int64)
        signs = np.empty(len(perms), dtype=np.int64)
        for idx, p in enumerate(perms):
            inv = 0
            for i in range(k):
                for j in range(i + 1, k):
                    if p[i] > p[j]:
                        inv += 1
            signs[idx] = 1 if inv % 2 == 0 else -1
        _PERM_CACHE[k] = (perms, signs)
    return _PERM_CACHE[k]


def single_path_matrix(env: Environment, pair: EndpointPair) -> np.ndarray:
    """M[i, j] = log Z(source_i -> sink_j), one DP table per source."""
    k = pair.k
    sink_line = pair.sinks[0][1]
    max_sink_col = pair.sinks[-1][0]
    M = np.full((k, k), NEG_INF)
    for i, (a, ju) in enumerate(pair.sources):
        if a > max_sink_col:
            continue
        box = env.box(a, max_sink_col, sink_line, ju)[:, ::-1]
        table = dp_forward(np.ascontiguousarray(box))
        for j, (b, jv) in enumerate(pair.sinks):
            if b >= a:
                M[i, j] = table[b - a, ju - jv]
    return M


def log_Z_multipath(
    env: Environment, pair: EndpointPair, with_cancellation: bool = False
) -> float | tuple[float, float]:
    """Log partition function over vertex-disjoint k-path families.

    Evaluated as the determinant of single-path values, expanded over the k!
    permutation terms with sign and log-magnitude tracked separately.  Raises
    :class:`ConditioningError` when the compensated result is non-positive or
    the positive/negative masses agree to within ``CANCELLATION_LIMIT``.
    With ``with_cancellation=True`` returns ``(value, cancellation)`` so
    callers can judge how many digits the signed sum destroyed (infeasible
    families report cancellation 0.0).
    """
    k = pair.k
    if k > MAX_LGV_PATHS:
        raise CapacityError(f"determinant expansion capped at k={MAX_LGV_PATHS}, got {k}")
    if not multipath_feasible(pair):
        return (NEG_INF, 0.0) if with_cancellation else NEG_INF
    M = single_path_matrix(env, pair)
    perms, signs = _perms_and_signs(k)
    log_mags = M[np.arange(k)[None, :], perms].sum(axis=1)
    sign, log_abs, cancellation = signed_lse(log_mags, signs)
    if sign <= 0:
        raise ConditioningError(
            f"multipath determinant non-positive after compensated evaluation "
            f"(cancellation={cancellation:.3e})"
        )
    if 1.0 - cancellation <= CANCELLATION_LIMIT:
        raise ConditioningError(
            f"multipath determinant cancelled beyond {CANCELLATION_LIMIT:.0e} "
            f"(cancellation={cancellation:.3e})"
        )
    if with_cancellation:
        return log_abs, cancellation
    return log_abs


# ---------------------------------------------------------------------------
# brute-force enumeration of disjoint families
# ---------------------------------------------------------------------------


def brute_force_multipath(
    env: Environment, pair: EndpointPair, max_nodes: int = 5_000_000
) -> float:
    """Exact enumeration of vertex-disjoint path tuples, summed in log-space.

    Paths are generated left to right (disjoint families from common-line
    sources to common-line sinks are automatically ordered), each path as its
    per-line column intervals, pruned against the previous path's intervals.
    """
    w = env.window
    src_line = pair.sources[0][1]
    snk_line = pair.sinks[0][1]
    # per-line prefix sums of log-weights for O(1) interval weights
    lo_col = w.col_min
    prefix: dict[int, np.ndarray] = {}
    for line in range(snk_line, src_line + 1):
        row = env.log_weights[:, line - w.row_min]
        pref = np.concatenate(([0.0], np.cumsum(row)))
        prefix[line] = pref

    def seg(line: int, c0: int, c1: int) -> float:
        p = prefix[line]
        return float(p[c1 - lo_col + 1] - p[c0 - lo_col])

    totals: list[float] = []
    budget = [max_nodes]
    n_paths = pair.k
    no_prev = {line: -(10**9) for line in range(snk_line, src_line + 1)}

    def place(i: int, prev_end: dict[int, int], acc: float) -> None:
        if i == n_paths:
            totals.append(acc)
            return
        a, L = pair.sources[i]
        b, l = pair.sinks[i]
        if b < a:
            return
        exits: dict[int, int] = {}

        def dfs(line: int, entry: int, run: float) -> None:
            budget[0] -= 1
            if budget[0] < 0:
                raise CapacityError(f"brute force exceeded {max_nodes} nodes")
            if entry <= prev_end[line]:
                return
            if line == l:
                if entry > b:
                    return
                new_end = dict(prev_end)
                for ln, e in exits.items():
                    new_end[ln] = e
                new_end[l] = b
                place(i + 1, new_end, acc + run + seg(l, entry, b))
                return
            for exit_col in range(entry, b + 1):
                exits[line] = exit_col
                dfs(line - 1, exit_col, run + seg(line, entry, exit_col))
            del exits[line]

        dfs(L, a, 0.0)

    place(0, no_prev, 0.0)
    if not totals:
        return NEG_INF
    return lse(totals)


# ---------------------------------------------------------------------------
# anti-diagonal argmax (ascending orientation, walks from the corner (1,1))
# ---------------------------------------------------------------------------


def argmax_on_antidiagonal(env: Environment, r: int, w: Point) -> Point:
    """Maximizer of logZ((1,1)->x) + logZ(x->w) over the anti-diagonal of (r,r).

    Both factors include the weight at x, matching the printed definition of
    the midpoint maximizer.  Ties break toward the smallest signed offset
    (the first maximum found scanning offsets in increasing order); under
    continuous weights ties have probability zero, the rule just pins the
    outcome for reproducibility.
    """
    w1, w2 = w
    if not (1 <= r and r + r < w1 + w2):
        raise ValueError(f"need 1 <= r and 2r < |w|_1, got r={r}, w={w}")
    box = np.ascontiguousarray(env.box(1, w1, 1, w2))
    F = dp_forward(box)
    B = dp_backward(box)
    lo = max(1 - r, r - w2)
    hi = min(r - 1, w1 - r)
    if lo > hi:
        raise ValueError(f"anti-diagonal of r={r} misses the box to {w}")
    best_val = NEG_INF
    best_pt = None
    for i in range(lo, hi + 1):
        c, q = r + i, r - i
        val = float(F[c - 1, q - 1] + B[c - 1, q - 1])
        if val > best_val:
            best_val = val
            best_pt = (c, q)
    assert best_pt is not None
    return best_pt
