"""Exact-arithmetic twin of the float partition kernels.

Signed determinants of deep minors cancel catastrophically in floating point
(tens of digits for the worst configurations used by the curve construction),
so everything feeding an identity check is computed here over ``Fraction``:

* each sampled log-weight ``lw`` is mapped to the exact binary rational of
  the rounded double ``exp(lw)`` — the float and exact engines then agree on
  *which* positive weights they sum over, and the exact one never loses a bit;
* partition sums are plain Fraction dynamic programming;
* determinants use exact Gaussian elimination, so a zero determinant is a
  certificate of infeasibility rather than a rounding artifact;
* logs are taken at the very end, big-integer safely, via
  ``log(numerator) - log(denominator)``.

Capacity note: values are ratios of integers with a few thousand bits for
the geometries used by the verifiers (dozens of lines and columns); this
engine is for identity-grade checks, not for the Monte Carlo studies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .env import CapacityError, Environment
from .logspace import NEG_INF

Point = tuple[int, int]

ZERO = Fraction(0)
ONE = Fraction(1)


def frac_weight(log_w: float) -> Fraction:
    """Exact rational value of the double ``exp(log_w)``."""
    if log_w > 709.0:
        raise CapacityError(f"weight exp({log_w}) overflows the float bridge")
    return Fraction(math.exp(log_w))


def exact_log(f: Fraction) -> float:
    """log of a nonnegative Fraction; big-int safe; -inf at zero."""
    if f < 0:
        raise ValueError("exact_log needs a nonnegative value")
    if f == 0:
        return NEG_INF
    return math.log(f.numerator) - math.log(f.denominator)


def exact_det(mat: list[list[Fraction]]) -> Fraction:
    """Exact determinant by Gaussian elimination over Fraction."""
    a = [row[:] for row in mat]
    n = len(a)
    sign = 1
    out = ONE
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return ZERO
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            sign = -sign
        p = a[c][c]
        out *= p
        for r in range(c + 1, n):
            if a[r][c] != 0:
                f = a[r][c] / p
                row_c = a[c]
                row_r = a[r]
                for x in range(c + 1, n):
                    row_r[x] -= f * row_c[x]
                row_r[c] = ZERO
    return out if sign > 0 else -out


@dataclass
class ExactTable:
    """Exact descending-orientation partition table from one source.

    ``value(col, line)`` is the exact partition function for walks from
    ``source`` down to ``(col, line)`` (column steps +1, line steps -1),
    both endpoint weights included; zero when no path exists.
    """

    source: Point
    col_max: int
    line_min: int
    _data: list[list[Fraction]]

    def value(self, col: int, line: int) -> Fraction:
        a, top = self.source
        if col < a:
            return ZERO
        if not (a <= col <= self.col_max and self.line_min <= line <= top):
            raise ValueError(
                f"({col},{line}) outside table from {self.source} "
                f"to cols<={self.col_max}, lines>={self.line_min}"
            )
        return self._data[col - a][top - line]


def exact_table(env: Environment, source: Point, col_max: int, line_min: int = 1) -> ExactTable:
    """Build the exact table for one source over cols<=col_max, lines>=line_min."""
    a, top = source
    if col_max < a or line_min > top:
        raise ValueError(f"empty table geometry for source {source}")
    n_c = col_max - a + 1
    n_t = top - line_min + 1
    logs = np.asarray(env.box(a, col_max, line_min, top))[:, ::-1]  # [ci][top-line]
    w = [[frac_weight(float(logs[ci, ti])) for ti in range(n_t)] for ci in range(n_c)]
    T: list[list[Fraction]] = [[ZERO] * n_t for _ in range(n_c)]
    for ci in range(n_c):
        row_w = w[ci]
        row_T = T[ci]
        for ti in range(n_t):
            if ci == 0 and ti == 0:
                inc = ONE
            elif ci == 0:
                inc = row_T[ti - 1]
            elif ti == 0:
                inc = T[ci - 1][0]
            else:
                inc = T[ci - 1][ti] + row_T[ti - 1]
            row_T[ti] = row_w[ti] * inc
    return ExactTable(source=source, col_max=col_max, line_min=line_min, _data=T)


def exact_multipath(
    env: Environment,
    sources: list[Point],
    sinks: list[Point],
    tables: dict[Point, ExactTable] | None = None,
) -> Fraction:
    """Exact partition function over vertex-disjoint path families.

    Valid for the determinant geometry: sinks on one common line with
    distinct columns, sources with distinct columns that are weakly
    monotone in (col, line) (a common line, or a staircase rising with the
    column).  A zero result certifies that no disjoint family exists.
    """
    k = len(sources)
    if k != len(sinks) or k == 0:
        raise ValueError("need equally many sources and sinks")
    sources = sorted(sources)
    sinks = sorted(sinks)
    if len({c for c, _ in sinks}) != k or len({j for _, j in sinks}) != 1:
        raise ValueError("sinks must sit on one line with distinct columns")
    cols = [c for c, _ in sources]
    lines = [j for _, j in sources]
    if len(set(cols)) != k:
        raise ValueError("source columns must be distinct")
    if any(l2 < l1 for l1, l2 in zip(lines, lines[1:])):
        raise ValueError("source lines must be weakly increasing with the column")
    col_max = sinks[-1][0]
    mat: list[list[Fraction]] = []
    for u in sources:
        if tables is not None and u in tables:
            t = tables[u]
        else:
            t = exact_table(env, u, col_max, line_min=sinks[0][1])
            if tables is not None:
                tables[u] = t
        mat.append([t.value(c, j) if c >= u[0] else ZERO for c, j in sinks])
    return exact_det(mat)
