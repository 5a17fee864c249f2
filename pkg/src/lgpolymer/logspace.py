"""Log-domain arithmetic helpers shared across the package.

Everything downstream works with log-magnitudes; the additive identity is
``-inf`` (empty sum).  The helpers here are deliberately branch-explicit so
that ``-inf`` propagates without ever producing a NaN.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

NEG_INF = float("-inf")


def lse2(a: float, b: float) -> float:
    """log(e^a + e^b) with max-shift; exact for -inf operands."""
    if a < b:
        a, b = b, a
    if b == NEG_INF:
        return a
    return a + math.log1p(math.exp(b - a))


def lse(values: Iterable[float]) -> float:
    """log sum exp of an iterable, -inf for an empty one.

    Computed with a single max-shift pass so the result is always >= max(values)
    in floating point (used by tests that rely on that ordering).
    """
    vals = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if vals.size == 0:
        return NEG_INF
    m = float(np.max(vals))
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(float(np.exp(vals - m).sum()))


def log1mexp(x: float) -> float:
    """log(1 - e^x) for x < 0, stable near both ends."""
    if x >= 0.0:
        raise ValueError(f"log1mexp needs a negative argument, got {x}")
    # standard split at log(1/2)
    if x > -math.log(2.0):
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def signed_lse(log_mags: Sequence[float], signs: Sequence[int]) -> tuple[int, float, float]:
    """Accumulate a signed sum given term log-magnitudes and signs in {+1,-1}.

    Returns ``(sign, log_abs, cancellation)`` where ``cancellation`` is the
    relative agreement ``exp(min(P,Q) - max(P,Q))`` between the positive mass
    ``e^P`` and negative mass ``e^Q`` (0.0 when one side is empty).  A value
    close to 1 means the result lost most of its significant digits.
    """
    pos = [lm for lm, s in zip(log_mags, signs) if s > 0]
    neg = [lm for lm, s in zip(log_mags, signs) if s < 0]
    lp = lse(pos)
    ln = lse(neg)
    if ln == NEG_INF and lp == NEG_INF:
        return 0, NEG_INF, 0.0
    if ln == NEG_INF:
        return 1, lp, 0.0
    if lp == NEG_INF:
        return -1, ln, 0.0
    hi, lo = (lp, ln) if lp >= ln else (ln, lp)
    cancellation = math.exp(lo - hi)
    if lp == ln:
        return 0, NEG_INF, cancellation
    sign = 1 if lp > ln else -1
    return sign, hi + log1mexp(lo - hi), cancellation
