"""Scaled two- and four-parameter free energies and their decompositions.

Two conventions coexist over one stored field:

* the *sheet* h(x, y) reads the second grid index as the line number and
  runs from (xbar, 2N) down to (yhat, 1) — the canonical descending
  convention shared with the curve machinery;
* the *landscape* h(x, s; y, t) reads it as the row number and runs upward,
  start (xbar + scheck + 1, scheck + 1), end (ybar + tcheck, tcheck).

Index maps (floor guarded against ulp-level misrounding):

    xbar  = floor(N^{2/3} x / q^2) + 1          near-edge spatial index
    yhat  = floor(N^{2/3} y / q^2) + 2N         far-edge spatial index
    tcheck = floor(2N t)                        temporal index

All public values are the unscaled kernels times 2^{-1/2} q sigma_p N^{-1/3}.
The decomposition of the sheet at level k splits every tuple at the column
where it crosses from level k+1 to level k, giving component functions

    Fbar_k(xbar, z) = ens[(xbar, xbar /\\ 2N) -> (z, k+1)] - Wf_{k+1}(z)
                      + p (xbar - N^{2/3} k)
    Gbar_k(z, yhat) = ens[(z, k) -> (yhat, 1)] + Wf_{k+1}(z)
                      - p (yhat - N^{2/3} k + 2N)

and a probability measure mu(z) = exp(-hbar + Fbar + Gbar) on [xbar, yhat].
The components are evaluated in exact rational arithmetic: Fbar via the
saturation decomposition (an augmented minor over k+1 bottom-line sources
divided by the full k+1 minor), Gbar via one backward pass over the curve
increment grid.  The drift terms cancel algebraically inside mu, so the
measure sums to one exactly, up to the final float logs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import exact, grsk, polymer
from .env import Environment
from .logspace import lse
from .reports import FAIL, PASS, IdentityReport, compare
from .scaling import (
    ThetaConstants,
    fluctuation_scale,
    spatial_index,
    spatial_index_far,
    temporal_index,
)

ONE = Fraction(1)
ZERO = Fraction(0)


@dataclass(frozen=True)
class SheetQuery:
    N: int
    x: float
    y: float

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("N must be a positive integer")


@dataclass(frozen=True)
class LandscapeQuery:
    N: int
    x: float
    s: float
    y: float
    t: float

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        if not self.s < self.t:
            raise ValueError(f"need s < t, got s={self.s}, t={self.t}")


def _require_box(env: Environment, c0: int, c1: int, r0: int, r1: int) -> None:
    if not env.window.contains_box(c0, c1, r0, r1):
        raise ValueError(
            f"window {env.window} too small: need cols {c0}..{c1}, "
            f"second index {r0}..{r1}"
        )


def sheet_indices(consts: ThetaConstants, q: SheetQuery) -> tuple[int, int]:
    return spatial_index(q.N, q.x, consts), spatial_index_far(q.N, q.y, consts)


def sheet_value_raw(env: Environment, consts: ThetaConstants, q: SheetQuery) -> float:
    """Unscaled sheet kernel: log Z[(xbar,2N)->(yhat,1)] - p(yhat - xbar + 2N)."""
    xbar, yhat = sheet_indices(consts, q)
    if xbar > yhat:
        raise ValueError(f"infeasible sheet endpoints: xbar={xbar} > yhat={yhat}")
    _require_box(env, xbar, yhat, 1, 2 * q.N)
    logz = polymer.log_Z_point(env, (xbar, 2 * q.N), (yhat, 1))
    return logz - consts.p * (yhat - xbar + 2 * q.N)


def sheet_value(env: Environment, consts: ThetaConstants, q: SheetQuery) -> float:
    """Scaled sheet value h^N(x, y)."""
    return fluctuation_scale(q.N, consts) * sheet_value_raw(env, consts, q)


def landscape_indices(
    consts: ThetaConstants, q: LandscapeQuery
) -> tuple[int, int, int, int]:
    """(xbar, scheck, ybar, tcheck); both spatial maps use the near-edge form."""
    return (
        spatial_index(q.N, q.x, consts),
        temporal_index(q.N, q.s),
        spatial_index(q.N, q.y, consts),
        temporal_index(q.N, q.t),
    )


def landscape_value_raw(env: Environment, consts: ThetaConstants, q: LandscapeQuery) -> float:
    """Unscaled four-parameter kernel, ascending rows.

    log Z[(xbar+scheck+1, scheck+1) -> (ybar+tcheck, tcheck)]
        - p (ybar - xbar + 4N(t-s)),
    the drift using the real times as printed.
    """
    xbar, sch, ybar, tch = landscape_indices(consts, q)
    start = (xbar + sch + 1, sch + 1)
    end = (ybar + tch, tch)
    if tch - sch < 1:
        raise ValueError(f"duration too short on the lattice: scheck={sch}, tcheck={tch}")
    if start[0] > end[0]:
        raise ValueError(f"infeasible landscape endpoints: {start} -> {end}")
    _require_box(env, start[0], end[0], start[1], end[1])
    logz = polymer.log_Z_up(env, start, end)
    return logz - consts.p * (ybar - xbar + 4 * q.N * (q.t - q.s))


def landscape_value(env: Environment, consts: ThetaConstants, q: LandscapeQuery) -> float:
    """Scaled landscape value h^N(x, s; y, t)."""
    return fluctuation_scale(q.N, consts) * landscape_value_raw(env, consts, q)


def verify_composition(
    env: Environment, consts: ThetaConstants, q: LandscapeQuery, r: float
) -> IdentityReport:
    """Per-sample composition of the four-parameter kernel at time r.

    A walk crossing from row rcheck to rcheck+1 does so at one column i, so

        Z[start -> end] = sum_i Z[start -> (i, rcheck)] Z[(i, rcheck+1) -> end].

    In the scaled bookkeeping the left factor at split column i carries the
    spatial label i - rcheck and the right factor i - rcheck - 1; the one-unit
    mismatch between those labels leaves a single +p after the drifts cancel:

        hbar(x,s;y,t) = p + LSE_i [hbar_left(i) + hbar_right(i)].

    Checked on the unscaled values at 1e-10 relative.
    """
    if not (q.s < r < q.t):
        raise ValueError(f"need s < r < t, got s={q.s}, r={r}, t={q.t}")
    xbar, sch, ybar, tch = landscape_indices(consts, q)
    rch = temporal_index(q.N, r)
    if not (sch + 1 <= rch <= tch - 1):
        raise ValueError(
            f"misaligned split time r={r}: rcheck={rch} not in "
            f"[{sch + 1}, {tch - 1}]"
        )
    p = consts.p
    start = (xbar + sch + 1, sch + 1)
    end = (ybar + tch, tch)
    _require_box(env, start[0], end[0], start[1], end[1])
    lhs = landscape_value_raw(env, consts, q)

    fwd = polymer.forward_table(env, start, (end[0], rch))
    box = np.ascontiguousarray(
        np.asarray(env.box(start[0], end[0], rch + 1, end[1]))
    )
    bwd = polymer.dp_backward(box)
    terms = []
    for i in range(start[0], end[0] + 1):
        left = float(fwd[i - start[0], rch - start[1]])
        right = float(bwd[i - start[0], 0])
        zl = i - rch  # spatial label of the left factor
        zr = i - rch - 1  # spatial label of the right factor
        left_k = left - p * (zl - xbar + 4 * q.N * (r - q.s))
        right_k = right - p * (ybar - zr + 4 * q.N * (q.t - r))
        terms.append(left_k + right_k)
    rhs = p + lse(terms)
    return compare(
        "landscape_composition",
        {"N": q.N, "x": q.x, "s": q.s, "y": q.y, "t": q.t, "r": r},
        lhs,
        rhs,
        1e-10,
        notes={"rcheck": rch, "split_terms": len(terms)},
    )


# ---------------------------------------------------------------------------
# sheet decomposition at level k: exact component engine
# ---------------------------------------------------------------------------


class SheetDecomposition:
    """Exact split of one sheet value into level-k components.

    Holds, for a fixed (environment, N, k, x, y): the curve minors to depth
    k+1, one exact table per bottom-line source (k+1 leftmost plus the sheet
    start), the backward pass over the increment grid, and the resulting
    exact masses.  All hypotheses (1 <= k <= N-1, k < xbar) are enforced at
    construction.
    """

    def __init__(
        self,
        env: Environment,
        consts: ThetaConstants,
        N: int,
        k: int,
        x: float,
        y: float,
    ) -> None:
        if not (1 <= k <= N - 1):
            raise ValueError(f"need 1 <= k <= N-1, got k={k}, N={N}")
        xbar = spatial_index(N, x, consts)
        yhat = spatial_index_far(N, y, consts)
        if not (k < xbar):
            raise ValueError(f"need k < xbar, got k={k}, xbar={xbar}")
        if xbar > yhat:
            raise ValueError(f"empty support: xbar={xbar} > yhat={yhat}")
        n = 2 * N
        _require_box(env, 1, yhat, 1, n)
        self.env = env
        self.consts = consts
        self.N = N
        self.k = k
        self.x = x
        self.y = y
        self.xbar = xbar
        self.yhat = yhat

        self.curves = grsk.build_curves(env, n, k + 1, yhat)
        self._tables: dict[int, exact.ExactTable] = {
            i: exact.exact_table(env, (i, n), yhat) for i in range(1, k + 2)
        }
        if xbar not in self._tables:
            self._tables[xbar] = exact.exact_table(env, (xbar, n), yhat)
        self.h_frac = self._tables[xbar].value(yhat, 1)

        # backward pass over the increment grid: gpart[z - xbar] is the
        # partition value of ensemble tuples from (z, k) down to (yhat, 1)
        inc = {
            (j, c): self.curves.exact_increment(j, c)
            for j in range(1, k + 1)
            for c in range(xbar, yhat + 1)
        }
        width = yhat - xbar + 1
        prev = [ZERO] * width  # level j-1 row during the sweep
        for j in range(1, k + 1):
            row = [ZERO] * width
            for ci in range(width - 1, -1, -1):
                right = row[ci + 1] if ci + 1 < width else ZERO
                down = prev[ci]
                if j == 1 and ci == width - 1:
                    down = ONE  # path may terminate at (yhat, 1)
                row[ci] = inc[(j, xbar + ci)] * (right + down)
            prev = row
        self._gpart = prev  # level k row

        self._aug: dict[int, Fraction] = {}
        self._mass: list[Fraction] | None = None

    def aug_frac(self, z: int) -> Fraction:
        """Augmented minor: sources {1..k, xbar} on the bottom line, sinks H_{k+1}(z)."""
        if z not in self._aug:
            srcs = list(range(1, self.k + 1)) + [self.xbar]
            sink_cols = range(z - self.k, z + 1)
            mat = [[self._tables[s].value(c, 1) for c in sink_cols] for s in srcs]
            self._aug[z] = exact.exact_det(mat)
        return self._aug[z]

    def hbar(self) -> float:
        return exact.exact_log(self.h_frac) - self.consts.p * (
            self.yhat - self.xbar + 2 * self.N
        )

    def Fbar(self, z: int) -> float:
        """Integer-argument F component at column z of the support."""
        self._check_support(z)
        num = self.aug_frac(z)
        den = ONE
        for i in range(1, self.k + 2):
            den *= self.curves.exact_value(i, z)
        drift = self.consts.p * (self.xbar - self.N ** (2.0 / 3.0) * self.k)
        return exact.exact_log(num / den) + drift

    def Gbar(self, z: int) -> float:
        """Integer-argument G component at column z of the support."""
        self._check_support(z)
        val = self._gpart[z - self.xbar] * self.curves.exact_value(self.k + 1, z)
        drift = self.consts.p * (self.yhat - self.N ** (2.0 / 3.0) * self.k + 2 * self.N)
        return exact.exact_log(val) - drift

    def mass_fractions(self) -> list[Fraction]:
        """Exact mu masses over [xbar, yhat]; drifts cancel algebraically."""
        if self._mass is None:
            out = []
            for z in range(self.xbar, self.yhat + 1):
                det_k = ONE
                for i in range(1, self.k + 1):
                    det_k *= self.curves.exact_value(i, z)
                out.append(
                    self.aug_frac(z) * self._gpart[z - self.xbar] / (det_k * self.h_frac)
                )
            self._mass = out
        return self._mass

    def _check_support(self, z: int) -> None:
        if not (self.xbar <= z <= self.yhat):
            raise ValueError(f"column {z} outside support [{self.xbar}, {self.yhat}]")


def components_FGR(
    env: Environment,
    consts: ThetaConstants,
    N: int,
    k: int,
    x: float,
    z: float,
    y: float,
) -> tuple[float, float, float]:
    """Scaled component triple (F_k^N(x,z), G_k^N(z,y), R_k^N(x,z)).

    R subtracts the parabola and the level shift from F:
    R = F - 2 z x - 2^{3/2} k^{1/2} x^{1/2}.
    """
    dec = SheetDecomposition(env, consts, N, k, x, y)
    zhat = spatial_index_far(N, z, consts)
    scale = fluctuation_scale(N, consts)
    F = scale * dec.Fbar(zhat)
    G = scale * dec.Gbar(zhat)
    R = F - 2.0 * z * x - 2.0 ** 1.5 * math.sqrt(k) * math.sqrt(x)
    return F, G, R


@dataclass
class PathMeasure:
    """The level-k split measure of one sheet value on [xbar, yhat].

    ``log_mass[i]`` is log mu(xbar + i); A(z) sums masses from z upward,
    B(z) from xbar up to z; both clamp outside the support.  Exact rational
    masses are kept so the log-tails in the sandwich inequalities never lose
    precision to 1 - cdf cancellation.
    """

    N: int
    k: int
    x: float
    y: float
    xbar: int
    yhat: int
    log_mass: np.ndarray
    _exact_mass: list[Fraction] = field(repr=False, default_factory=list)

    @property
    def support(self) -> range:
        return range(self.xbar, self.yhat + 1)

    def total_mass(self) -> float:
        return float(math.exp(lse(list(self.log_mass))))

    def _tail_frac(self, z: int, upper: bool) -> Fraction:
        lo, hi = self.xbar, self.yhat
        if upper:
            z = max(z, lo)
            if z > hi:
                return ZERO
            return sum(self._exact_mass[z - lo :], ZERO)
        z = min(z, hi)
        if z < lo:
            return ZERO
        return sum(self._exact_mass[: z - lo + 1], ZERO)

    def A(self, z: int) -> float:
        """Upper tail: sum of mu over [z, yhat]."""
        return float(self._tail_frac(z, upper=True))

    def B(self, z: int) -> float:
        """Lower tail: sum of mu over [xbar, z]."""
        return float(self._tail_frac(z, upper=False))

    def log_A(self, z: int) -> float:
        return exact.exact_log(self._tail_frac(z, upper=True))

    def log_B(self, z: int) -> float:
        return exact.exact_log(self._tail_frac(z, upper=False))

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "k": self.k,
            "x": self.x,
            "y": self.y,
            "support": [self.xbar, self.yhat],
            "log_mass": [float(v) for v in self.log_mass],
            "A": [self.A(z) for z in self.support],
            "B": [self.B(z) for z in self.support],
        }

    def to_csv(self) -> str:
        lines = ["z,log_mass,A,B"]
        for i, z in enumerate(self.support):
            lines.append(f"{z},{float(self.log_mass[i])!r},{self.A(z)!r},{self.B(z)!r}")
        return "\n".join(lines) + "\n"


def _measure_of(dec: SheetDecomposition) -> PathMeasure:
    masses = dec.mass_fractions()
    log_mass = np.array([exact.exact_log(m) for m in masses])
    return PathMeasure(
        N=dec.N, k=dec.k, x=dec.x, y=dec.y, xbar=dec.xbar, yhat=dec.yhat,
        log_mass=log_mass, _exact_mass=masses,
    )


def path_measure(
    env: Environment, consts: ThetaConstants, N: int, k: int, x: float, y: float
) -> PathMeasure:
    """Split measure mu^N_{k,x,y} with both cdf tails."""
    return _measure_of(SheetDecomposition(env, consts, N, k, x, y))


def verify_sandwich(
    env: Environment, consts: ThetaConstants, params: dict
) -> IdentityReport:
    """The four tail-sandwich inequalities at one sampled configuration.

    params: {"N", "k", "x1", "x2", "y1", "y2", "z"} with 0 < x1 <= x2 and
    z <= y1 <= y2.  Using the scaled values h, F, G and the unscaled
    log-tails (valid once the fluctuation scale is <= 1, enforced here):

        F(x2,z) - F(x1,z) <= h(x2,y1) - h(x1,y1) - log A(x1,y1; zhat)
        F(x2,z) - F(x1,z) >= h(x2,y1) - h(x1,y1) + log B(x2,y1; zhat)
        G(z,y2) - G(z,y1) <= h(x1,y2) - h(x1,y1) - log(1 - B(x1,y1; zhat-1))
        G(z,y2) - G(z,y1) >= h(x1,y2) - h(x1,y1) + log(1 - A(x1,y2; zhat+1))

    where 1 - B(zhat-1) and 1 - A(zhat+1) are evaluated as the exact
    complementary tails A(zhat) and B(zhat) of the same measure.  PASS iff
    no violation beyond 1e-10.
    """
    N, k = int(params["N"]), int(params["k"])
    x1, x2 = float(params["x1"]), float(params["x2"])
    y1, y2 = float(params["y1"]), float(params["y2"])
    z = float(params["z"])
    if not (0 < x1 <= x2):
        raise ValueError(f"need 0 < x1 <= x2, got x1={x1}, x2={x2}")
    if not (z <= y1 <= y2):
        raise ValueError(f"need z <= y1 <= y2, got z={z}, y1={y1}, y2={y2}")
    scale = fluctuation_scale(N, consts)
    if scale > 1:
        raise ValueError(f"fluctuation scale {scale} > 1; increase N")
    zhat = spatial_index_far(N, z, consts)
    xbar2 = spatial_index(N, x2, consts)
    if zhat < xbar2:
        raise ValueError(f"need zhat >= xbar(x2): zhat={zhat} < {xbar2}")

    dec11 = SheetDecomposition(env, consts, N, k, x1, y1)
    dec21 = SheetDecomposition(env, consts, N, k, x2, y1)
    dec12 = SheetDecomposition(env, consts, N, k, x1, y2)
    m11 = _measure_of(dec11)
    m21 = _measure_of(dec21)
    m12 = _measure_of(dec12)

    h11 = scale * dec11.hbar()
    h21 = scale * dec21.hbar()
    h12 = scale * dec12.hbar()
    F1 = scale * dec11.Fbar(zhat)
    F2 = scale * dec21.Fbar(zhat)
    G1 = scale * dec11.Gbar(zhat)
    G2 = scale * dec12.Gbar(zhat)

    slacks = {
        "F_upper": (h21 - h11 - m11.log_A(zhat)) - (F2 - F1),
        "F_lower": (F2 - F1) - (h21 - h11 + m21.log_B(zhat)),
        # complementary-tail forms: 1 - B(zhat-1) = A(zhat), 1 - A(zhat+1) = B(zhat)
        "G_upper": (h12 - h11 - m11.log_A(zhat)) - (G2 - G1),
        "G_lower": (G2 - G1) - (h12 - h11 + m12.log_B(zhat)),
    }
    worst = min(slacks.values())
    status = PASS if worst >= -1e-10 else FAIL
    return IdentityReport(
        identity="tail_sandwich",
        params=dict(params),
        lhs=worst,
        rhs=0.0,
        abs_gap=max(0.0, -worst),
        rel_gap=max(0.0, -worst),
        status=status,
        tol=1e-10,
        notes={"slacks": slacks, "zhat": zhat, "scale": scale},
    )
