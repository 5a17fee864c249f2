"""Monte Carlo studies of the desk-scale scaling phenomena.

Every study follows the same pattern: a kernel draws one replicate
environment from an independent seed stream, computes a handful of scalar
observables, and an aggregator reduces the per-replicate tables to a
deterministic report.  Streams are keyed by a flat task index, so the
aggregate is independent of scheduling order and any subset of tasks can be
re-run in isolation.  Wall-clock timings stay on the result object and are
never serialized, keeping reports byte-stable.

Kinds:

* ``shape``          — diagonal free energy per unit length vs the digamma law
* ``exponent``       — growth of std(log Z) with N, plus a fixed-path CLT control
* ``transversal``    — localization of the antidiagonal midpoint maximizer
* ``increment_tail`` — temporal/spatial increments of the four-parameter field
* ``line_gap``       — point-to-line gaps and the midpoint splitting defect
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import polymer
from .env import CapacityError, Environment, Window, sample_environment, stream
from .logspace import lse
from .scaling import (
    ThetaConstants,
    constants,
    digamma,
    fluctuation_scale,
    spatial_index,
    temporal_index,
)

KINDS = ("shape", "exponent", "transversal", "increment_tail", "line_gap")


def canonical_json(obj) -> str:
    """Deterministic JSON rendering used for hashing and report files."""

    def scrub(v):
        if isinstance(v, dict):
            return {str(k): scrub(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [scrub(x) for x in v]
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        if isinstance(v, float) and not math.isfinite(v):
            return repr(v)
        return v

    return json.dumps(scrub(obj), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class ExperimentConfig:
    theta: float
    sizes: tuple[int, ...]
    replicates: int
    seed: int
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.replicates < 2:
            raise ValueError("need at least 2 replicates")
        sizes = tuple(int(n) for n in self.sizes)
        if any(b <= a for a, b in zip(sizes, sizes[1:])) or not sizes:
            raise ValueError("sizes must be nonempty and strictly increasing")
        object.__setattr__(self, "sizes", sizes)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "sizes": list(self.sizes),
            "replicates": self.replicates,
            "seed": self.seed,
            "kind": self.kind,
            "params": dict(self.params),
        }

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()[:16]


@dataclass
class ReplicateResults:
    config: ExperimentConfig
    observables: dict[tuple[int, int], dict[str, float]]
    failures: dict[tuple[int, int], str]
    wall_clock: float  # seconds; never serialized

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    def column(self, size: int, name: str) -> np.ndarray:
        """All finished values of one observable at one size, in replicate order."""
        vals = [
            obs[name]
            for (n, _), obs in sorted(self.observables.items())
            if n == size and name in obs
        ]
        return np.asarray(vals, dtype=float)


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    points: list[tuple[float, float]]
    residuals: list[float]

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "points": [list(p) for p in self.points],
            "residuals": list(self.residuals),
        }


def _ols(points: Sequence[tuple[float, float]]) -> ExponentFit:
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    return ExponentFit(float(slope), float(intercept), [tuple(p) for p in points],
                       [float(r) for r in resid])


# ---------------------------------------------------------------------------
# replicate kernels (top-level functions so process pools can pickle tasks)
# ---------------------------------------------------------------------------


def _diag_logweights(theta: float, N: int, seq, params: dict) -> np.ndarray:
    if params.get("weights") == "ones":
        return np.zeros((N, N))
    env = sample_environment(theta, Window(1, N, 1, N), seq)
    return np.asarray(env.log_weights)


def _kernel_shape(theta: float, N: int, seq, params: dict) -> dict[str, float]:
    a = _diag_logweights(theta, N, seq, params)
    table = polymer.dp_forward(np.ascontiguousarray(a))
    fixed = float(a[:, 0].sum() + a[-1, 1:].sum())  # along row 1, then up column N
    return {"logZ": float(table[-1, -1]), "fixed_path": fixed}


_kernel_exponent = _kernel_shape


def _kernel_transversal(theta: float, r: int, seq, params: dict) -> dict[str, float]:
    N = 2 * r
    env = sample_environment(theta, Window(1, N, 1, N), seq)
    point = polymer.argmax_on_antidiagonal(env, r, (N, N))
    signed = float(point[0] - r)
    return {"signed": signed, "ratio": abs(signed) / float(r) ** (2.0 / 3.0)}


def _kernel_increment_tail(theta: float, N: int, seq, params: dict) -> dict[str, float]:
    C = constants(theta)
    t0 = float(params["t"])
    y0 = float(params["y"])
    d_grid = [float(d) for d in params["d_grid"]]
    scale = fluctuation_scale(N, C)
    tmax = t0 + max(d_grid)
    tch_max = temporal_index(N, tmax)
    ymax = y0 + max(d_grid)
    col_max = spatial_index(N, ymax, C) + tch_max
    env = sample_environment(theta, Window(1, col_max, 1, tch_max), seq)
    start = (2, 1)  # x = 0, s = 0
    table = polymer.forward_table(env, start, (col_max, tch_max))

    def h(y: float, t: float) -> float:
        ybar, tch = spatial_index(N, y, C), temporal_index(N, t)
        raw = float(table[ybar + tch - 2, tch - 1]) - C.p * (ybar - 1 + 4 * N * t)
        return scale * raw

    base = h(y0, t0)
    out: dict[str, float] = {}
    for d in d_grid:
        out[f"dt_{d!r}"] = abs(h(y0, t0 + d) - base) / d ** (1.0 / 3.0)
        out[f"dx_{d!r}"] = abs(h(y0 + d, t0) - base) / d ** (1.0 / 3.0)
    return out


def _kernel_line_gap(theta: float, N: int, seq, params: dict) -> dict[str, float]:
    a_grid = [int(a) for a in params["a_grid"]]
    y_off = float(params.get("y", 0.0))
    shift = int(y_off * float(N) ** (2.0 / 3.0))
    w = (N + shift, N - shift)
    if min(w) < 2:
        raise ValueError(f"endpoint {w} leaves the first quadrant; shrink |y|")
    amax = max(a_grid)
    env = sample_environment(theta, Window(1, w[0] + amax, 1, w[1] + amax), seq)
    table = polymer.forward_table(env, (1, 1), (w[0] + amax, w[1] + amax))

    def val(c: int, r: int) -> float:
        return float(table[c - 1, r - 1])

    v_w = val(*w)
    out: dict[str, float] = {}
    for a in a_grid:
        pts = polymer.antidiagonal_targets(w, a)
        pts = [p for p in pts if p[0] >= 1 and p[1] >= 1]
        gap = lse([val(*p) for p in pts]) - v_w
        out[f"gap_{a}"] = gap if a == 0 else gap / math.sqrt(a)
    rmid = (w[0] + w[1]) // 4
    if rmid < 1:
        raise ValueError(f"endpoint {w} too small for a midpoint split")
    # second leg drops its start weight so splitting at (rmid, rmid) counts it once
    defect = v_w - (val(rmid, rmid) + _second_leg(env, (rmid, rmid), w))
    out["defect"] = defect
    out["defect_scaled"] = defect / float(rmid) ** (1.0 / 3.0)
    return out


def _second_leg(env: Environment, r: tuple[int, int], w: tuple[int, int]) -> float:
    """log of the r -> w partition value with the weight at r excluded."""
    logw_r = float(env.box(r[0], r[0], r[1], r[1])[0, 0])
    return polymer.log_Z_up(env, r, w) - logw_r


_KERNELS: dict[str, Callable] = {
    "shape": _kernel_shape,
    "exponent": _kernel_exponent,
    "transversal": _kernel_transversal,
    "increment_tail": _kernel_increment_tail,
    "line_gap": _kernel_line_gap,
}


def worker_count() -> int:
    override = os.environ.get("LOGGAMMA_THREADS", "")
    if override:
        return max(1, int(override))
    return os.cpu_count() or 1


def _run_task(args: tuple) -> tuple[tuple[int, int], dict[str, float] | None, str | None]:
    kind, theta, size, rep, task_index, seed, params = args
    try:
        seq = stream(seed, task_index)
        obs = _KERNELS[kind](theta, size, seq, params)
        return (size, rep), obs, None
    except (CapacityError, ValueError, MemoryError, OverflowError) as exc:
        return (size, rep), None, f"{type(exc).__name__}: {exc}"


def run_replicates(config: ExperimentConfig, order: Sequence[int] | None = None) -> ReplicateResults:
    """Run every (size, replicate) task on its own seed stream.

    ``order`` permutes execution (a testing hook); the aggregate is sorted by
    task key and therefore identical for any permutation.  A failing task is
    recorded under its key without aborting siblings.
    """
    M = config.replicates
    tasks = []
    for i_size, size in enumerate(config.sizes):
        for rep in range(M):
            flat = i_size * M + rep
            tasks.append((config.kind, config.theta, size, rep, flat, config.seed,
                          dict(config.params)))
    if order is not None:
        if sorted(order) != list(range(len(tasks))):
            raise ValueError("order must be a permutation of the task indices")
        tasks = [tasks[i] for i in order]

    t0 = time.perf_counter()
    workers = worker_count()
    results: dict[tuple[int, int], dict[str, float]] = {}
    failures: dict[tuple[int, int], str] = {}
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers)))
            for key, obs, err in done:
                if err is None:
                    results[key] = obs
                else:
                    failures[key] = err
    else:
        for task in tasks:
            key, obs, err = _run_task(task)
            if err is None:
                results[key] = obs
            else:
                failures[key] = err
    wall = time.perf_counter() - t0
    return ReplicateResults(
        config=config,
        observables=dict(sorted(results.items())),
        failures=dict(sorted(failures.items())),
        wall_clock=wall,
    )


def _base_report(config: ExperimentConfig, res: ReplicateResults) -> dict:
    return {
        "kind": config.kind,
        "config": config.to_dict(),
        "config_hash": config.config_hash,
        "seed": config.seed,
        "partial": res.partial,
        "failures": {f"{n}/{r}": msg for (n, r), msg in res.failures.items()},
    }


def _quantile(vals: np.ndarray, q: float) -> float:
    return float(np.quantile(vals, q, method="midpoint"))


def _column_or_raise(res: ReplicateResults, size: int, name: str) -> np.ndarray:
    """Aggregation input; empty (every replicate failed) is a config error."""
    vals = res.column(size, name)
    if vals.size == 0:
        hint = next((msg for (n, _), msg in res.failures.items() if n == size), "no data")
        raise ValueError(f"no completed replicates for {name!r} at size {size}: {hint}")
    return vals


def shape_study(config: ExperimentConfig) -> dict:
    """Diagonal free energy per unit length against the digamma prediction."""
    if config.kind != "shape":
        raise ValueError("config.kind must be 'shape'")
    res = run_replicates(config)
    target = (
        math.log(2.0)
        if config.params.get("weights") == "ones"
        else -digamma(config.theta / 2.0)
    )
    rows = []
    for N in config.sizes:
        vals = _column_or_raise(res, N, "logZ") / (2.0 * N)
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
        rows.append({
            "N": N,
            "mean_per_length": mean,
            "stderr": se,
            "deviation": abs(mean - target),
            "n_ok": int(len(vals)),
        })
    report = _base_report(config, res)
    report.update({
        "target": target,
        "per_size": rows,
        "deviation_shrinks": rows[-1]["deviation"] < rows[0]["deviation"],
    })
    return report


def fluctuation_exponent(
    config: ExperimentConfig, results: ReplicateResults | None = None
) -> ExponentFit:
    """OLS slope of log std(log Z) against log N.

    With ``params={"control": True}`` the observable is the fixed single-path
    partition value, whose independent-sum fluctuations give slope 1/2.  Both
    observables come from the same kernel, so a precomputed ``results`` can
    serve main and control fits without re-sampling.
    """
    if config.kind != "exponent":
        raise ValueError("config.kind must be 'exponent'")
    if len(config.sizes) < 4:
        raise ValueError("need at least 4 sizes for a slope fit")
    name = "fixed_path" if config.params.get("control") else "logZ"
    res = run_replicates(config) if results is None else results
    points = []
    for N in config.sizes:
        std = float(_column_or_raise(res, N, name).std(ddof=1))
        if std <= 0.0:
            raise ArithmeticError(f"degenerate variance at N={N}")
        points.append((math.log(N), math.log(std)))
    return _ols(points)


def transversal_study(config: ExperimentConfig) -> dict:
    """Localization of the antidiagonal maximizer at the 2/3 scale."""
    if config.kind != "transversal":
        raise ValueError("config.kind must be 'transversal'")
    K_grid = [float(k) for k in config.params.get("K_grid", (1.0, 2.0, 3.0))]
    res = run_replicates(config)
    rows = []
    for r in config.sizes:
        ratios = _column_or_raise(res, r, "ratio")
        signed = _column_or_raise(res, r, "signed")
        se = float(signed.std(ddof=1) / math.sqrt(len(signed)))
        rows.append({
            "r": r,
            "median": _quantile(ratios, 0.5),
            "p95": _quantile(ratios, 0.95),
            "exceedance": {repr(K): float((ratios > K).mean()) for K in K_grid},
            "signed_mean": float(signed.mean()),
            "signed_stderr": se,
            "n_ok": int(len(ratios)),
        })
    medians = [row["median"] for row in rows]
    report = _base_report(config, res)
    report.update({
        "per_r": rows,
        "K_grid": K_grid,
        "median_factor": max(medians) / min(medians) if min(medians) > 0 else math.inf,
    })
    return report


def increment_tail_study(config: ExperimentConfig) -> dict:
    """Quantiles of |increment| / d^(1/3) for temporal and spatial shifts."""
    if config.kind != "increment_tail":
        raise ValueError("config.kind must be 'increment_tail'")
    d_grid = [float(d) for d in config.params["d_grid"]]
    for N in config.sizes:
        for d in d_grid:
            steps = 2.0 * N * d
            if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
                raise ValueError(
                    f"temporal shift d={d} is not lattice-aligned at N={N} "
                    f"(2*N*d = {steps})"
                )
    res = run_replicates(config)
    per_size = []
    for N in config.sizes:
        table = []
        for d in d_grid:
            row = {"d": d}
            for variant in ("dt", "dx"):
                vals = _column_or_raise(res, N, f"{variant}_{d!r}")
                row[f"{variant}_q90"] = _quantile(vals, 0.90)
                row[f"{variant}_q99"] = _quantile(vals, 0.99)
            table.append(row)
        q99 = [row["dt_q99"] for row in table]
        flat = max(q99) / min(q99) if min(q99) > 0 else math.inf
        per_size.append({
            "N": N,
            "per_d": table,
            "temporal_q99_spread": flat,
            "flatness_flag": flat > 3.0,
        })
    report = _base_report(config, res)
    report.update({"d_grid": d_grid, "per_size": per_size})
    return report


def point_to_line_gap_study(config: ExperimentConfig) -> dict:
    """Point-to-line gaps over sqrt(a) and the midpoint splitting defect."""
    if config.kind != "line_gap":
        raise ValueError("config.kind must be 'line_gap'")
    a_grid = [int(a) for a in config.params["a_grid"]]
    res = run_replicates(config)
    per_size = []
    for N in config.sizes:
        rows = []
        for a in a_grid:
            vals = _column_or_raise(res, N, f"gap_{a}")
            rows.append({
                "a": a,
                "min": float(vals.min()),
                "q90": _quantile(vals, 0.90),
                "q99": _quantile(vals, 0.99),
            })
        defect = _column_or_raise(res, N, "defect")
        scaled = _column_or_raise(res, N, "defect_scaled")
        q99s = [row["q99"] for row in rows if row["a"] > 0]
        per_size.append({
            "N": N,
            "per_a": rows,
            "gap_min": float(min(row["min"] for row in rows)),
            "q99_nonincreasing": all(b <= a_ + 1e-12 for a_, b in zip(q99s, q99s[1:])),
            "defect_min": float(defect.min()),
            "defect_scaled_q90": _quantile(scaled, 0.90),
            "defect_scaled_q99": _quantile(scaled, 0.99),
        })
    report = _base_report(config, res)
    report.update({"a_grid": a_grid, "per_size": per_size})
    return report


STUDIES: dict[str, Callable[[ExperimentConfig], dict]] = {
    "shape": shape_study,
    "transversal": transversal_study,
    "increment_tail": increment_tail_study,
    "line_gap": point_to_line_gap_study,
}


def run_study(config: ExperimentConfig) -> dict:
    """Dispatch a config to its aggregator; exponent kind returns both fits."""
    if config.kind == "exponent":
        res = run_replicates(config)
        fit = fluctuation_exponent(config, res)
        control_cfg = ExperimentConfig(
            theta=config.theta, sizes=config.sizes, replicates=config.replicates,
            seed=config.seed, kind="exponent",
            params=dict(config.params, control=True),
        )
        control = fluctuation_exponent(control_cfg, res)
        report = _base_report(config, res)
        report.update({"fit": fit.to_dict(), "control_fit": control.to_dict()})
        return report
    return STUDIES[config.kind](config)
