"""Batch command-line front end.

Subcommands: sample, verify, sheet, landscape, curves, measure, experiment.
All output is deterministic for a fixed (argv, config) pair: JSON is sorted
and scrubbed of non-finite floats, CSV is emitted only for per-point tables,
and no wall-clock values reach the reports.  Exit codes: 0 success, 1 an
identity verification FAILed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys

from numpy.random import Generator, Philox

from . import __version__, experiments, grsk, sheetscape
from .env import (
    Environment,
    Window,
    fingerprint,
    sample_environment,
    save_environment,
    stream,
)
from .reports import FAIL, IdentityReport
from .scaling import constants, spatial_index, spatial_index_far, temporal_index

IDENTITIES = (
    "greene",
    "product",
    "key1",
    "affine",
    "monotonicity",
    "composition",
    "bisection",
    "sandwich",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A002 - argparse hook
        raise UsageError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="lgpolymer", description=__doc__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, theta=True):
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        if theta:
            sp.add_argument("--theta", type=float, default=1.0)
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("sample", help="draw an environment and save it")
    common(sp)
    sp.add_argument("--n", type=int, required=True, help="rows (second index)")
    sp.add_argument("--cols", type=int, help="columns (default: n)")

    sp = sub.add_parser("verify", help="run one identity verifier on a sampled field")
    common(sp)
    sp.add_argument("--identity", choices=IDENTITIES, required=True)
    sp.add_argument("--n", type=int, default=4, help="line count of the field")
    sp.add_argument("--N", type=int, default=None, help="column span / scaling size")
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--x", type=float, default=None)
    sp.add_argument("--y", type=float, default=None)
    sp.add_argument("--s", type=float, default=0.0)
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--r", type=float, default=0.5, help="composition split time")
    sp.add_argument("--x2", type=float, default=None)
    sp.add_argument("--y2", type=float, default=None)
    sp.add_argument("--z", type=float, default=None)
    sp.add_argument("--samples", type=int, default=400)

    sp = sub.add_parser("sheet", help="scaled two-parameter value on a sampled field")
    common(sp)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--x", type=float, default=0.0)
    sp.add_argument("--y", type=float, default=0.0)

    sp = sub.add_parser("landscape", help="scaled four-parameter value")
    common(sp)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--x", type=float, default=0.0)
    sp.add_argument("--s", type=float, default=0.0)
    sp.add_argument("--y", type=float, default=0.0)
    sp.add_argument("--t", type=float, default=1.0)

    sp = sub.add_parser("curves", help="build the line ensemble and dump its values")
    common(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--N", type=int, required=True, help="column span")
    sp.add_argument("--l", type=int, default=None, help="depth (default min(n, 3))")

    sp = sub.add_parser("measure", help="level-k split measure of a sheet value")
    common(sp)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--y", type=float, default=0.0)

    sp = sub.add_parser("experiment", help="run a Monte Carlo study from a config file")
    sp.add_argument("--out", help="output path (default stdout)")
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--kind", choices=experiments.KINDS)
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=None, help="override config seed")
    sp.add_argument("--theta", type=float, default=None, help="override config theta")
    return p


def _envelope(command: str, seed: int, resolved: dict) -> dict:
    blob = experiments.canonical_json(resolved)
    return {
        "version": f"lgpolymer-{__version__}",
        "command": command,
        "seed": seed,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
        "resolved": resolved,
    }


def _report_payload(command: str, seed: int, resolved: dict, reports) -> tuple[dict, bool]:
    reps = [reports] if isinstance(reports, IdentityReport) else list(reports)
    ok = all(r.status != FAIL for r in reps)
    payload = _envelope(command, seed, resolved)
    payload["reports"] = [r.to_dict() for r in reps]
    payload["ok"] = ok
    return payload, ok


def _int_arg(value, name: str) -> int:
    if value is None:
        raise UsageError(f"--{name} is required for this identity")
    f = float(value)
    if not f.is_integer():
        raise UsageError(f"--{name} must be integer-valued, got {value}")
    return int(f)


def _cmd_sample(args) -> tuple[dict, bool]:
    rows = args.n
    cols = args.cols or rows
    env = sample_environment(args.theta, Window(1, cols, 1, rows), args.seed)
    if not args.out:
        raise UsageError("sample requires --out for the binary field")
    save_environment(env, args.out)
    resolved = {"theta": args.theta, "seed": args.seed, "cols": cols, "rows": rows}
    payload = _envelope("sample", args.seed, resolved)
    payload.update({"fingerprint": fingerprint(env), "path": args.out})
    args.out = None  # binary already written; the summary goes to stdout
    return payload, True


def _sampled(theta: float, cols: int, rows: int, seed: int) -> Environment:
    return sample_environment(theta, Window(1, cols, 1, rows), seed)


def _cmd_verify(args) -> tuple[dict, bool]:
    ident = args.identity
    seed = args.seed
    resolved = {"identity": ident, "theta": args.theta, "seed": seed}

    if ident == "greene":
        n, cols = args.n, args.N or 10
        env = _sampled(args.theta, cols, n, seed)
        rng = Generator(Philox(stream(seed, 1)))
        U, V = grsk.random_endpoint_pair(rng, n, cols, k_max=args.k or 3)
        resolved.update({"n": n, "cols": cols})
        return _report_payload("verify", seed, resolved, grsk.verify_greene(env, U, V))

    if ident == "product":
        n, cols = args.n, args.N or 10
        env = _sampled(args.theta, cols, n, seed)
        l_top = min(args.k or 3, n, cols)
        curves = grsk.build_curves(env, n, l_top, cols)
        reps = [
            grsk.verify_product(env, curves, l, j)
            for l in range(1, l_top + 1)
            for j in range(l, cols + 1)
        ]
        resolved.update({"n": n, "cols": cols, "l_max": l_top})
        return _report_payload("verify", seed, resolved, reps)

    if ident == "key1":
        n = args.n
        x = _int_arg(args.x, "x")
        y = _int_arg(args.y, "y")
        k = _int_arg(args.k, "k")
        env = _sampled(args.theta, y, n, seed)
        resolved.update({"n": n, "x": x, "y": y, "k": k})
        return _report_payload("verify", seed, resolved, grsk.verify_key1(env, x, y, k))

    if ident == "affine":
        n, cols = args.n, args.N or 10
        env = _sampled(args.theta, cols, n, seed)
        l_top = min(args.k or 3, n, cols)
        curves = grsk.build_curves(env, n, l_top, cols)
        rng = Generator(Philox(stream(seed, 1)))
        a1 = float(rng.integers(1, 4))
        a2 = float(rng.integers(1, 3))
        a3 = float(rng.integers(-2, 3))
        a4 = float(rng.normal())
        a5 = [float(v) for v in rng.normal(size=l_top)]
        l = int(rng.integers(1, l_top + 1))
        m = int(rng.integers(1, l + 1))
        xc = int(rng.integers(l, cols))
        yc = int(rng.integers(xc, cols + 1))
        q = grsk.EnsembleQuery(
            start=((xc - a3) / a2, l), end=((yc - a3) / a2, m), beta=1.0
        )
        resolved.update({"n": n, "cols": cols})
        rep = grsk.verify_affine(curves, a1, a2, a3, a4, a5, q)
        return _report_payload("verify", seed, resolved, rep)

    if ident == "monotonicity":
        n, cols = args.n, args.N or 10
        env = _sampled(args.theta, cols, n, seed)
        l_top = min(args.k or 3, n, cols)
        curves = grsk.build_curves(env, n, l_top, cols)
        spec = {"n_samples": args.samples, "seed": seed}
        resolved.update({"n": n, "cols": cols, "samples": args.samples})
        return _report_payload("verify", seed, resolved, grsk.verify_monotonicity(curves, spec))

    C = constants(args.theta)
    if ident == "composition":
        N = args.N or 6
        q = sheetscape.LandscapeQuery(
            N=N, x=args.x or 0.0, s=args.s, y=args.y or 0.0, t=args.t
        )
        xbar, sch, ybar, tch = sheetscape.landscape_indices(C, q)
        env = _sampled(args.theta, ybar + tch, tch, seed)
        resolved.update({"N": N, "x": q.x, "s": q.s, "y": q.y, "t": q.t, "r": args.r})
        rep = sheetscape.verify_composition(env, C, q, args.r)
        return _report_payload("verify", seed, resolved, rep)

    if ident == "bisection":
        N = args.N or 6
        k = args.k if args.k is not None else 1
        # unit lattice spacing is q^2/N^(2/3); N units land mid-lattice
        x = args.x if args.x is not None else C.q ** 2 * N ** (1.0 / 3.0)
        y = args.y or 0.0
        yhat = spatial_index_far(N, y, C)
        env = _sampled(args.theta, yhat, 2 * N, seed)
        pm = sheetscape.path_measure(env, C, N, k, x, y)
        total = pm.total_mass()
        comp = max(
            abs(pm.A(z) + pm.B(z - 1) - 1.0) for z in range(pm.xbar, pm.yhat + 1)
        )
        gap = max(abs(total - 1.0), comp)
        rep = IdentityReport(
            identity="bisection_normalization",
            params={"N": N, "k": k, "x": x, "y": y},
            lhs=total,
            rhs=1.0,
            abs_gap=gap,
            rel_gap=gap,
            status="PASS" if gap <= 1e-10 else FAIL,
            tol=1e-10,
            notes={"max_complement_gap": comp, "support": [pm.xbar, pm.yhat]},
        )
        resolved.update({"N": N, "k": k, "x": x, "y": y})
        return _report_payload("verify", seed, resolved, rep)

    if ident == "sandwich":
        N = args.N or 6
        x_mid = C.q ** 2 * N ** (1.0 / 3.0)
        params = {
            "N": N,
            "k": args.k if args.k is not None else 1,
            "x1": args.x if args.x is not None else x_mid,
            "x2": args.x2 if args.x2 is not None else (args.x or x_mid),
            "y1": args.y or 0.0,
            "y2": args.y2 if args.y2 is not None else (args.y or 0.0),
            "z": args.z if args.z is not None else 0.0,
        }
        yhat = spatial_index_far(N, max(params["y1"], params["y2"]), C)
        env = _sampled(args.theta, yhat, 2 * N, seed)
        rep = sheetscape.verify_sandwich(env, C, params)
        resolved.update(params)
        return _report_payload("verify", seed, resolved, rep)

    raise UsageError(f"unknown identity {ident!r}")


def _cmd_sheet(args) -> tuple[dict, bool]:
    C = constants(args.theta)
    q = sheetscape.SheetQuery(N=args.N, x=args.x, y=args.y)
    xbar, yhat = sheetscape.sheet_indices(C, q)
    env = _sampled(args.theta, yhat, 2 * args.N, args.seed)
    resolved = {"theta": args.theta, "seed": args.seed, "N": args.N, "x": args.x, "y": args.y}
    payload = _envelope("sheet", args.seed, resolved)
    payload.update({
        "value": sheetscape.sheet_value(env, C, q),
        "raw": sheetscape.sheet_value_raw(env, C, q),
        "indices": {"xbar": xbar, "yhat": yhat},
    })
    return payload, True


def _cmd_landscape(args) -> tuple[dict, bool]:
    C = constants(args.theta)
    q = sheetscape.LandscapeQuery(N=args.N, x=args.x, s=args.s, y=args.y, t=args.t)
    xbar, sch, ybar, tch = sheetscape.landscape_indices(C, q)
    env = _sampled(args.theta, ybar + tch, tch, args.seed)
    resolved = {
        "theta": args.theta, "seed": args.seed, "N": args.N,
        "x": args.x, "s": args.s, "y": args.y, "t": args.t,
    }
    payload = _envelope("landscape", args.seed, resolved)
    payload.update({
        "value": sheetscape.landscape_value(env, C, q),
        "raw": sheetscape.landscape_value_raw(env, C, q),
        "indices": {"xbar": xbar, "scheck": sch, "ybar": ybar, "tcheck": tch},
    })
    return payload, True


def _cmd_curves(args) -> tuple[dict | str, bool]:
    n, cols = args.n, args.N
    depth = args.l or min(n, 3)
    env = _sampled(args.theta, cols, n, args.seed)
    curves = grsk.build_curves(env, n, depth, cols)
    rows = [
        (i, j, curves.log_value(i, j))
        for i in range(1, depth + 1)
        for j in range(i, cols + 1)
    ]
    resolved = {"theta": args.theta, "seed": args.seed, "n": n, "cols": cols, "depth": depth}
    if args.format == "csv":
        lines = ["i,j,log_value"] + [f"{i},{j},{v!r}" for i, j, v in rows]
        return "\n".join(lines) + "\n", True
    payload = _envelope("curves", args.seed, resolved)
    payload["values"] = [[i, j, v] for i, j, v in rows]
    return payload, True


def _cmd_measure(args) -> tuple[dict | str, bool]:
    C = constants(args.theta)
    yhat = spatial_index_far(args.N, args.y, C)
    env = _sampled(args.theta, yhat, 2 * args.N, args.seed)
    pm = sheetscape.path_measure(env, C, args.N, args.k, args.x, args.y)
    if args.format == "csv":
        return pm.to_csv(), True
    resolved = {
        "theta": args.theta, "seed": args.seed, "N": args.N,
        "k": args.k, "x": args.x, "y": args.y,
    }
    payload = _envelope("measure", args.seed, resolved)
    payload["measure"] = pm.to_dict()
    return payload, True


def _cmd_experiment(args) -> tuple[dict, bool]:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {args.config}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}")
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.theta is not None:
        raw["theta"] = args.theta
    if args.kind is not None:
        raw["kind"] = args.kind
    try:
        cfg = experiments.ExperimentConfig(
            theta=float(raw["theta"]),
            sizes=tuple(raw["sizes"]),
            replicates=int(raw["replicates"]),
            seed=int(raw["seed"]),
            kind=str(raw["kind"]),
            params=dict(raw.get("params", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"config schema mismatch: {exc}")
    report = experiments.run_study(cfg)
    payload = _envelope("experiment", cfg.seed, cfg.to_dict())
    payload.update(report)
    return payload, True


_COMMANDS = {
    "sample": _cmd_sample,
    "verify": _cmd_verify,
    "sheet": _cmd_sheet,
    "landscape": _cmd_landscape,
    "curves": _cmd_curves,
    "measure": _cmd_measure,
    "experiment": _cmd_experiment,
}


def _write(payload, fmt: str, out: str | None) -> None:
    if isinstance(payload, str):
        text = payload
    elif fmt == "csv":
        raise UsageError("csv output is only available for per-point tables "
                         "(curves, measure)")
    else:
        text = json.dumps(
            json.loads(experiments.canonical_json(payload)), sort_keys=True, indent=2
        ) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
        payload, ok = _COMMANDS[args.command](args)
        _write(payload, args.format, args.out)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        parser.print_usage(sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
