"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 regime mismatch or no slowdown
root, 3 numerical fault or unresolved Monte Carlo sign.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from . import lyapunov as ly
from . import rng
from .env import EnvironmentSpec, sample_environment
from .errors import (InvalidSpec, NoSlowdownRoot, NumericalFault, RegimeMismatch, TooLarge, Unresolved,
                     WindowTooLarge)
from .exit import exit_prob_closed, exit_prob_linear, survival_exact, trap_quantities
from .parallel import resolve_workers
from .reports import write_report
from .slowdown import DEFAULT_N_GRID, annealed_tail, slowdown_curve, trap_frequency_scan
from .walk import StopSpec, batch_final_positions, run_until

EXIT_OK, EXIT_INPUT, EXIT_REGIME, EXIT_NUMERIC = 0, 1, 2, 3


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _grid(lo, hi, step):
    k = int(round((hi - lo) / step))
    return [round(lo + i * step, 12) for i in range(k + 1)]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", required=True, help="environment spec JSON file")
    common.add_argument("--seed", type=int, default=None, help="master seed (u64); random if omitted")
    common.add_argument("--out", default="rwre-out", help="output directory")
    common.add_argument("--workers", type=int, default=None, help="worker threads (env RWRE_WORKERS)")

    p = argparse.ArgumentParser(prog="rwre", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check a spec file")

    c = sub.add_parser("estimate-gamma", parents=[common], help="top Lyapunov exponent")
    c.add_argument("--n", type=int, default=10_000)
    c.add_argument("--replicas", type=int, default=32)

    c = sub.add_parser("moment-curve", parents=[common], help="F(u) on a grid")
    c.add_argument("--u-min", type=float, default=-1.5)
    c.add_argument("--u-max", type=float, default=1.5)
    c.add_argument("--u-step", type=float, default=0.1)
    c.add_argument("--n", type=int, default=32)
    c.add_argument("--replicas", type=int, default=100_000)
    c.add_argument("--exact", action="store_true", help="exhaustive enumeration instead of Monte Carlo")

    c = sub.add_parser("rate-function", parents=[common], help="Legendre transform of F")
    c.add_argument("--curve", help="moment_curve.json to transform (computed if omitted)")
    c.add_argument("--x-min", type=float, default=-1.0)
    c.add_argument("--x-max", type=float, default=1.0)
    c.add_argument("--x-step", type=float, default=0.01)
    c.add_argument("--n", type=int, default=32)
    c.add_argument("--replicas", type=int, default=100_000)

    c = sub.add_parser("find-s", parents=[common], help="slowdown exponent, F(s) = 0")
    c.add_argument("--side", choices=["auto", "positive", "negative"], default="auto")
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--n", type=int, default=32, help="product length for Monte Carlo evaluation")
    c.add_argument("--replicas", type=int, default=1000)
    c.add_argument("--budget", type=int, default=10**7)
    c.add_argument("--curve", help="cached moment_curve.json; root of its linear interpolant")

    sub.add_parser("classify", parents=[common], help="transience/speed regime")

    c = sub.add_parser("simulate", parents=[common], help="final positions of walkers")
    c.add_argument("--n", type=int, default=1024)
    c.add_argument("--walkers", type=int, default=1000)
    c.add_argument("--mode", choices=["annealed", "quenched"], default="annealed")
    c.add_argument("--trajectory", action="store_true", help="also dump one strided trajectory")

    c = sub.add_parser("exit-prob", parents=[common], help="quenched exit probability, closed vs linear")
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--a", type=int, required=True)
    c.add_argument("--b", type=int, required=True)

    c = sub.add_parser("survival", parents=[common], help="exact survival and trap bounds per environment")
    c.add_argument("--N", type=int, default=50)
    c.add_argument("--M", type=int, default=50)
    c.add_argument("--n", type=int, default=1000)
    c.add_argument("--envs", type=int, default=100)

    c = sub.add_parser("trap-scan", parents=[common], help="trap frequency against n")
    c.add_argument("--n-grid", type=_ints, default=list(DEFAULT_N_GRID))
    c.add_argument("--K", default="auto")
    c.add_argument("--env-samples", type=int, default=2000)

    c = sub.add_parser("slowdown", parents=[common], help="X_n / n^s' quantiles")
    c.add_argument("--s-prime-grid", type=_floats, default=[0.5, 0.9, 1.0])
    c.add_argument("--n-grid", type=_ints, default=list(DEFAULT_N_GRID))
    c.add_argument("--walkers", type=int, default=2000)

    c = sub.add_parser("tail", parents=[common], help="annealed P(X_n > n^s')")
    c.add_argument("--n", type=int, default=2**13)
    c.add_argument("--s-prime", type=float, default=0.9)
    c.add_argument("--walkers", type=int, default=2000)
    return p


def _config(args, spec):
    cfg = {k: v for k, v in vars(args).items() if k not in ("workers", "out")}
    cfg["spec_content"] = spec.to_dict() if spec is not None else None
    return cfg


def _side(args, char):
    if args.side != "auto":
        return args.side
    kind = char.regime.kind
    if kind is ly.RegimeKind.TransientLeftZeroSpeed:
        return "negative"
    if kind is ly.RegimeKind.TransientRightZeroSpeed:
        return "positive"
    raise NoSlowdownRoot(f"regime {kind.value} has no slowdown root")


def _load_curve(path) -> ly.MomentCurve:
    """A moment curve from a ``moment_curve.json`` report or a bare curve dict."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return ly.MomentCurve.from_dict(doc["result"]["curve"] if "result" in doc else doc)


def _cached_curve_evaluator(path):
    curve = _load_curve(path)

    def evaluate(u, replicas=None):
        return ly.Estimate(float(np.interp(u, curve.grid, curve.values)), 0.0)

    evaluate.method = "cached-curve"
    return evaluate


def run(args, spec) -> tuple[int, str, object, list, list]:
    """Execute one command; returns (exit code, summary, result, rows, columns)."""
    seed = args.seed
    workers = args.workers
    cmd = args.command

    if cmd == "validate":
        return EXIT_OK, f"OK: L={spec.L}, {len(spec.atoms)} atoms", {"ok": True, "violations": []}, None, None

    if cmd == "estimate-gamma":
        est = ly.estimate_gamma(spec, args.n, args.replicas, seed, workers=workers)
        res = {"gamma": est.value, "std_error": est.std_error, "n": est.n, "replicas": est.replicas}
        return EXIT_OK, f"gamma_L = {est.value:.6f} +- {est.std_error:.2e}", res, None, None

    if cmd == "moment-curve":
        grid = _grid(args.u_min, args.u_max, args.u_step)
        if args.exact:
            curve = ly.exact_curve(spec, grid, args.n)
        else:
            curve = ly.estimate_F(spec, grid, args.n, args.replicas, seed, workers=workers)
        return (EXIT_OK, f"F(u) on {len(curve.grid)} points ({curve.method})", {"curve": curve.to_dict()},
                list(curve.rows()), ["u", "F_hat", "std_err", "method"])

    if cmd == "rate-function":
        if args.curve:
            curve = _load_curve(args.curve)
        else:
            curve = ly.estimate_F(spec, ly.DEFAULT_U_GRID, args.n, args.replicas, seed, workers=workers)
        xs = _grid(args.x_min, args.x_max, args.x_step)
        rate = ly.legendre_rate(curve, xs, on_boundary="drop")
        dropped = len(xs) - len(rate.x)
        res = {"curve": curve.to_dict(), "dropped_at_grid_edge": dropped}
        return (EXIT_OK, f"I(x) at {len(rate.x)} points ({dropped} dropped at grid edge)", res,
                list(rate.rows()), ["x", "I", "argmax_u"])

    if cmd == "find-s":
        char = ly.characterize(spec, seed, workers=workers)
        side = _side(args, char)
        if args.curve:
            ev = _cached_curve_evaluator(args.curve)
        else:
            ev = ly.slowdown_evaluator(spec, seed, n=args.n, workers=workers)
        root = ly.find_root_s(ev, side, gamma=char.gamma, tol=args.tol, replicas=args.replicas,
                              budget=args.budget)
        res = {"root": root.as_dict(), "characterization": char.as_dict()}
        return EXIT_OK, f"s = {root.s:.6f}", res, None, None

    if cmd == "classify":
        char = ly.characterize(spec, seed, workers=workers)
        return EXIT_OK, f"{char.regime.kind.value}", char.as_dict(), None, None

    if cmd == "simulate":
        res = batch_final_positions(spec, args.n, args.walkers, seed, mode=args.mode, workers=workers)
        out = {"mean_final": float(np.mean(res.final)), "median_final": float(np.median(res.final))}
        if args.trajectory:
            env = sample_environment(spec, (-spec.L * args.n - 1, args.n + 1), rng.derive_seed(seed, rng.ENV))
            traj = run_until(env, 0, StopSpec(cap=args.n, interval=(-spec.L * args.n - 1, args.n + 1)), seed)
            write_report(args.out, "trajectory", _config(args, spec), {"steps": traj.steps, "final": traj.final},
                         list(traj.rows()), ["step", "position"])
        return (EXIT_OK, f"median X_n = {out['median_final']:g} over {args.walkers} walkers", out,
                list(res.rows()), ["walker", "final_position", "steps", "stop_reason"])

    if cmd == "exit-prob":
        lo = args.a - spec.L
        env = sample_environment(spec, (lo, args.b), seed)
        closed = exit_prob_closed(env, args.k, args.a, args.b)
        linear = exit_prob_linear(env, args.k, args.a, args.b)
        res = {"minus_closed": closed, "minus_linear": linear, "plus_closed": 1.0 - closed,
               "plus_linear": exit_prob_linear(env, args.k, args.a, args.b, "plus"),
               "discrepancy": abs(closed - linear)}
        return EXIT_OK, f"P(minus) closed={closed:.12g} linear={linear:.12g}", res, None, None

    if cmd == "survival":
        rows = []
        for i in range(args.envs):
            env = sample_environment(spec, (-args.N - spec.L, args.M + 1), rng.derive_seed(seed, i))
            tq = trap_quantities(env, args.N, args.M)
            surv = survival_exact(env, (-args.N, args.M), args.n)
            rows.append({"env_id": i, **tq.as_dict(), "survival_n": surv,
                         "survival_bound": (1.0 - tq.gamma_U) ** args.n})
        held = sum(r["survival_n"] >= r["survival_bound"] for r in rows)
        cols = ["env_id", "M", "N", "R_plus", "R_minus", "gamma_U", "bound6", "bound7", "survival_n",
                "survival_bound"]
        return EXIT_OK, f"survival bound held on {held}/{len(rows)} environments", {"bound_held": held}, rows, cols

    if cmd == "trap-scan":
        K = args.K if args.K == "auto" else float(args.K)
        rep = trap_frequency_scan(spec, args.n_grid, K, args.env_samples, seed, workers=workers)
        flag = f" FLAGGED {rep.flags}" if rep.flags else ""
        slope = "n/a" if rep.slope is None else f"{rep.slope:.3f}"
        return (EXIT_OK, f"slope = {slope}, target {rep.target_band}{flag}", rep.to_dict(), list(rep.rows()),
                ["n", "s_prime", "statistic", "value", "std_err"])

    if cmd == "slowdown":
        rep = slowdown_curve(spec, args.s_prime_grid, args.n_grid, args.walkers, seed, workers=workers)
        last = rep.n_grid[-1]
        meds = ", ".join(f"s'={sp:g}: {rep.median[(last, sp)]:.4g}" for sp in rep.s_prime_grid)
        return (EXIT_OK, f"median at n={last}: {meds}", rep.to_dict(), list(rep.rows()),
                ["n", "s_prime", "statistic", "value", "std_err"])

    if cmd == "tail":
        est = annealed_tail(spec, args.n, args.s_prime, args.walkers, seed, workers=workers)
        return EXIT_OK, f"P(X_n > n^s') = {est.p:.4g} +- {est.std_err:.2g}", est.as_dict(), None, None

    raise ValueError(cmd)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = secrets.randbits(63)
    args.workers = resolve_workers(args.workers)
    t0 = time.time()
    spec = None
    try:
        spec = EnvironmentSpec.load(args.spec)
        code, summary, result, rows, cols = run(args, spec)
    except InvalidSpec as exc:
        codes = [v.code for v in exc.violations]
        print(f"INVALID: {', '.join(codes)}")
        for v in exc.violations:
            print(f"  {v.code}: {v.message}")
        if args.command == "validate":
            result = {"ok": False, "violations": [{"code": v.code, "message": v.message}
                                                  for v in exc.violations]}
            write_report(args.out, "validate", _config(args, None), result)
        return EXIT_INPUT
    except (OSError, ValueError, TooLarge, WindowTooLarge) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NoSlowdownRoot, RegimeMismatch) as exc:
        print(f"{type(exc).__name__}: {exc}")
        return EXIT_REGIME
    except (NumericalFault, Unresolved) as exc:
        print(f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERIC
    stem = args.command.replace("-", "_")
    timing = {"wall_clock_seconds": time.time() - t0, "workers": args.workers}
    write_report(args.out, stem, _config(args, spec), result, rows, cols, timing=timing)
    print(summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
