"""Command-line front end.

Subcommands: bound, truncate, solve, tail, simulate, reproduce.  Outputs
are UTF-8 CSV/JSON; every command is deterministic given its flags and
seed, so rerunning overwrites byte-identical files.

Exit codes: 0 success, 1 usage or config error, 2 the weights fail to
certify ergodicity, 3 truncation planning cannot reach the tolerance,
4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import bounds as bd
from . import model as md
from . import simulate as sim
from . import solver as sv
from .errors import (
    BdpzError,
    MassDrift,
    ModelConfigError,
    NoConvergence,
    NotAchievable,
    NotErgodicWithTheseWeights,
    StepTooLarge,
    WeightConfigError,
)

PAPER_CONSTANTS = {
    "ex1": {"beta": 13.0 / 28.0, "beta_star": 1.0 / 3.0, "theorem2": 2e-8},
    "ex2": {"beta": 0.09375, "beta_star": 0.09375, "theorem2": 1e-7},
}


class UsageError(BdpzError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_source(value: str, builtins, loader, what: str):
    if value in builtins:
        return loader(value)
    if os.path.exists(value):
        with open(value, "r", encoding="utf-8") as fh:
            return loader(fh.read())
    raise UsageError(f"{what} {value!r} is neither a built-in name nor a file")


def _model(args) -> md.RateModel:
    return _read_source(args.model, md.BUILTIN_MODELS, md.load_model, "model")


def _weights(value: str) -> bd.WeightSequence:
    return _read_source(value, bd.BUILTIN_WEIGHTS, bd.load_weights, "weights")


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from None


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated number list, got {text!r}") from None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_bound(args) -> int:
    m = _model(args)
    w = _weights(args.weights)
    env = bd.fit_envelope(m, w, strategy=args.strategy, period=args.period)
    out = _outdir(args)

    _write_json(os.path.join(out, "envelope.json"), {
        "M": env.M, "beta": env.beta,
        "strategy": args.strategy, "period": args.period,
        "model": m.name or args.model, "weights": w.digest(),
    })

    ts = np.linspace(0.0, args.t_end, args.t_points)
    p0 = sv.ProbabilitySnapshot.delta(args.p0_state)
    q0 = sv.ProbabilitySnapshot.delta(args.q0_state)
    with open(os.path.join(out, "theorem1.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,bound\n")
        for t in ts:
            rep = bd.theorem1_bound(w, env, p0, q0, float(t))
            fh.write(f"{_fmt(float(t))},{_fmt(rep.value)}\n")

    n_list = _parse_int_list(args.n_list)
    with open(os.path.join(out, "tails.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,N,left,right,two_sided\n")
        for t in ts:
            for n in n_list:
                left = bd.tail_bound(m, w, env, p0, n, float(t), side="left").value
                right = bd.tail_bound(m, w, env, p0, n, float(t), side="right").value
                both = bd.tail_bound(m, w, env, p0, n, float(t), side="both").value
                fh.write(f"{_fmt(float(t))},{n},{_fmt(left)},{_fmt(right)},{_fmt(both)}\n")

    print(f"envelope: M={_fmt(env.M)} beta={_fmt(env.beta)}")
    return 0


def cmd_truncate(args) -> int:
    m = _model(args)
    w = _weights(args.weights)
    w_star = _weights(args.weights_star)
    env = bd.fit_envelope(m, w, strategy=args.strategy, period=args.period)
    env_star = bd.fit_envelope(m, w_star, strategy=args.strategy, period=args.period)

    if args.n1 is not None and args.n2 is not None:
        window = (args.n1, args.n2)
        planned = False
    else:
        window = bd.plan_truncation(m, w, w_star, env, env_star, args.eps)
        planned = True

    weighted, full = bd.theorem2_values(m, w, w_star, env, env_star, *window)
    report = bd.theorem2_bound(m, w, w_star, env, env_star, *window)
    w_const = bd.w_constant(w)
    mean_rep = bd.mean_error_bound(weighted, w_const)

    out = _outdir(args)
    _write_json(os.path.join(out, "truncation.json"), {
        "model": m.name or args.model,
        "eps": args.eps,
        "planned": planned,
        "N1": window[0], "N2": window[1],
        "envelope": {"M": env.M, "beta": env.beta},
        "envelope_star": {"M": env_star.M, "beta": env_star.beta},
        "theorem2": report.to_json(),
        "W": w_const,
        "mean_error": mean_rep.to_json(),
    })
    print(f"window: [{window[0]}, {window[1]}] theorem2={report.value_str}")
    return 0


def _solve_window(args) -> tuple[int, int]:
    if args.n1 is not None and args.n2 is not None:
        return (args.n1, args.n2)
    if args.truncation:
        with open(args.truncation, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return (int(doc["N1"]), int(doc["N2"]))
    raise UsageError("provide --n1/--n2 or --truncation <truncation.json>")


def cmd_solve(args) -> int:
    m = _model(args)
    window = _solve_window(args)
    p0 = sv.ProbabilitySnapshot.delta(args.p0_state)
    output_every = args.output_every if args.output_every else args.t_end / 100.0
    traj = sv.integrate(m, window, p0, args.t_end, dt=args.dt, output_every=output_every)
    out = _outdir(args)
    sv.write_trajectory_csv(traj, os.path.join(out, "trajectory.csv"))
    sv.write_moments_csv(traj, os.path.join(out, "moments.csv"))
    mean, var = sv.moments(traj.snapshots[-1])
    print(f"solved to t={_fmt(args.t_end)}: mean={_fmt(mean)} variance={_fmt(var)}")
    return 0


def cmd_tail(args) -> int:
    m = _model(args)
    w = _weights(args.weights)
    env = bd.fit_envelope(m, w, strategy=args.strategy, period=args.period)
    p0 = sv.ProbabilitySnapshot.delta(args.p0_state)
    ts = _parse_float_list(args.t_list)
    n_list = _parse_int_list(args.n_list)
    out = _outdir(args)
    with open(os.path.join(out, "tails.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,N,left,right,two_sided\n")
        for t in ts:
            for n in n_list:
                left = bd.tail_bound(m, w, env, p0, n, t, side="left").value
                right = bd.tail_bound(m, w, env, p0, n, t, side="right").value
                both = bd.tail_bound(m, w, env, p0, n, t, side="both").value
                fh.write(f"{_fmt(t)},{n},{_fmt(left)},{_fmt(right)},{_fmt(both)}\n")
    print(f"tail bounds written for N in {n_list}, t in {ts}")
    return 0


def cmd_simulate(args) -> int:
    m = _model(args)
    emp = sim.empirical_distribution(m, args.x0, args.t, args.n_paths, args.seed)
    out = _outdir(args)
    sim.write_histogram_csv(emp, os.path.join(out, "histogram.csv"))
    mean, var = sv.moments(emp.snapshot)
    print(f"simulated {args.n_paths} paths to t={_fmt(args.t)}: "
          f"mean={_fmt(mean)} variance={_fmt(var)}")
    return 0


REPRODUCE_STAGES = (
    "bound: fit exponential envelopes (M, beta) and (M*, beta*)",
    "truncate: evaluate the truncation bound at the paper window and plan for eps",
    "solve: detect the limiting periodic regime on the truncated window",
    "simulate: Monte-Carlo cross-check against the solved transient distribution",
    "write: figure-data CSVs and summary.json",
)


def cmd_reproduce(args) -> int:
    name = args.name
    if name not in md.BUILTIN_MODELS:
        raise UsageError(f"unknown example {name!r}; choose ex1 or ex2")
    if args.dry_run:
        for stage in REPRODUCE_STAGES:
            print(stage)
        return 0

    paper = PAPER_CONSTANTS[name]
    m = md.BUILTIN_MODELS[name]()
    w = bd.BUILTIN_WEIGHTS[name]()
    w_star = bd.BUILTIN_WEIGHTS[name + "-star"]()
    out = _outdir(args)

    # bound
    env = bd.fit_envelope(m, w)
    env_star = bd.fit_envelope(m, w_star)
    _write_json(os.path.join(out, "envelope.json"), {
        "M": env.M, "beta": env.beta,
        "M_star": env_star.M, "beta_star": env_star.beta,
        "model": name, "weights": w.digest(), "weights_star": w_star.digest(),
    })

    # truncate
    window = (-args.window, args.window)
    weighted, _full = bd.theorem2_values(m, w, w_star, env, env_star, *window)
    report = bd.theorem2_bound(m, w, w_star, env, env_star, *window)
    planned = bd.plan_truncation(m, w, w_star, env, env_star, args.eps)
    w_const = bd.w_constant(w)
    mean_rep = bd.mean_error_bound(weighted, w_const)
    _write_json(os.path.join(out, "truncation.json"), {
        "model": name, "eps": args.eps, "planned": True,
        "N1": window[0], "N2": window[1],
        "planned_N1": planned[0], "planned_N2": planned[1],
        "envelope": {"M": env.M, "beta": env.beta},
        "envelope_star": {"M": env_star.M, "beta": env_star.beta},
        "theorem2": report.to_json(),
        "W": w_const,
        "mean_error": mean_rep.to_json(),
    })

    # solve: limiting cycle, plus one extra period to measure period drift
    p0 = sv.ProbabilitySnapshot.delta(0)
    cyc = sv.limiting_cycle(m, window, p0, period=1.0, tol=args.tol,
                            max_periods=args.max_periods)
    after = sv.integrate(m, window, cyc.snapshots[-1],
                         cyc.snapshots[-1].time + 1.0, output_every=0.01)
    variance_drift = float(np.abs(after.variances - cyc.variances).max())
    sv.write_trajectory_csv(cyc, os.path.join(out, "cycle_trajectory.csv"))
    sv.write_moments_csv(cyc, os.path.join(out, "cycle_moments.csv"))
    probe_states = (-5, -2, 0, 2, 5)
    with open(os.path.join(out, "probabilities.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(f"p_{k}" for k in probe_states) + "\n")
        for s in cyc.snapshots:
            row = ",".join(_fmt(s.prob(k)) for k in probe_states)
            fh.write(f"{_fmt(s.time)},{row}\n")

    # simulate cross-check at a transient time
    t_sim = args.t_sim
    ref = sv.integrate(m, window, p0, t_sim).snapshots[-1]
    emp = sim.empirical_distribution(m, 0, t_sim, args.n_paths, args.seed)
    sim.write_histogram_csv(emp, os.path.join(out, "histogram.csv"))
    l1 = emp.snapshot.l1_distance(ref)
    sim_budget = 3.0 * emp.total_stderr()

    means = cyc.means
    variances = cyc.variances
    checks = {
        "beta_matches_paper": abs(env.beta - paper["beta"]) <= 1e-9,
        "M_is_one": env.M == 1.0,
        "beta_star_at_least_paper": env_star.beta >= paper["beta_star"] - 1e-9,
        "theorem2_at_most_1e-6": report.value <= 1e-6,
        "planned_window_at_most_paper": planned[1] <= args.window,
        "cycle_detected_by_t150": cyc.snapshots[-1].time <= 150.0,
        "mean_fluctuates_around_zero": bool(np.max(np.abs(means)) <= 0.5) if name == "ex1" else True,
        "variance_finite": bool(np.all(np.isfinite(variances))),
        "variance_period_stable": variance_drift < 1e-6 if name == "ex1" else True,
        "simulation_within_3_sigma": l1 <= sim_budget,
    }
    summary = {
        "example": name,
        "envelope": {"M": env.M, "beta": env.beta, "paper_beta": paper["beta"]},
        "envelope_star": {"M": env_star.M, "beta": env_star.beta,
                          "paper_beta_star": paper["beta_star"]},
        "window": list(window),
        "planned_window": list(planned),
        "eps": args.eps,
        "theorem2": {"value": report.value_str,
                     "weighted": report.inputs_digest["weighted_value"],
                     "paper_value": paper["theorem2"]},
        "W": w_const,
        "mean_error": mean_rep.to_json(),
        "cycle": {
            "period": 1.0, "tol": args.tol,
            "start": cyc.snapshots[0].time,
            "distance": cyc.cycle_distance,
            "mean_min": float(means.min()), "mean_max": float(means.max()),
            "variance_min": float(variances.min()), "variance_max": float(variances.max()),
            "variance_drift": variance_drift,
        },
        "simulation": {"t": t_sim, "n_paths": args.n_paths, "seed": args.seed,
                       "l1_distance": l1, "stderr_budget": sim_budget},
        "checks": checks,
    }
    _write_json(os.path.join(out, "summary.json"), summary)
    ok = all(checks.values())
    print(f"reproduce {name}: beta={_fmt(env.beta)} theorem2={report.value_str} "
          f"cycle_t={_fmt(cyc.snapshots[0].time)} checks={'PASS' if ok else 'FAIL'}")
    return 0 if ok else 4


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bdpz", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, weights=False, star=False):
        p.add_argument("--model", required=True, help="built-in name (ex1, ex2) or JSON file")
        if weights:
            p.add_argument("--weights", required=True,
                           help="weight JSON file or built-in name (ex1, ex1-star, ...)")
        if star:
            p.add_argument("--weights-star", required=True, dest="weights_star",
                           help="weight sequence for the truncated process")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--strategy", default="pointwise",
                       choices=("pointwise", "period-average"))
        p.add_argument("--period", type=float, default=1.0)

    p = sub.add_parser("bound", help="envelope, contraction and tail bounds")
    common(p, weights=True)
    p.add_argument("--t-end", type=float, default=20.0, dest="t_end")
    p.add_argument("--t-points", type=int, default=201, dest="t_points")
    p.add_argument("--n-list", default="5,10,20", dest="n_list")
    p.add_argument("--p0-state", type=int, default=0, dest="p0_state")
    p.add_argument("--q0-state", type=int, default=1, dest="q0_state")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("truncate", help="plan a window and bound the truncation error")
    common(p, weights=True, star=True)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--n1", type=int, default=None)
    p.add_argument("--n2", type=int, default=None)
    p.set_defaults(func=cmd_truncate)

    p = sub.add_parser("solve", help="integrate the truncated forward equations")
    common(p)
    p.add_argument("--n1", type=int, default=None)
    p.add_argument("--n2", type=int, default=None)
    p.add_argument("--truncation", default=None, help="truncation.json to take the window from")
    p.add_argument("--t-end", type=float, required=True, dest="t_end")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--output-every", type=float, default=None, dest="output_every")
    p.add_argument("--p0-state", type=int, default=0, dest="p0_state")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("tail", help="concentration bounds at given times")
    common(p, weights=True)
    p.add_argument("--t-list", default="1,5,10", dest="t_list")
    p.add_argument("--n-list", default="5,10,20", dest="n_list")
    p.add_argument("--p0-state", type=int, default=0, dest="p0_state")
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("simulate", help="Monte-Carlo histogram of X(t)")
    common(p)
    p.add_argument("--x0", type=int, default=0)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--n-paths", type=int, default=100000, dest="n_paths")
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", help="run an example end to end")
    p.add_argument("name", help="ex1 or ex2")
    p.add_argument("--out", default=".")
    p.add_argument("--dry-run", action="store_true", dest="dry_run")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--window", type=int, default=150)
    p.add_argument("--max-periods", type=int, default=150, dest="max_periods")
    p.add_argument("--t-sim", type=float, default=5.0, dest="t_sim")
    p.add_argument("--n-paths", type=int, default=100000, dest="n_paths")
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ModelConfigError, WeightConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NotErgodicWithTheseWeights as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NotAchievable as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (StepTooLarge, MassDrift, NoConvergence) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
