"""Command-line surface: simulate, learn, evaluate, eeg-preprocess.

Every command is deterministic given its flags and seed.  Exit code 0 means
no errors; warnings go to stderr but do not fail the run.  The benchmark run
directory defaults to $DBCL_RUNS (or ./runs).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import serialize
from .emc import emc_report
from .evaluate import BenchmarkSpec, compare, format_table, run_benchmark
from .primes import DetectionConfig
from .simulate import CoupledShoParams, ShoParams, random_dbcm, sample_dbcm, \
    simulate_coupled_sho, simulate_sho
from .spectral import band_power_series
from .structure import learn_dbcm

import numpy as np


def _cmd_simulate(args: argparse.Namespace) -> int:
    if args.datasets < 1:
        raise ValueError("--datasets must be >= 1")
    params = {}
    if args.params:
        params = json.loads(Path(args.params).read_text())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    ss = np.random.SeedSequence(args.seed)
    children = ss.spawn(args.datasets)
    truth = None
    for i in range(args.datasets):
        child_seed = int(children[i].generate_state(1)[0])
        if args.system == "sho":
            p = ShoParams(steps=args.steps, seed=child_seed, **params)
            data, truth = simulate_sho(p)
        elif args.system == "coupled-sho":
            fixed = dict(params)
            for key in ("mass_mean", "spring_k", "damping_b",
                        "initial_x", "initial_v"):
                if key in fixed:
                    fixed[key] = tuple(fixed[key])
            p = CoupledShoParams(steps=args.steps, seed=child_seed, **fixed)
            data, truth = simulate_coupled_sho(p)
        else:
            rng = np.random.default_rng(child_seed)
            truth = random_dbcm(
                n_static=int(params.get("n_static", 3)),
                chains=tuple(params.get("chains", (2,))),
                edge_density=float(params.get("edge_density", 0.3)),
                seed=rng,
                max_parents=int(params.get("max_parents", 3)),
            )
            data = sample_dbcm(truth, args.steps, rng)
            serialize.write_json(serialize.model_to_dict(truth),
                                 out / f"truth_{i:03d}.json")
        serialize.dataset_to_csv(data, out / f"{args.system}_{i:03d}.csv")
    if args.system != "random" and truth is not None:
        serialize.write_json(serialize.model_to_dict(truth), out / "truth.json")
    print(f"wrote {args.datasets} dataset(s) to {out}")
    return 0


def _cmd_learn(args: argparse.Namespace) -> int:
    data = serialize.dataset_from_csv(args.data)
    cfg = DetectionConfig(k_max=args.k_max, alpha=args.alpha,
                          max_cond_size=args.max_cond)
    g = learn_dbcm(data, cfg)
    for w in g.warnings:
        print(f"warning: {w}", file=sys.stderr)
    emc = emc_report(g).to_dict()
    serialize.write_json(serialize.pattern_to_dict(g, emc=emc), args.out)
    if args.dot:
        Path(args.dot).write_text(serialize.pattern_to_dot(g))
    print(f"wrote pattern to {args.out}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    if bool(args.benchmark) == bool(args.learned):
        raise ValueError("use either --learned/--truth or --benchmark")
    if args.benchmark:
        spec = BenchmarkSpec.from_dict(json.loads(Path(args.benchmark).read_text()))
        root = Path(args.out) if args.out else \
            Path(os.environ.get("DBCL_RUNS", "runs"))
        result = run_benchmark(spec, out_dir=root)
        agg = result.aggregate()
        print(format_table(agg))
        for i, learner, msg in result.failures:
            print(f"warning: dataset {i} learner {learner} failed: {msg}",
                  file=sys.stderr)
        print(f"run artifacts under {root / (spec.system + '-seed' + str(spec.seed))}")
        return 0
    if not args.truth:
        raise ValueError("--learned requires --truth")
    learned = serialize.pattern_from_dict(serialize.read_json(args.learned))
    truth = serialize.model_from_dict(serialize.read_json(args.truth))
    report = compare(learned, truth)
    row = {"learned": {
        "pct_delta_low": report.pct_delta_low,
        "pct_delta_hi": report.pct_delta_hi,
        "pct_e_del": report.pct_e_del,
        "pct_e_add": report.pct_e_add,
        "pct_o_err": report.pct_o_err,
    }}
    print(format_table(row))
    if args.out:
        serialize.write_json(report.to_dict(), args.out)
    return 0


def _cmd_eeg(args: argparse.Namespace) -> int:
    data = serialize.dataset_from_csv(args.data,
                                      sampling_interval=1.0 / args.rate)
    power = band_power_series(data, sample_rate_hz=args.rate,
                              window_seconds=args.window, target_hz=args.freq)
    serialize.dataset_to_csv(power, args.out)
    print(f"wrote band-power series to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbcl",
        description="Learn difference-based causal models from time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate trajectories + ground truth")
    p_sim.add_argument("--system", choices=["sho", "coupled-sho", "random"],
                       default="sho")
    p_sim.add_argument("--steps", type=int, default=5000)
    p_sim.add_argument("--datasets", type=int, default=1)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--params", help="JSON file of simulator parameters")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=_cmd_simulate)

    p_learn = sub.add_parser("learn", help="learn a pattern from trajectory CSVs")
    p_learn.add_argument("--data", nargs="+", required=True)
    p_learn.add_argument("--alpha", type=float, default=0.01)
    p_learn.add_argument("--k-max", type=int, default=3, dest="k_max")
    p_learn.add_argument("--max-cond", type=int, default=3, dest="max_cond")
    p_learn.add_argument("--out", required=True, help="pattern JSON path")
    p_learn.add_argument("--dot", help="also write a DOT rendering")
    p_learn.set_defaults(func=_cmd_learn)

    p_eval = sub.add_parser("evaluate", help="score a pattern or run a benchmark")
    p_eval.add_argument("--learned", help="pattern JSON")
    p_eval.add_argument("--truth", help="ground-truth model JSON")
    p_eval.add_argument("--benchmark", help="benchmark spec JSON")
    p_eval.add_argument("--out", help="report JSON path or benchmark run root")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_eeg = sub.add_parser("eeg-preprocess",
                           help="windowed band power of a raw recording")
    p_eeg.add_argument("--data", required=True)
    p_eeg.add_argument("--rate", type=float, default=256.0)
    p_eeg.add_argument("--window", type=float, default=0.5)
    p_eeg.add_argument("--freq", type=float, default=10.0)
    p_eeg.add_argument("--out", required=True)
    p_eeg.set_defaults(func=_cmd_eeg)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
