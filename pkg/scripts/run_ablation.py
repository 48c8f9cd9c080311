#!/usr/bin/env python3
"""Critic-kind ablation on the rotated two-moons pair.

Trains every (critic kind, seed) cell of the benchmark grid and prints
per-seed metrics plus the per-kind medians the headline comparison uses.
The full protocol takes a few minutes on a laptop CPU; --quick shrinks it
to a smoke-test sized grid that finishes in seconds.
"""

import argparse
import json
import sys
import time

from jwass.benchmark import BenchmarkConfig, run_rotation_benchmark


def parse_args(argv):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kinds", default="none,marginal,class_dependent",
                    help="comma-separated critic kinds to compare")
    ap.add_argument("--seeds", default="0,1,2,3,4",
                    help="comma-separated training seeds")
    ap.add_argument("--n-per-domain", type=int, default=2000)
    ap.add_argument("--rotation-deg", type=float, default=35.0)
    ap.add_argument("--noise-sd", type=float, default=0.24)
    ap.add_argument("--labeled-fraction", type=float, default=0.1)
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--w-critic", type=float, default=0.1)
    ap.add_argument("--quick", action="store_true",
                    help="tiny grid for a fast smoke run")
    ap.add_argument("--out", default=None,
                    help="optional path for the JSON summary")
    return ap.parse_args(argv)


def build_config(args):
    kw = dict(kinds=tuple(args.kinds.split(",")),
              seeds=tuple(int(s) for s in args.seeds.split(",")),
              n_per_domain=args.n_per_domain,
              rotation_deg=args.rotation_deg,
              noise_sd=args.noise_sd,
              labeled_fraction=args.labeled_fraction,
              epochs=args.epochs,
              w_critic=args.w_critic)
    if args.quick:
        kw.update(seeds=(0, 1), n_per_domain=200, epochs=3,
                  eval_max_points=100)
    return BenchmarkConfig(**kw)


def main(argv=None):
    args = parse_args(argv if argv is not None else sys.argv[1:])
    config = build_config(args)
    t0 = time.perf_counter()
    result = run_rotation_benchmark(config)
    elapsed = time.perf_counter() - t0

    print(f"{'kind':<18}{'seed':>6}{'W dist':>10}{'acc P':>8}"
          f"{'acc Q':>8}{'min':>8}")
    for kind in config.kinds:
        for o in result.of_kind(kind):
            m = o.metrics
            print(f"{kind:<18}{o.seed:>6}{m.w_dist:>10.4f}{m.acc_P:>8.4f}"
                  f"{m.acc_Q:>8.4f}{m.acc_min:>8.4f}")
    print()
    print(f"{'kind':<18}{'med W':>10}{'med min acc':>13}{'med avg acc':>13}")
    for kind in config.kinds:
        print(f"{kind:<18}{result.median_w(kind):>10.4f}"
              f"{result.median_min_acc(kind):>13.4f}"
              f"{result.median_avg_acc(kind):>13.4f}")
    print(f"\n{len(result.outcomes)} cells in {elapsed:.1f}s")

    if args.out:
        result.to_json(args.out)
        print(f"summary -> {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
