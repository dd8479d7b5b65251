#!/usr/bin/env python3
"""Sweep the bundled benchmark datasets and report what a month of
administration costs, with user revocation broken out per event."""

import argparse
import random
import statistics

from rolecrypt.workload import (
    load_marginals,
    monte_carlo,
    synthesize_dataset,
    user_revocation_summary,
)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--days", type=float, default=30.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--profile", default="BF+CC")
    ap.add_argument("--variant", default="ibe", choices=["ibe", "pki"])
    args = ap.parse_args()

    names = sorted(load_marginals())
    print(f"profile={args.profile} variant={args.variant} "
          f"runs={args.runs} days={args.days:g}")
    header = (f"{'dataset':<12} {'users':>5} {'arrivals':>8} {'revokeU':>7} "
              f"{'enc/rev':>9} {'units/rev(med)':>14}")
    print(header)
    print("-" * len(header))
    for name in names:
        ds = synthesize_dataset(name, random.Random(args.seed))
        results = monte_carlo(
            ds, args.runs, variant=args.variant, days=args.days,
            seed=args.seed, workers=args.workers,
        )
        summary = user_revocation_summary(results, profile=args.profile)
        arrivals = statistics.fmean(
            sum(r.arrivals.values()) for r in results
        )
        print(f"{name:<12} {len(ds.users):>5} {arrivals:>8.1f} "
              f"{summary['user_revocations']:>7} "
              f"{summary['mean_enc_per_user_revocation']:>9.1f} "
              f"{summary['median_units_per_user_revocation']:>14.1f}")


if __name__ == "__main__":
    main()
