#!/usr/bin/env python3
"""Fuzz both enforcement variants against the authorization model.

Exits nonzero on the first divergence, after shrinking the trace to a local
minimum and printing it."""

import argparse
import random
import sys
import time

from rolecrypt.equivalence import (
    minimize_counterexample,
    random_trace,
    run_differential,
)


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--traces", type=int, default=500)
    ap.add_argument("--labels", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--no-costs", action="store_true",
                    help="skip per-label cost reconciliation")
    ap.add_argument("--step-congruence", action="store_true",
                    help="canonicalize after every label, not just at the end")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    t0 = time.monotonic()
    n_labels = 0
    for i in range(args.traces):
        trace = random_trace(rng, rng.randint(1, args.labels))
        n_labels += 2 * len(trace)
        for binding in ("ibe", "pki"):
            rep = run_differential(
                trace, binding,
                check_costs=not args.no_costs,
                step_congruence=args.step_congruence,
            )
            if not rep.ok:
                print(f"divergence in trace {i} [{binding}]: "
                      f"{rep.failure_kind} at step {rep.failure_index}")
                print(f"  {rep.detail}")
                small = minimize_counterexample(
                    trace, binding,
                    check_costs=not args.no_costs,
                    step_congruence=args.step_congruence,
                )
                print(f"minimized to {len(small)} labels:")
                for lbl in small:
                    print(f"  {lbl}")
                return 1
        if (i + 1) % 100 == 0:
            rate = n_labels / (time.monotonic() - t0)
            print(f"  {i + 1}/{args.traces} traces ok ({rate:.0f} labels/s)")

    dt = time.monotonic() - t0
    print(f"ok: {args.traces} traces, {n_labels} label applications, "
          f"no divergence in {dt:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
