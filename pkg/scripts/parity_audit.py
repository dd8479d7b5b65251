#!/usr/bin/env python3
"""Side-by-side primitive counts for the identity-based and certificate-based
variants over the same random traces.  The two columns must agree after
renaming; any difference is printed and the script exits nonzero."""

import argparse
import random
import sys
from collections import Counter

from rolecrypt.crypto import IBE_TO_PKI
from rolecrypt.engine import Engine, measure_label
from rolecrypt.equivalence import random_trace


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--traces", type=int, default=200)
    ap.add_argument("--labels", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    ibe_by_kind: dict[str, Counter] = {}
    pki_by_kind: dict[str, Counter] = {}
    mismatches = 0
    n_labels = 0
    for _ in range(args.traces):
        trace = random_trace(rng, args.labels)
        a, b = Engine("ibe"), Engine("pki")
        for lbl in trace:
            ma = measure_label(a, lbl)
            mb = measure_label(b, lbl)
            n_labels += 1
            if ma.renamed(IBE_TO_PKI) != mb:
                mismatches += 1
                print(f"mismatch on {lbl}: ibe={ma.totals()} pki={mb.totals()}")
            ibe_by_kind.setdefault(lbl.kind, Counter()).update(ma.totals())
            pki_by_kind.setdefault(lbl.kind, Counter()).update(mb.totals())

    ops = sorted({op for c in ibe_by_kind.values() for op in c})
    print(f"{n_labels} labels over {args.traces} traces\n")
    print(f"{'kind':<9} " + " ".join(f"{op:>11}" for op in ops))
    for kind in sorted(ibe_by_kind):
        row = ibe_by_kind[kind]
        print(f"{kind:<9} " + " ".join(f"{row.get(op, 0):>11}" for op in ops))
        twin = Counter(
            {IBE_TO_PKI.get(op, op): n for op, n in row.items()}
        )
        if twin != pki_by_kind[kind]:
            print(f"  !! certificate-based totals differ: {pki_by_kind[kind]}")

    if mismatches:
        print(f"\n{mismatches} per-label mismatches")
        return 1
    print("\nper-label parity holds")
    return 0


if __name__ == "__main__":
    sys.exit(main())
