"""Command-line front end.

Subcommands:

* ``cost-table``  — closed-form per-operation costs in multiplication units.
* ``check``       — randomized differential checking of an engine against the
  reference model (exit 1 on divergence, with a minimized failing trace).
* ``gen-dataset`` — synthesize a benchmark-shaped dataset to a JSON file.
* ``simulate``    — monte-carlo administrative workload on a live engine,
  writing runs.csv / summary.csv (and optionally events.csv).
"""

from __future__ import annotations

import argparse
import os
import random
import sys
from pathlib import Path

from .costmodel import (
    HEADLINE_PROFILES,
    all_scheme_pairs,
    format_units,
    scheme_profile,
    static_cost_table,
)
from .equivalence import TraceBuilder, minimize_counterexample, run_differential
from .workload import (
    derive_seed,
    load_dataset,
    load_marginals,
    monte_carlo,
    save_dataset,
    synthesize_dataset,
    user_revocation_summary,
    write_events_csv,
    write_runs_csv,
    write_summary_csv,
)


def _parse_profiles(spec: str) -> tuple[str, ...]:
    if spec == "all":
        return tuple(all_scheme_pairs())
    profiles = tuple(p.strip() for p in spec.split(",") if p.strip())
    for p in profiles:
        scheme_profile(p)  # raises KeyError on unknown names
    return profiles


def cmd_cost_table(args: argparse.Namespace) -> int:
    profiles = _parse_profiles(args.profiles)
    rows = static_cost_table(profiles)
    widths = [8, 9] + [max(len(p), 7) for p in profiles]
    header = ["party", "op"] + list(profiles)
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for party, op, cells in rows:
        cols = [party, op] + [format_units(cells[p]) for p in profiles]
        print("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    variants = ("ibe", "pki") if args.variant == "both" else (args.variant,)
    rng = random.Random(args.seed)
    failures = 0
    for i in range(args.traces):
        trace_rng = random.Random(derive_seed(args.seed, i))
        labels = TraceBuilder(trace_rng).build(args.labels)
        for variant in variants:
            rep = run_differential(
                labels,
                binding=variant,
                check_costs=args.costs,
                step_congruence=args.step_congruence,
            )
            if not rep.ok:
                failures += 1
                print(f"trace {i} [{variant}] DIVERGED: {rep.detail}")
                minimal = minimize_counterexample(
                    labels,
                    binding=variant,
                    check_costs=args.costs,
                    step_congruence=args.step_congruence,
                )
                print(f"  minimized to {len(minimal)} labels:")
                for lbl in minimal:
                    print(f"    {lbl}")
                break
        if failures:
            break
    checked = (i + 1) if args.traces else 0
    if failures:
        print(f"FAIL after {checked} trace(s)")
        return 1
    print(
        f"ok: {args.traces} traces x {len(variants)} variant(s), "
        f"up to {args.labels} labels each"
        + (", costs reconciled" if args.costs else "")
    )
    return 0


def _resolve_dataset(args: argparse.Namespace):
    name = args.dataset
    if os.path.exists(name):
        return load_dataset(name)
    marginals = load_marginals()
    if name in marginals:
        rng = random.Random(derive_seed(args.seed, -1))
        return synthesize_dataset(name, rng, marginals)
    known = ", ".join(sorted(marginals))
    raise SystemExit(
        f"error: {name!r} is neither a file nor a known dataset ({known})"
    )


def cmd_gen_dataset(args: argparse.Namespace) -> int:
    marginals = load_marginals()
    if args.name not in marginals:
        known = ", ".join(sorted(marginals))
        raise SystemExit(f"error: unknown dataset {args.name!r} (known: {known})")
    rng = random.Random(derive_seed(args.seed, -1))
    ds = synthesize_dataset(args.name, rng, marginals)
    out = args.out or f"{args.name}.json"
    save_dataset(ds, out)
    print(f"wrote {out}: {ds.marginals()}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    profiles = _parse_profiles(args.profiles)
    dataset = _resolve_dataset(args)
    variants = ("ibe", "pki") if args.variant == "both" else (args.variant,)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for variant in variants:
        results += monte_carlo(
            dataset,
            runs=args.runs,
            variant=variant,
            days=args.duration_days,
            seed=args.seed,
            workers=args.parallel,
            check_costs=args.check_costs,
            record_events=args.events,
            revocation_window=args.revocation_window,
        )
    runs_path = out_dir / "runs.csv"
    summary_path = out_dir / "summary.csv"
    write_runs_csv(str(runs_path), results, profiles)
    write_summary_csv(str(summary_path), results, profiles)
    written = [runs_path, summary_path]
    if args.events:
        events_path = out_dir / "events.csv"
        write_events_csv(str(events_path), results)
        written.append(events_path)
    for variant in variants:
        sub = [r for r in results if r.variant == variant]
        summ = user_revocation_summary(sub, profiles[0])
        print(
            f"{dataset.name} [{variant}]: {len(sub)} runs, "
            f"{summ['user_revocations']} user revocations, "
            f"mean {summ['mean_enc_per_user_revocation']:.1f} enc/revocation, "
            f"median {summ['median_units_per_user_revocation']:.1f} "
            f"{profiles[0]} units/revocation"
        )
    for p in written:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rolecrypt",
        description="cryptographically enforced role-based access control: "
        "differential checking and cost experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cost-table", help="closed-form per-operation costs")
    p.add_argument(
        "--profiles",
        default=",".join(HEADLINE_PROFILES),
        help="comma-separated scheme pairs, or 'all'",
    )
    p.set_defaults(fn=cmd_cost_table)

    p = sub.add_parser("check", help="differential check against the model")
    p.add_argument("--traces", type=int, default=50)
    p.add_argument("--labels", type=int, default=40, help="labels per trace")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--variant", choices=("ibe", "pki", "both"), default="both"
    )
    p.add_argument(
        "--no-costs", dest="costs", action="store_false",
        help="skip per-label cost reconciliation",
    )
    p.add_argument(
        "--step-congruence", action="store_true",
        help="also check congruence after every label (slower)",
    )
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("gen-dataset", help="synthesize a dataset to JSON")
    p.add_argument("--name", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_gen_dataset)

    p = sub.add_parser("simulate", help="monte-carlo workload simulation")
    p.add_argument(
        "--dataset", required=True,
        help="bundled dataset name (synthesized) or path to a dataset JSON",
    )
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--variant", choices=("ibe", "pki", "both"), default="ibe"
    )
    p.add_argument("--duration-days", type=float, default=30.0)
    p.add_argument(
        "--profiles", default=",".join(HEADLINE_PROFILES),
        help="comma-separated scheme pairs, or 'all'",
    )
    p.add_argument(
        "--out", default=os.environ.get("ROLECRYPT_OUT_DIR", "."),
        help="output directory (default: $ROLECRYPT_OUT_DIR or .)",
    )
    p.add_argument("--parallel", type=int, default=1, help="worker processes")
    p.add_argument(
        "--revocation-window", type=float, default=None,
        help="report max revocations per tumbling window of this many days",
    )
    p.add_argument(
        "--events", action="store_true", help="also write per-event CSV"
    )
    p.add_argument(
        "--check-costs", action="store_true",
        help="reconcile measured counters against the closed form per event",
    )
    p.set_defaults(fn=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except KeyError as e:
        print(f"error: unknown scheme profile {e}", file=sys.stderr)
        return 2
    except AssertionError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
