"""Workload-driven cost experiments.

A simulation starts from a realistic access-control state, runs an
administrator actor for a simulated month, and records the cryptographic
primitives each administrative action costs on a live enforcement engine.
The actor is a continuous-time Markov process: events arrive at rate
``0.1 * sqrt(|U|)`` per day and are split among user/permission assignment
and revocation by an add bias sampled from [0.7, 1.0] and a user-role bias
sampled from [0.3, 0.7], fresh per run.  Only the four assignment/revocation
actions occur; populations of users, roles, and files stay fixed within a
run.  An arrival with no eligible target (nothing left to revoke, or every
pair already assigned) is recorded as skipped.

Start states are synthesized from bundled aggregate statistics of six
published role-mining datasets: exact entity counts and relation sizes, with
degree sequences drawn from a truncated zipfian distribution clamped to the
published per-degree ranges and realized by stub matching with swap repair.
Every synthesized dataset reproduces its published |U|, |P|, |R|, |UR|, |PA|
exactly.

Permission grants carry the full read-write level throughout: the source
relations do not distinguish levels, and revocation experiments remove the
grant entirely.
"""

from __future__ import annotations

import bisect
import csv
import hashlib
import itertools
import json
import math
import multiprocessing
import random
import statistics
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Iterable, Optional, Sequence

from .costmodel import HEADLINE_PROFILES, reconcile, scheme_profile
from .crypto import CostVector, PKI_TO_IBE
from .engine import Engine, default_content
from .rbac import Label, RW, SUPERUSER

EVENT_KINDS = ("assignU", "revokeU", "assignP", "revokeP")


# --- datasets --------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """A start state: named entities plus the two assignment relations.
    All permission grants are full read-write."""

    name: str
    users: tuple[str, ...]
    roles: tuple[str, ...]
    perms: tuple[str, ...]
    ur: tuple[tuple[str, str], ...]
    pa: tuple[tuple[str, str], ...]  # (role, file)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "users": list(self.users),
            "roles": list(self.roles),
            "perms": list(self.perms),
            "ur": [list(p) for p in self.ur],
            "pa": [list(p) for p in self.pa],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        return cls(
            name=d["name"],
            users=tuple(d["users"]),
            roles=tuple(d["roles"]),
            perms=tuple(d["perms"]),
            ur=tuple((u, r) for u, r in d["ur"]),
            pa=tuple((r, p) for r, p in d["pa"]),
        )

    def marginals(self) -> dict[str, int]:
        return {
            "users": len(self.users),
            "perms": len(self.perms),
            "roles": len(self.roles),
            "ur": len(self.ur),
            "pa": len(self.pa),
        }


def save_dataset(ds: Dataset, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(ds.to_dict(), fh, indent=1)
        fh.write("\n")


def load_dataset(path: str) -> Dataset:
    with open(path) as fh:
        return Dataset.from_dict(json.load(fh))


def load_marginals() -> dict[str, dict]:
    ref = resources.files("rolecrypt.data").joinpath("dataset_marginals.json")
    with ref.open() as fh:
        return json.load(fh)["datasets"]


# --- synthesis -------------------------------------------------------------------


def _degree_sequence(
    rng: random.Random, n: int, total: int, lo: int, hi: int, s: float = 1.0
) -> list[int]:
    """A degree sequence of length n summing to ``total`` with every entry in
    [lo, hi], zipf-shaped (exponent s) and randomly permuted."""
    if not n * lo <= total <= n * hi:
        raise ValueError(f"no sequence: {n}x[{lo},{hi}] cannot sum to {total}")
    degs = [lo] * n
    remaining = total - n * lo
    weights = [1.0 / (i + 1) ** s for i in range(n)]
    cum = list(itertools.accumulate(weights))
    stalls = 0
    while remaining:
        i = bisect.bisect_left(cum, rng.random() * cum[-1])
        if degs[i] >= hi:
            stalls += 1
            if stalls > 50 * n + 1000:
                # most mass saturated; drop saturated entries and rebuild
                weights = [
                    w if d < hi else 0.0 for w, d in zip(weights, degs)
                ]
                cum = list(itertools.accumulate(weights))
                stalls = 0
            continue
        degs[i] += 1
        remaining -= 1
    rng.shuffle(degs)
    return degs


def _greedy_realize(
    left: Sequence[str],
    right: Sequence[str],
    left_degs: Sequence[int],
    right_degs: Sequence[int],
) -> list[tuple[str, str]]:
    """Largest-first simple realization of a bipartite degree sequence."""
    residual = list(right_degs)
    edges: list[tuple[str, str]] = []
    for i in sorted(range(len(left)), key=lambda i: -left_degs[i]):
        need = left_degs[i]
        if need == 0:
            continue
        targets = sorted(range(len(right)), key=lambda j: -residual[j])[:need]
        if residual[targets[-1]] <= 0:
            raise ValueError("degree sequences are not realizable")
        for j in targets:
            residual[j] -= 1
            edges.append((left[i], right[j]))
    return edges


def _edge_swaps(
    rng: random.Random, edges: list[tuple[str, str]], rounds: int
) -> list[tuple[str, str]]:
    """Randomize a simple bipartite graph in place by double-edge swaps,
    preserving both degree sequences and simplicity."""
    edge_set = set(edges)
    m = len(edges)
    for _ in range(rounds):
        i, j = rng.randrange(m), rng.randrange(m)
        (a, b), (c, d) = edges[i], edges[j]
        if a == c or b == d or (a, d) in edge_set or (c, b) in edge_set:
            continue
        edge_set -= {(a, b), (c, d)}
        edge_set |= {(a, d), (c, b)}
        edges[i], edges[j] = (a, d), (c, b)
    return edges


def _stub_match(
    rng: random.Random,
    left: Sequence[str],
    right: Sequence[str],
    left_degs: Sequence[int],
    right_degs: Sequence[int],
) -> list[tuple[str, str]]:
    """Realize a bipartite graph with the given degree sequences and no
    duplicate edges: pair shuffled stubs, then repair duplicates by swapping
    right endpoints with randomly chosen clean edges.  Dense graphs (where
    collision repair stalls) go through greedy realization plus edge swaps
    instead."""
    total = sum(left_degs)
    if total > 0.4 * len(left) * len(right):
        edges = _greedy_realize(left, right, left_degs, right_degs)
        return _edge_swaps(rng, edges, 10 * total)
    lstubs = [x for x, d in zip(left, left_degs) for _ in range(d)]
    rstubs = [x for x, d in zip(right, right_degs) for _ in range(d)]
    for attempt in range(50):
        rng.shuffle(lstubs)
        rng.shuffle(rstubs)
        pairs = list(zip(lstubs, rstubs))
        seen: set[tuple[str, str]] = set()
        dups = []
        for idx, e in enumerate(pairs):
            if e in seen:
                dups.append(idx)
            else:
                seen.add(e)
        ok = True
        while dups and ok:
            i = dups.pop()
            e = pairs[i]
            for tries in range(500):
                j = rng.randrange(len(pairs))
                if j == i or j in dups:
                    continue
                ej = pairs[j]
                a, b = (e[0], ej[1]), (ej[0], e[1])
                if a == b or a in seen or b in seen:
                    continue
                seen.remove(ej)
                seen.add(a)
                seen.add(b)
                pairs[i], pairs[j] = a, b
                break
            else:
                ok = False  # couldn't repair this duplicate; reshuffle
        if ok:
            return pairs
    # unlucky sparse case: fall back to the always-feasible path
    edges = _greedy_realize(left, right, left_degs, right_degs)
    return _edge_swaps(rng, edges, 10 * total)


def _bipartite(
    rng: random.Random,
    left: Sequence[str],
    right: Sequence[str],
    total: int,
    left_range: Sequence[int],
    right_range: Sequence[int],
) -> list[tuple[str, str]]:
    """Draw degree sequences within the published ranges until the pair is
    jointly realizable, then realize it."""
    for _ in range(100):
        ldeg = _degree_sequence(rng, len(left), total, *left_range)
        rdeg = _degree_sequence(rng, len(right), total, *right_range)
        try:
            return _stub_match(rng, left, right, ldeg, rdeg)
        except ValueError:
            continue
    raise ValueError("no realizable degree sequences within the ranges")


def synthesize_dataset(
    name: str, rng: random.Random, marginals: Optional[dict] = None
) -> Dataset:
    """Build a dataset matching the published aggregate statistics of the
    named benchmark exactly."""
    row = (marginals or load_marginals())[name]
    users = tuple(f"u{i}" for i in range(1, row["users"] + 1))
    roles = tuple(f"r{i}" for i in range(1, row["roles"] + 1))
    perms = tuple(f"p{i}" for i in range(1, row["perms"] + 1))
    ur = _bipartite(
        rng, users, roles, row["ur"],
        row["roles_per_user"], row["users_per_role"],
    )
    pa = _bipartite(
        rng, roles, perms, row["pa"],
        row["perms_per_role"], row["roles_per_perm"],
    )
    return Dataset(name, users, roles, perms, tuple(ur), tuple(pa))


# --- the administrator actor ------------------------------------------------------


@dataclass(frozen=True)
class ActorRates:
    """Event rates of the administrator, all per day."""

    admin_rate: float
    add_bias: float  # fraction of events that assign rather than revoke
    ur_bias: float  # fraction of events that touch UR rather than PA

    @classmethod
    def sample(cls, rng: random.Random, n_users: int) -> "ActorRates":
        return cls(
            admin_rate=admin_rate(n_users),
            add_bias=rng.uniform(0.7, 1.0),
            ur_bias=rng.uniform(0.3, 0.7),
        )

    def kind_rates(self) -> dict[str, float]:
        r, a, u = self.admin_rate, self.add_bias, self.ur_bias
        return {
            "assignU": a * u * r,
            "revokeU": (1 - a) * u * r,
            "assignP": a * (1 - u) * r,
            "revokeP": (1 - a) * (1 - u) * r,
        }


def admin_rate(n_users: int) -> float:
    return 0.1 * math.sqrt(n_users)


class IndexedSet:
    """Set with O(1) membership, add, discard, and uniform random choice."""

    def __init__(self, items: Iterable = ()) -> None:
        self._list: list = []
        self._pos: dict = {}
        for x in items:
            self.add(x)

    def add(self, x) -> None:
        if x not in self._pos:
            self._pos[x] = len(self._list)
            self._list.append(x)

    def discard(self, x) -> None:
        i = self._pos.pop(x, None)
        if i is None:
            return
        last = self._list.pop()
        if i < len(self._list):
            self._list[i] = last
            self._pos[last] = i

    def choose(self, rng: random.Random):
        return self._list[rng.randrange(len(self._list))]

    def __contains__(self, x) -> bool:
        return x in self._pos

    def __len__(self) -> int:
        return len(self._list)


@dataclass(frozen=True)
class Event:
    t: float  # days since run start
    kind: str
    label: Optional[Label]  # None when the arrival found no eligible target


def sample_events(
    rng: random.Random, dataset: Dataset, rates: ActorRates, days: float
) -> list[Event]:
    """One run's administrative arrivals.  Targets are uniform over the
    eligible pairs at the moment of the event."""
    users, roles, perms = dataset.users, dataset.roles, dataset.perms
    ur = IndexedSet(dataset.ur)
    pa = IndexedSet(dataset.pa)
    kind_rates = rates.kind_rates()
    kinds = list(kind_rates)
    weights = [kind_rates[k] for k in kinds]
    cum = list(itertools.accumulate(weights))
    total = cum[-1]

    def pick_absent(
        lefts: Sequence[str], rights: Sequence[str], present: IndexedSet
    ) -> Optional[tuple[str, str]]:
        capacity = len(lefts) * len(rights)
        if len(present) >= capacity:
            return None
        for _ in range(2000):  # relations here are sparse; this ~never loops
            pair = (rng.choice(lefts), rng.choice(rights))
            if pair not in present:
                return pair
        absent = [
            (l, r)
            for l in lefts
            for r in rights
            if (l, r) not in present
        ]
        return rng.choice(absent)

    out: list[Event] = []
    t = 0.0
    while True:
        t += rng.expovariate(total)
        if t > days:
            break
        kind = kinds[bisect.bisect_left(cum, rng.random() * total)]
        label: Optional[Label] = None
        if kind == "assignU":
            pair = pick_absent(users, roles, ur)
            if pair is not None:
                ur.add(pair)
                label = Label("assignU", user=pair[0], role=pair[1])
        elif kind == "revokeU":
            if len(ur):
                u, r = ur.choose(rng)
                ur.discard((u, r))
                label = Label("revokeU", user=u, role=r)
        elif kind == "assignP":
            pair = pick_absent(roles, perms, pa)
            if pair is not None:
                pa.add(pair)
                label = Label("assignP", role=pair[0], file=pair[1], op=RW)
        else:
            if len(pa):
                r, fn = pa.choose(rng)
                pa.discard((r, fn))
                label = Label("revokeP", role=r, file=fn, op=RW)
        out.append(Event(t, kind, label))
    return out


# --- running ---------------------------------------------------------------------


@dataclass
class EventRecord:
    t: float
    kind: str
    target: str  # printable label, or "-" for a skipped arrival
    applied: bool
    cost: CostVector


@dataclass
class RunResult:
    dataset: str
    variant: str
    run_index: int
    seed: int
    days: float
    rates: ActorRates
    arrivals: dict[str, int]
    applied: dict[str, int]
    skipped: dict[str, int]
    totals: CostVector
    by_kind: dict[str, CostVector]
    rekeys_by_kind: dict[str, int]  # file re-keys (fresh file keys minted)
    max_revocations_per_window: Optional[int] = None
    events: Optional[list[EventRecord]] = None

    def neutral_totals(self) -> dict[str, int]:
        """Counter totals under the identity-based names regardless of
        variant, so runs of both variants tabulate identically."""
        return self.totals.renamed(PKI_TO_IBE).totals()

    def units(self, profile: str, kind: Optional[str] = None) -> Fraction:
        cost = self.totals if kind is None else self.by_kind[kind]
        return scheme_profile(profile).units_of(cost)


def derive_seed(seed: int, index: int) -> int:
    digest = hashlib.sha256(f"{seed}/{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def seed_engine(dataset: Dataset, variant: str) -> Engine:
    eng = Engine(binding=variant)
    for u in dataset.users:
        eng.add_user(u)
    for fn in dataset.perms:
        eng.add_file(SUPERUSER, fn, default_content(fn))
    for r in dataset.roles:
        eng.add_role(r)
    for u, r in dataset.ur:
        eng.assign_user(u, r)
    for r, fn in dataset.pa:
        eng.assign_perm(r, fn, RW)
    return eng


def run_simulation(
    dataset: Dataset,
    *,
    variant: str = "ibe",
    days: float = 30.0,
    seed: int = 0,
    run_index: int = 0,
    check_costs: bool = False,
    record_events: bool = False,
    revocation_window: Optional[float] = None,
) -> RunResult:
    """One simulated period on a fresh engine seeded from the dataset."""
    run_seed = derive_seed(seed, run_index)
    rng = random.Random(run_seed)
    rates = ActorRates.sample(rng, len(dataset.users))
    eng = seed_engine(dataset, variant)
    events = sample_events(rng, dataset, rates, days)

    arrivals = {k: 0 for k in EVENT_KINDS}
    applied = {k: 0 for k in EVENT_KINDS}
    skipped = {k: 0 for k in EVENT_KINDS}
    by_kind = {k: CostVector() for k in EVENT_KINDS}
    rekeys = {k: 0 for k in EVENT_KINDS}
    records: list[EventRecord] = []
    base = eng.provider.snapshot()
    for ev in events:
        arrivals[ev.kind] += 1
        if ev.label is None:
            skipped[ev.kind] += 1
            if record_events:
                records.append(EventRecord(ev.t, ev.kind, "-", False, CostVector()))
            continue
        if check_costs:
            stats = eng.stats()
        snap = eng.provider.snapshot()
        eng.apply_label(ev.label)
        delta = eng.provider.diff_since(snap)
        if check_costs:
            diff = reconcile(delta, ev.label, stats, variant=variant)
            if diff:
                raise AssertionError(
                    f"cost mismatch at {ev.label}: {diff!r}"
                )
        applied[ev.kind] += 1
        by_kind[ev.kind] = by_kind[ev.kind] + delta
        rekeys[ev.kind] += delta.get("sym_gen")
        if record_events:
            records.append(
                EventRecord(ev.t, ev.kind, str(ev.label), True, delta)
            )
    totals = eng.provider.diff_since(base)
    if eng.provider.unauthorized_events:
        raise AssertionError("unauthorized decryption during simulation")

    max_win = None
    if revocation_window:
        buckets: dict[int, int] = {}
        for ev in events:
            if ev.label is not None and ev.kind in ("revokeU", "revokeP"):
                buckets[int(ev.t // revocation_window)] = (
                    buckets.get(int(ev.t // revocation_window), 0) + 1
                )
        max_win = max(buckets.values(), default=0)

    return RunResult(
        dataset=dataset.name,
        variant=variant,
        run_index=run_index,
        seed=run_seed,
        days=days,
        rates=rates,
        arrivals=arrivals,
        applied=applied,
        skipped=skipped,
        totals=totals,
        by_kind=by_kind,
        rekeys_by_kind=rekeys,
        max_revocations_per_window=max_win,
        events=records if record_events else None,
    )


def _run_one(args: tuple) -> RunResult:
    dataset, kwargs = args
    return run_simulation(dataset, **kwargs)


def monte_carlo(
    dataset: Dataset,
    runs: int = 100,
    *,
    variant: str = "ibe",
    days: float = 30.0,
    seed: int = 0,
    workers: int = 1,
    check_costs: bool = False,
    record_events: bool = False,
    revocation_window: Optional[float] = None,
) -> list[RunResult]:
    """Independent runs with per-run derived seeds; identical results for any
    worker count."""
    jobs = [
        (
            dataset,
            dict(
                variant=variant,
                days=days,
                seed=seed,
                run_index=i,
                check_costs=check_costs,
                record_events=record_events,
                revocation_window=revocation_window,
            ),
        )
        for i in range(runs)
    ]
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            return pool.map(_run_one, jobs)
    return [_run_one(j) for j in jobs]


# --- aggregation and reporting ----------------------------------------------------


def per_revocation_units(
    result: RunResult, profile: str, kind: str = "revokeU"
) -> Optional[Fraction]:
    n = result.applied[kind]
    if n == 0:
        return None
    return result.units(profile, kind) / n


def user_revocation_summary(
    results: Sequence[RunResult], profile: str = "BF+CC"
) -> dict[str, float]:
    """Experiment-level revocation costs: mean encryptions per user revoked
    (over all revocations in all runs) and the median over runs of
    multiplication units per user revoked."""
    total_enc = sum(
        r.by_kind["revokeU"].renamed(PKI_TO_IBE).get("ibe_enc")
        for r in results
    )
    total_rev = sum(r.applied["revokeU"] for r in results)
    per_run = [
        float(u)
        for u in (per_revocation_units(r, profile) for r in results)
        if u is not None
    ]
    return {
        "user_revocations": total_rev,
        "mean_enc_per_user_revocation": (
            total_enc / total_rev if total_rev else 0.0
        ),
        "median_units_per_user_revocation": (
            statistics.median(per_run) if per_run else 0.0
        ),
        "runs_with_user_revocations": len(per_run),
    }


_NEUTRAL_OPS = (
    "ibe_keygen",
    "ibe_enc",
    "ibe_dec",
    "ibs_keygen",
    "ibs_sign",
    "ibs_ver",
    "sym_gen",
    "sym_enc",
    "sym_dec",
)


def _fmt_units(x: Fraction) -> str:
    return f"{float(x):.1f}"


def write_runs_csv(
    path: str,
    results: Sequence[RunResult],
    profiles: Sequence[str] = HEADLINE_PROFILES,
) -> None:
    results = sorted(results, key=lambda r: (r.dataset, r.variant, r.run_index))
    unit_cols = [f"units_{p}" for p in profiles]
    rev_cols = [f"units_per_user_revocation_{p}" for p in profiles]
    window = any(r.max_revocations_per_window is not None for r in results)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = (
            ["dataset", "variant", "run", "seed", "days",
             "admin_rate", "add_bias", "ur_bias",
             "arrivals", "applied", "skipped"]
            + [f"applied_{k}" for k in EVENT_KINDS]
            + list(_NEUTRAL_OPS)
            + unit_cols
            + ["rekeys_revokeU", "rekeys_per_user_revocation"]
            + rev_cols
            + (["max_revocations_per_window"] if window else [])
        )
        w.writerow(header)
        for r in results:
            totals = r.neutral_totals()
            n_rev = r.applied["revokeU"]
            row = [
                r.dataset, r.variant, r.run_index, r.seed,
                f"{r.days:.6f}",
                f"{r.rates.admin_rate:.6f}",
                f"{r.rates.add_bias:.6f}",
                f"{r.rates.ur_bias:.6f}",
                sum(r.arrivals.values()),
                sum(r.applied.values()),
                sum(r.skipped.values()),
            ]
            row += [r.applied[k] for k in EVENT_KINDS]
            row += [totals.get(op, 0) for op in _NEUTRAL_OPS]
            row += [_fmt_units(r.units(p)) for p in profiles]
            row += [
                r.rekeys_by_kind["revokeU"],
                f"{r.rekeys_by_kind['revokeU'] / n_rev:.1f}" if n_rev else "",
            ]
            row += [
                _fmt_units(per_revocation_units(r, p)) if n_rev else ""
                for p in profiles
            ]
            if window:
                row += [r.max_revocations_per_window]
            w.writerow(row)


def write_events_csv(path: str, results: Sequence[RunResult]) -> None:
    results = sorted(results, key=lambda r: (r.dataset, r.variant, r.run_index))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["dataset", "variant", "run", "index", "t_days", "kind",
             "target", "applied"]
            + list(_NEUTRAL_OPS)
        )
        for r in results:
            if r.events is None:
                continue
            for i, ev in enumerate(r.events):
                totals = ev.cost.renamed(PKI_TO_IBE).totals()
                w.writerow(
                    [r.dataset, r.variant, r.run_index, i, f"{ev.t:.6f}",
                     ev.kind, ev.target, int(ev.applied)]
                    + [totals.get(op, 0) for op in _NEUTRAL_OPS]
                )


def _quartiles(vals: list[float]) -> tuple[float, float, float]:
    if not vals:
        return (0.0, 0.0, 0.0)
    if len(vals) == 1:
        return (vals[0], vals[0], vals[0])
    q1, q2, q3 = statistics.quantiles(vals, n=4, method="inclusive")
    return (q1, q2, q3)


def write_summary_csv(
    path: str,
    results: Sequence[RunResult],
    profiles: Sequence[str] = HEADLINE_PROFILES,
) -> None:
    """Per (dataset, variant) aggregates over runs."""
    groups: dict[tuple[str, str], list[RunResult]] = {}
    for r in results:
        groups.setdefault((r.dataset, r.variant), []).append(r)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = [
            "dataset", "variant", "runs",
            "mean_arrivals", "mean_applied",
            "user_revocations", "mean_enc_per_user_revocation",
        ]
        for p in profiles:
            header += [
                f"units_per_user_revocation_{p}_q1",
                f"units_per_user_revocation_{p}_median",
                f"units_per_user_revocation_{p}_q3",
            ]
        w.writerow(header)
        for (ds, variant) in sorted(groups):
            rs = groups[(ds, variant)]
            summ = user_revocation_summary(rs)
            row = [
                ds, variant, len(rs),
                f"{statistics.fmean(sum(r.arrivals.values()) for r in rs):.6f}",
                f"{statistics.fmean(sum(r.applied.values()) for r in rs):.6f}",
                summ["user_revocations"],
                f"{summ['mean_enc_per_user_revocation']:.1f}",
            ]
            for p in profiles:
                per_run = [
                    float(u)
                    for u in (per_revocation_units(r, p) for r in rs)
                    if u is not None
                ]
                q1, q2, q3 = _quartiles(per_run)
                row += [f"{q1:.1f}", f"{q2:.1f}", f"{q3:.1f}"]
            w.writerow(row)
