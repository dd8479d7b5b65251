"""Lockstep checking of the enforcement engines against the reference model.

Three pieces:

* ``sigma`` builds the enforcement image of an abstract state directly, by
  replaying its contents in sorted order onto a fresh engine.  The image has
  every version counter at 1 and the superuser as uploader of every file.
* ``canonicalize`` reduces an engine state to a version-free, handle-free
  normal form.  Two states are *congruent* when their normal forms are equal:
  same users, roles, files, memberships, grants, and plaintexts, ignoring how
  many times keys have been rolled and which opaque key handles were drawn.
* ``run_differential`` drives a trace through the reference model and an
  engine together, checking after every label that the engine's derivable
  facts match the model exactly, that measured primitive counts match the
  closed-form prediction, that no decryption was ever attempted with a
  mismatched key, and that between tuple writes the set of granted requests
  never leaves the envelope of the pre- and post-states.

Normal form details: stale file-key tuples (below the file's current version)
are dropped, role versions are erased, signatures reduce to their signer,
file bodies compare by plaintext and writer, and every generated key serial
is renumbered by first occurrence under a serial-free ordering of the
entries.  Renumbering is idempotent, and every entry is uniquely keyed by its
serial-free projection, so the normal form is well defined.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

from .costmodel import reconcile
from .crypto import (
    Identity,
    SymbolicCiphertext,
    SymbolicKey,
    SymbolicSignature,
    canonical_bytes,
)
from .engine import Engine, default_content
from .rbac import (
    Label,
    RbacError,
    RbacState,
    READ,
    RW,
    SUPERUSER,
    WRITE,
    apply_label,
    auth_facts,
    theory,
)

CanonicalState = tuple


def sigma(
    state: RbacState,
    binding: str = "ibe",
    content_fn: Callable[[str], bytes] = default_content,
) -> Engine:
    """The enforcement image of an abstract state: all versions 1, every file
    uploaded by the superuser."""
    eng = Engine(binding=binding, content_fn=content_fn)
    for u in sorted(state.users):
        eng.add_user(u)
    for fn in sorted(state.perms):
        eng.add_file(SUPERUSER, fn, content_fn(fn))
    for r in sorted(state.roles):
        eng.add_role(r)
    for u, r in sorted(state.ur):
        eng.assign_user(u, r)
    for r, fn, op in sorted(state.pa):
        eng.assign_perm(r, fn, op)
    return eng


# --- canonical form -------------------------------------------------------------


def _canon(v: object) -> object:
    """Structural reduction: erase role versions, reduce signatures to their
    signer, tag generated serials as renameable handles."""
    if isinstance(v, Identity):
        return ("id", v.kind, v.name)
    if isinstance(v, SymbolicKey):
        if v.serial is None:
            return ("key", v.alg, _canon(v.owner))
        return ("key", v.alg, _canon(v.owner), ("h", v.serial))
    if isinstance(v, SymbolicCiphertext):
        return ("ct", v.alg, _canon(v.recipient), _canon(v.payload))
    if isinstance(v, SymbolicSignature):
        return ("sig", _canon(v.signer))
    if isinstance(v, tuple):
        return ("tup",) + tuple(_canon(x) for x in v)
    return v


def _entries(eng: Engine) -> list[tuple]:
    out: list[tuple] = []
    for u in eng.users:
        ring = eng.users[u]
        out.append(("U", u, _canon(ring.enc_ref), _canon(ring.ver_ref)))
    for r, rec in eng.roles.items():
        out.append(
            ("R", r, _canon(rec.keys.enc_ref), _canon(rec.keys.ver_ref))
        )
    for fn in eng.files:
        out.append(("P", fn))
    for (m, rn, _v), t in eng.fs.rk.items():
        out.append(("RK", m, rn, _canon(t.ct), _canon(t.sig)))
    for (h, fn, v), t in eng.fs.fk.items():
        if v != eng.files.get(fn):
            continue  # superseded file-key versions do not count
        out.append(
            ("FK", h, fn, t.op, _canon(t.ct), _canon(t.issuer), _canon(t.sig))
        )
    for fn, t in eng.fs.f.items():
        out.append(
            ("F", fn, t.body.payload, _canon(t.writer), _canon(t.sig))
        )
    return out


def _is_handle(v: object) -> bool:
    return isinstance(v, tuple) and len(v) == 2 and v[0] == "h"


def _project(v: object) -> object:
    if _is_handle(v):
        return ("h",)
    if isinstance(v, tuple):
        return tuple(_project(x) for x in v)
    return v


def _rename(v: object, mapping: dict, counter: list[int]) -> object:
    if _is_handle(v):
        if v[1] not in mapping:
            mapping[v[1]] = counter[0]
            counter[0] += 1
        return ("h", mapping[v[1]])
    if isinstance(v, tuple):
        return tuple(_rename(x, mapping, counter) for x in v)
    return v


def canonicalize(obj: Union[Engine, CanonicalState]) -> CanonicalState:
    """Version-free, handle-free normal form of an engine state.  Accepts an
    engine or an already-canonical value; a fixed point either way."""
    entries = _entries(obj) if isinstance(obj, Engine) else list(obj)
    entries.sort(key=lambda e: canonical_bytes(_project(e)))
    mapping: dict = {}
    counter = [0]
    return tuple(_rename(e, mapping, counter) for e in entries)


def congruent(
    a: Union[Engine, CanonicalState], b: Union[Engine, CanonicalState]
) -> bool:
    return canonicalize(a) == canonicalize(b)


# --- differential harness -------------------------------------------------------


@dataclass
class DifferentialReport:
    ok: bool
    steps: int
    labels: list[Label]
    failure_kind: Optional[str] = None  # theory|safety|unauthorized|cost|
    #                                     congruence|error-mismatch
    failure_index: Optional[int] = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def run_differential(
    labels: Sequence[Label],
    binding: str = "ibe",
    *,
    check_costs: bool = False,
    step_congruence: bool = False,
    final_congruence: bool = True,
    content_fn: Callable[[str], bytes] = default_content,
) -> DifferentialReport:
    """Replay ``labels`` through the reference model and one engine in
    lockstep.  Stops at the first divergence."""
    labels = list(labels)
    oracle = RbacState()
    eng = Engine(binding=binding, content_fn=content_fn)
    variant = eng.binding.name

    def fail(i: int, kind: str, detail: str) -> DifferentialReport:
        return DifferentialReport(
            False, i, labels, failure_kind=kind, failure_index=i,
            detail=f"label {i} {labels[i]}: {detail}",
        )

    pre_auth = auth_facts(oracle)
    for i, lbl in enumerate(labels):
        try:
            new_oracle = apply_label(oracle, lbl)
            oracle_err: Optional[Exception] = None
        except RbacError as e:
            new_oracle, oracle_err = oracle, e
        post_auth = auth_facts(new_oracle)
        lower, upper = pre_auth & post_auth, pre_auth | post_auth
        violations: list[str] = []

        def hook() -> None:
            cur = eng.auth_facts()
            if not (lower <= cur <= upper):
                extra = sorted(cur - upper)
                missing = sorted(lower - cur)
                violations.append(f"outside envelope +{extra} -{missing}")

        if check_costs and oracle_err is None:
            stats = eng.stats()
            snap = eng.provider.snapshot()
        eng.fs.on_mutation = hook
        try:
            eng.apply_label(lbl)
            eng_err: Optional[Exception] = None
        except RbacError as e:
            eng_err = e
        finally:
            eng.fs.on_mutation = None
        if (oracle_err is None) != (eng_err is None):
            return fail(
                i, "error-mismatch",
                f"model {oracle_err!r} vs engine {eng_err!r}",
            )
        if violations:
            return fail(i, "safety", violations[0])
        if eng.provider.unauthorized_events:
            return fail(
                i, "unauthorized", repr(eng.provider.unauthorized_events[0])
            )
        if check_costs and oracle_err is None:
            measured = eng.provider.diff_since(snap)
            diff = reconcile(measured, lbl, stats, variant=variant)
            if diff:
                return fail(i, "cost", f"measured-predicted {diff!r}")
        if eng.theory() != theory(new_oracle):
            got, want = eng.theory(), theory(new_oracle)
            return fail(
                i, "theory",
                f"+{sorted(got - want)} -{sorted(want - got)}",
            )
        if step_congruence and not congruent(
            eng, sigma(new_oracle, binding=binding, content_fn=content_fn)
        ):
            return fail(i, "congruence", "not congruent to mapped state")
        oracle, pre_auth = new_oracle, post_auth
    if final_congruence and not congruent(
        eng, sigma(oracle, binding=binding, content_fn=content_fn)
    ):
        return DifferentialReport(
            False, len(labels), labels, failure_kind="congruence",
            failure_index=len(labels) - 1 if labels else None,
            detail="final state not congruent to mapped state",
        )
    return DifferentialReport(True, len(labels), labels)


def minimize_counterexample(
    labels: Sequence[Label], binding: str = "ibe", **kwargs
) -> list[Label]:
    """Greedily drop labels while the trace still fails the differential
    check.  Returns a (locally) minimal failing trace."""

    def fails(ls: list[Label]) -> bool:
        return not run_differential(ls, binding=binding, **kwargs).ok

    current = list(labels)
    if not fails(current):
        raise ValueError("trace does not fail; nothing to minimize")
    shrunk = True
    while shrunk:
        shrunk = False
        for i in range(len(current)):
            cand = current[:i] + current[i + 1 :]
            if fails(cand):
                current = cand
                shrunk = True
                break
    return current


# --- random reachable traces ----------------------------------------------------


class TraceBuilder:
    """Grows a random trace of valid labels while tracking enough shadow
    state to respect size and version caps.  About one label in twenty is a
    deliberate no-op (duplicate add, redundant grant, absent revoke)."""

    def __init__(
        self,
        rng: random.Random,
        max_users: int = 15,
        max_roles: int = 8,
        max_files: int = 20,
        version_cap: int = 3,
        noop_rate: float = 0.05,
    ) -> None:
        self.rng = rng
        self.max_users = max_users
        self.max_roles = max_roles
        self.max_files = max_files
        self.version_cap = version_cap
        self.noop_rate = noop_rate
        self.users: set[str] = set()
        self.roles: set[str] = set()
        self.files: set[str] = set()
        self.ur: set[tuple[str, str]] = set()
        self.pa: dict[tuple[str, str], str] = {}
        self.versions: dict[str, int] = {}
        self._next_id = 1

    # shadow helpers

    def _fresh(self, prefix: str) -> str:
        name = f"{prefix}{self._next_id}"
        self._next_id += 1
        return name

    def _files_of(self, r: str) -> list[str]:
        return [fn for (rr, fn) in self.pa if rr == r]

    def _roles_of(self, u: str) -> list[str]:
        return [r for (uu, r) in self.ur if uu == u]

    def _can_bump(self, fns: list[str]) -> bool:
        counts: dict[str, int] = {}
        for fn in fns:
            counts[fn] = counts.get(fn, 0) + 1
        return all(
            self.versions[fn] + n <= self.version_cap
            for fn, n in counts.items()
        )

    def _bump(self, fns: list[str]) -> None:
        for fn in fns:
            self.versions[fn] += 1

    # candidate moves; each returns a Label or None if unavailable

    def _mv_addU(self) -> Optional[Label]:
        if len(self.users) >= self.max_users:
            return None
        u = self._fresh("u")
        self.users.add(u)
        return Label("addU", user=u)

    def _mv_addR(self) -> Optional[Label]:
        if len(self.roles) >= self.max_roles:
            return None
        r = self._fresh("r")
        self.roles.add(r)
        return Label("addR", role=r)

    def _mv_addP(self) -> Optional[Label]:
        if len(self.files) >= self.max_files:
            return None
        fn = self._fresh("f")
        self.files.add(fn)
        self.versions[fn] = 1
        return Label("addP", file=fn)

    def _mv_assignU(self) -> Optional[Label]:
        cands = [
            (u, r)
            for u in self.users
            for r in self.roles
            if (u, r) not in self.ur
        ]
        if not cands:
            return None
        u, r = self.rng.choice(sorted(cands))
        self.ur.add((u, r))
        return Label("assignU", user=u, role=r)

    def _mv_revokeU(self) -> Optional[Label]:
        cands = [
            (u, r) for (u, r) in self.ur if self._can_bump(self._files_of(r))
        ]
        if not cands:
            return None
        u, r = self.rng.choice(sorted(cands))
        self.ur.discard((u, r))
        self._bump(self._files_of(r))
        return Label("revokeU", user=u, role=r)

    def _mv_assignP(self) -> Optional[Label]:
        fresh = [
            (r, fn)
            for r in self.roles
            for fn in self.files
            if (r, fn) not in self.pa
        ]
        upgrades = [k for k, op in self.pa.items() if op == READ]
        cands = [(k, "fresh") for k in fresh] + [
            (k, "up") for k in upgrades
        ]
        if not cands:
            return None
        (r, fn), kind = self.rng.choice(sorted(cands))
        op = self.rng.choice((READ, RW)) if kind == "fresh" else RW
        self.pa[(r, fn)] = op
        return Label("assignP", role=r, file=fn, op=op)

    def _mv_revokeP_write(self) -> Optional[Label]:
        cands = [k for k, op in self.pa.items() if op == RW]
        if not cands:
            return None
        r, fn = self.rng.choice(sorted(cands))
        self.pa[(r, fn)] = READ
        return Label("revokeP", role=r, file=fn, op=WRITE)

    def _mv_revokeP_full(self) -> Optional[Label]:
        cands = [
            (r, fn)
            for (r, fn) in self.pa
            if self.versions[fn] < self.version_cap
        ]
        if not cands:
            return None
        r, fn = self.rng.choice(sorted(cands))
        del self.pa[(r, fn)]
        self.versions[fn] += 1
        return Label("revokeP", role=r, file=fn, op=RW)

    def _mv_delU(self) -> Optional[Label]:
        cands = []
        for u in self.users:
            fns = [
                fn for r in self._roles_of(u) for fn in self._files_of(r)
            ]
            if self._can_bump(fns):
                cands.append(u)
        if not cands:
            return None
        u = self.rng.choice(sorted(cands))
        for r in self._roles_of(u):
            self._bump(self._files_of(r))
        self.users.discard(u)
        self.ur = {(uu, r) for (uu, r) in self.ur if uu != u}
        return Label("delU", user=u)

    def _mv_delR(self) -> Optional[Label]:
        cands = [
            r for r in self.roles if self._can_bump(self._files_of(r))
        ]
        if not cands:
            return None
        r = self.rng.choice(sorted(cands))
        for fn in self._files_of(r):
            self.versions[fn] += 1
        self.roles.discard(r)
        self.ur = {(u, rr) for (u, rr) in self.ur if rr != r}
        self.pa = {k: op for k, op in self.pa.items() if k[0] != r}
        return Label("delR", role=r)

    def _mv_delP(self) -> Optional[Label]:
        if not self.files:
            return None
        fn = self.rng.choice(sorted(self.files))
        self.files.discard(fn)
        del self.versions[fn]
        self.pa = {k: op for k, op in self.pa.items() if k[1] != fn}
        return Label("delP", file=fn)

    def _mv_noop(self) -> Optional[Label]:
        opts: list[Label] = []
        if self.users:
            u = self.rng.choice(sorted(self.users))
            opts.append(Label("addU", user=u))
            rs = [r for r in self.roles if (u, r) not in self.ur]
            if rs:
                opts.append(
                    Label("revokeU", user=u, role=self.rng.choice(sorted(rs)))
                )
        if self.roles and self.files:
            r = self.rng.choice(sorted(self.roles))
            fn = self.rng.choice(sorted(self.files))
            if (r, fn) not in self.pa:
                opts.append(Label("revokeP", role=r, file=fn, op=RW))
            elif self.pa[(r, fn)] == RW:
                opts.append(Label("assignP", role=r, file=fn, op=READ))
        if not opts:
            return None
        return self.rng.choice(opts)

    _GROW = ("addU", "addR", "addP", "assignU", "assignP")
    _ALL = _GROW + ("revokeU", "revokeP_write", "revokeP_full",
                    "delU", "delR", "delP")

    def step(self) -> Optional[Label]:
        if self.rng.random() < self.noop_rate:
            lbl = self._mv_noop()
            if lbl is not None:
                return lbl
        # favor growth so traces reach interesting states before churning
        weights = {k: (3 if k in self._GROW else 1) for k in self._ALL}
        kinds = list(self._ALL)
        while kinds:
            k = self.rng.choices(
                kinds, weights=[weights[k] for k in kinds]
            )[0]
            lbl = getattr(self, f"_mv_{k}")()
            if lbl is not None:
                return lbl
            kinds.remove(k)
        return None

    def build(self, n: int) -> list[Label]:
        out = []
        for _ in range(n):
            lbl = self.step()
            if lbl is None:
                break
            out.append(lbl)
        return out


def random_trace(
    rng: random.Random, n: int, **caps
) -> list[Label]:
    return TraceBuilder(rng, **caps).build(n)
