"""Closed-form pricing of enforcement operations.

Two layers:

* A combinatorial layer predicts, from aggregate state statistics alone, the
  exact multiset of symbolic primitives a label will cost (``algebraic_cost``).
  This is what the differential harness reconciles against measured counters.
* A unit-cost layer prices each primitive in elliptic-curve multiplication
  units for a chosen pair of published IBE/IBS schemes (``SchemeProfile``),
  using exact rational arithmetic throughout.

Scheme data lives in ``data/schemes.json``: per-operation group-operation
counts for eight identity-based encryption schemes and five identity-based
signature schemes, plus the relative cost of each group operation.  Key and
ciphertext sizes are carried along for completeness but nothing here consumes
them.  Symmetric primitives are treated as free; the conventional public-key
variant is priced by mapping its counters onto the identity-based ones.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Mapping, Optional

from .crypto import CostVector, INVOKER, PKI_TO_IBE, REFERENCE_MONITOR
from .rbac import Label, READ, RW, SUPERUSER, WRITE

HEADLINE_PROFILES = ("BF+CC", "BB1+PS", "LW+PS")


# --- aggregate state statistics ------------------------------------------------


@dataclass(frozen=True)
class StateStats:
    """Aggregate facts about one enforcement state: everything the pricing
    formulas need, nothing about keys or ciphertexts."""

    members: Mapping[str, frozenset[str]]  # role -> users assigned
    role_files: Mapping[str, Mapping[str, str]]  # role -> {file: op held}
    file_versions: Mapping[str, int]  # file -> current key version
    file_holders: Mapping[str, frozenset[str]]  # file -> roles holding it
    user_roles: Mapping[str, frozenset[str]]  # user -> roles joined

    @classmethod
    def empty(cls) -> "StateStats":
        return cls({}, {}, {}, {}, {})


# --- primitive-count prediction -------------------------------------------------

_Bag = Counter  # (principal, op) -> count


def _add(bag: _Bag, op: str, n: int = 1, principal: str = INVOKER) -> None:
    if n:
        bag[(principal, op)] += n


def _rekey_membership(bag: _Bag, kept: int) -> None:
    """Re-issue role keys to ``kept`` recipients: verify each old wrapped-key
    tuple, wrap the new keys, sign the replacement."""
    _add(bag, "ibs_ver", kept)
    _add(bag, "ibe_enc", kept)
    _add(bag, "ibs_sign", kept)


def _rekey_file(bag: _Bag, recipients: int) -> None:
    """Fresh symmetric key wrapped for every current holder of a file."""
    _add(bag, "sym_gen", 1)
    _add(bag, "ibs_ver", recipients)
    _add(bag, "ibe_enc", recipients)
    _add(bag, "ibs_sign", recipients)


def _revoke_user_cost(
    bag: _Bag,
    r: str,
    u: str,
    members: dict[str, set[str]],
    file_versions: dict[str, int],
    role_files: Mapping[str, Mapping[str, str]],
    file_holders: Mapping[str, frozenset[str]],
) -> None:
    """Price one user revocation against evolving statistics, mutating
    ``members`` and ``file_versions`` the way the operation would."""
    _add(bag, "ibe_keygen", 1)
    _add(bag, "ibs_keygen", 1)
    # remaining members plus the superuser get the new role keys
    _rekey_membership(bag, len(members[r]) - 1 + 1)
    for fn in sorted(role_files.get(r, ())):
        vfn = file_versions[fn]
        # roll the role's own wrapped file keys onto the new role keys
        _add(bag, "ibs_ver", vfn)
        _add(bag, "ibe_dec", vfn)
        _add(bag, "ibe_enc", vfn)
        _add(bag, "ibs_sign", vfn)
        # then a fresh file key for every holder (roles + superuser)
        _rekey_file(bag, len(file_holders[fn]) + 1)
        file_versions[fn] = vfn + 1
    members[r] = members[r] - {u}


def algebraic_cost(label: Label, stats: StateStats) -> CostVector:
    """Predict the primitive counts of applying ``label`` to a state with the
    given statistics.  Labels that the enforcement engine would reduce to a
    warning (duplicate adds, absent deletes, redundant grants) cost nothing."""
    bag: _Bag = Counter()
    k = label.kind
    if k == "addU":
        if label.user not in stats.user_roles:
            _add(bag, "ibe_keygen", 1)
            _add(bag, "ibs_keygen", 1)
    elif k == "addR":
        if label.role not in stats.members:
            _add(bag, "ibe_keygen", 1)
            _add(bag, "ibs_keygen", 1)
            _add(bag, "ibe_enc", 1)
            _add(bag, "ibs_sign", 1)
    elif k == "addP":
        if label.file not in stats.file_versions:
            _add(bag, "sym_gen", 1)
            _add(bag, "sym_enc", 1)
            _add(bag, "ibe_enc", 1)
            _add(bag, "ibs_sign", 2)
            _add(bag, "ibs_ver", 2, REFERENCE_MONITOR)
    elif k == "delP":
        pass  # tuple deletion only
    elif k == "assignU":
        if label.user not in stats.members.get(label.role, frozenset()):
            _add(bag, "ibs_ver", 1)
            _add(bag, "ibe_dec", 1)
            _add(bag, "ibe_enc", 1)
            _add(bag, "ibs_sign", 1)
    elif k == "revokeU":
        if label.user in stats.members.get(label.role, frozenset()):
            members = {r: set(m) for r, m in stats.members.items()}
            versions = dict(stats.file_versions)
            _revoke_user_cost(
                bag, label.role, label.user, members, versions,
                stats.role_files, stats.file_holders,
            )
    elif k == "delU":
        u = label.user
        if u in stats.user_roles:
            members = {r: set(m) for r, m in stats.members.items()}
            versions = dict(stats.file_versions)
            for r in sorted(stats.user_roles[u]):
                _revoke_user_cost(
                    bag, r, u, members, versions,
                    stats.role_files, stats.file_holders,
                )
    elif k == "assignP":
        held = stats.role_files.get(label.role, {}).get(label.file)
        vfn = stats.file_versions.get(label.file, 0)
        if held is None:
            # copy the superuser's wrapped key at every version
            _add(bag, "ibs_ver", vfn)
            _add(bag, "ibe_dec", vfn)
            _add(bag, "ibe_enc", vfn)
            _add(bag, "ibs_sign", vfn)
        elif held == READ and label.op == RW:
            # add write: re-sign each version in place
            _add(bag, "ibs_ver", vfn)
            _add(bag, "ibs_sign", vfn)
    elif k == "revokeP":
        held = stats.role_files.get(label.role, {}).get(label.file)
        if held is not None:
            if label.op == WRITE:
                if held == RW:
                    vfn = stats.file_versions[label.file]
                    _add(bag, "ibs_ver", vfn)
                    _add(bag, "ibs_sign", vfn)
            else:
                others = stats.file_holders[label.file] - {label.role}
                _rekey_file(bag, len(others) + 1)
    elif k == "delR":
        r = label.role
        if r in stats.members:
            for fn in sorted(stats.role_files.get(r, ())):
                others = stats.file_holders[fn] - {r}
                _rekey_file(bag, len(others) + 1)
    else:
        raise AssertionError(k)
    return CostVector(bag)


def data_op_cost(kind: str) -> CostVector:
    """Primitive counts of the two data-path requests (state independent)."""
    bag: _Bag = Counter()
    if kind == "read":
        _add(bag, "ibs_ver", 2)
        _add(bag, "ibe_dec", 2)
        _add(bag, "sym_dec", 1)
    elif kind == "write":
        _add(bag, "ibs_ver", 2)
        _add(bag, "ibe_dec", 2)
        _add(bag, "sym_enc", 1)
        _add(bag, "ibs_sign", 1)
        _add(bag, "ibs_ver", 2, REFERENCE_MONITOR)
    else:
        raise AssertionError(kind)
    return CostVector(bag)


# --- unit costs ----------------------------------------------------------------


@dataclass(frozen=True)
class GroupOps:
    """Group-operation counts: multiplies in G and G-hat, exponentiations in
    G_T, pairings."""

    g1: int
    g2: int
    gt: int
    pair: int


@dataclass(frozen=True)
class PairingRatios:
    """Cost of each group operation in G-multiplication units."""

    g1_mult: Fraction
    g2_mult: Fraction
    gt_exp: Fraction
    pairing: Fraction

    def units(self, ops: GroupOps) -> Fraction:
        return (
            ops.g1 * self.g1_mult
            + ops.g2 * self.g2_mult
            + ops.gt * self.gt_exp
            + ops.pair * self.pairing
        )


@dataclass(frozen=True)
class SchemeProfile:
    """A pairing of one encryption scheme with one signature scheme, priced in
    G-multiplication units.  ``op_costs`` keys are the six asymmetric provider
    counters; symmetric and unknown counters price at zero."""

    name: str
    enc_scheme: str
    sig_scheme: str
    op_costs: Mapping[str, Fraction]
    sizes: Mapping[str, GroupOps]

    def unit_cost(self, op: str) -> Fraction:
        op = PKI_TO_IBE.get(op, op)
        return self.op_costs.get(op, Fraction(0))

    def units_of(self, cost: CostVector, principal: Optional[str] = None) -> Fraction:
        total = Fraction(0)
        for (p, op), n in cost.items():
            if principal is None or p == principal:
                total += n * self.unit_cost(op)
        return total


def _ratio(x) -> Fraction:
    return Fraction(str(x))


def load_scheme_data() -> dict:
    with resources.files("rolecrypt.data").joinpath("schemes.json").open() as fh:
        return json.load(fh)


_CACHE: dict[str, SchemeProfile] = {}


def scheme_profile(pair: str) -> SchemeProfile:
    """Build a profile from a name like ``BF+CC`` (encryption+signature)."""
    if pair in _CACHE:
        return _CACHE[pair]
    data = load_scheme_data()
    ratios = PairingRatios(
        g1_mult=_ratio(data["ratios"]["g1_mult"]),
        g2_mult=_ratio(data["ratios"]["g2_mult"]),
        gt_exp=_ratio(data["ratios"]["gt_exp"]),
        pairing=_ratio(data["ratios"]["pairing"]),
    )
    enc_name, _, sig_name = pair.partition("+")
    if not sig_name:
        raise KeyError(pair)
    enc = data["encryption"][enc_name]
    sig = data["signature"][sig_name]
    op_costs = {
        "ibe_keygen": ratios.units(GroupOps(*enc["keygen"])),
        "ibe_enc": ratios.units(GroupOps(*enc["enc"])),
        "ibe_dec": ratios.units(GroupOps(*enc["dec"])),
        "ibs_keygen": ratios.units(GroupOps(*sig["keygen"])),
        "ibs_sign": ratios.units(GroupOps(*sig["sign"])),
        "ibs_ver": ratios.units(GroupOps(*sig["ver"])),
    }
    sizes = {
        "ibe_key": GroupOps(*enc["key_size"]),
        "ibe_ct": GroupOps(*enc["ct_size"]),
        "ibs_key": GroupOps(*sig["key_size"]),
        "ibs_sig": GroupOps(*sig["sig_size"]),
    }
    profile = SchemeProfile(pair, enc_name, sig_name, op_costs, sizes)
    _CACHE[pair] = profile
    return profile


def all_scheme_pairs() -> list[str]:
    data = load_scheme_data()
    return [
        f"{e}+{s}" for e in data["encryption"] for s in data["signature"]
    ]


# --- the static per-operation price table --------------------------------------

_UNIT_FILE = "f"
_UNIT_ROLE = "r"
_UNIT_USER = "u"


def _unit_stats() -> StateStats:
    """A minimal state: one role, one single-version file the role does not
    yet hold.  Constant-cost rows price identically in any state."""
    return StateStats(
        members={_UNIT_ROLE: frozenset()},
        role_files={_UNIT_ROLE: {}},
        file_versions={_UNIT_FILE: 1},
        file_holders={_UNIT_FILE: frozenset()},
        user_roles={},
    )


def static_cost_table(
    profiles: tuple[str, ...] = HEADLINE_PROFILES,
) -> list[tuple[str, str, dict[str, Fraction]]]:
    """Rows of (party, operation, {profile: units}) for every operation whose
    cost does not depend on the state: the additive administrative commands
    (permission grants priced per file-key version) and the two data requests."""
    stats = _unit_stats()
    rows: list[tuple[str, str, CostVector]] = [
        ("invoker", "addU", algebraic_cost(Label("addU", user=_UNIT_USER), stats)),
        ("invoker", "addP", algebraic_cost(Label("addP", file="f2"), stats)),
        ("invoker", "addR", algebraic_cost(Label("addR", role="r2"), stats)),
        (
            "invoker",
            "assignU",
            algebraic_cost(
                Label("assignU", user=_UNIT_USER, role=_UNIT_ROLE), stats
            ),
        ),
        (
            "invoker",
            "assignP",
            algebraic_cost(
                Label("assignP", role=_UNIT_ROLE, file=_UNIT_FILE, op=READ),
                stats,
            ),
        ),
        ("invoker", "read", data_op_cost("read")),
        ("invoker", "write", data_op_cost("write")),
        ("monitor", "addP", algebraic_cost(Label("addP", file="f2"), stats)),
        ("monitor", "write", data_op_cost("write")),
    ]
    out = []
    for party, opname, cost in rows:
        principal = INVOKER if party == "invoker" else REFERENCE_MONITOR
        cells = {
            p: scheme_profile(p).units_of(cost, principal) for p in profiles
        }
        out.append((party, opname, cells))
    return out


def format_units(x: Fraction) -> str:
    """Render an exact unit count the way a cost table reads: integers bare,
    halves and other fractions as decimals."""
    if x.denominator == 1:
        return str(x.numerator)
    return str(float(x))


# --- reconciliation -------------------------------------------------------------


def reconcile(
    measured: CostVector, label: Label, stats: StateStats, variant: str = "ibe"
) -> CostVector:
    """Difference between measured counters and the closed-form prediction for
    one label; zero (falsy) when the engine matches the model exactly."""
    predicted = algebraic_cost(label, stats)
    if variant == "pki":
        from .crypto import IBE_TO_PKI

        predicted = predicted.renamed(IBE_TO_PKI)
    return measured - predicted
