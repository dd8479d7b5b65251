"""Reference model of flat role-based access control with two access levels.

This is the plain in-memory oracle the cryptographic engines are tested
against.  States are immutable; labels (administrative commands) produce new
states.  Permissions are files, and a role holds at most one access level per
file: ``Read`` or ``RW``.  ``RW`` subsumes ``Read`` for authorization queries
but not for exact assignment queries.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional

READ = "Read"
RW = "RW"
WRITE = "Write"

#: Reserved administrator name; never a member of ``users``.
SUPERUSER = "SU"

LABEL_KINDS = (
    "addU",
    "delU",
    "addP",
    "delP",
    "addR",
    "delR",
    "assignU",
    "revokeU",
    "assignP",
    "revokeP",
)

_ASSIGN_OPS = (READ, RW)
_REVOKE_OPS = (WRITE, RW)


@dataclass(frozen=True)
class Label:
    """One administrative command.

    Field usage by kind:
      addU/delU: user; addR/delR: role; addP/delP: file;
      assignU/revokeU: user, role;
      assignP: role, file, op in {Read, RW};
      revokeP: role, file, op in {Write, RW}.
    """

    kind: str
    user: Optional[str] = None
    role: Optional[str] = None
    file: Optional[str] = None
    op: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in LABEL_KINDS:
            raise ValueError(f"unknown label kind {self.kind!r}")
        need = {
            "addU": ("user",),
            "delU": ("user",),
            "addR": ("role",),
            "delR": ("role",),
            "addP": ("file",),
            "delP": ("file",),
            "assignU": ("user", "role"),
            "revokeU": ("user", "role"),
            "assignP": ("role", "file", "op"),
            "revokeP": ("role", "file", "op"),
        }[self.kind]
        for f in need:
            if getattr(self, f) is None:
                raise ValueError(f"label {self.kind} requires {f}")
        if self.kind == "assignP" and self.op not in _ASSIGN_OPS:
            raise ValueError(f"assignP op must be one of {_ASSIGN_OPS}")
        if self.kind == "revokeP" and self.op not in _REVOKE_OPS:
            raise ValueError(f"revokeP op must be one of {_REVOKE_OPS}")

    def __str__(self) -> str:
        args = [
            v
            for v in (self.user, self.role, self.file, self.op)
            if v is not None
        ]
        return f"{self.kind}({', '.join(args)})"


@dataclass(frozen=True)
class RbacState:
    """Immutable snapshot: users, roles, permission objects, UR and PA relations.

    ``perms`` holds permission object names (files); each object induces the
    two ground query permissions (fn, Read) and (fn, RW).  ``pa`` entries are
    (role, file, op) with op in {Read, RW}, at most one per (role, file).
    """

    users: frozenset[str] = frozenset()
    roles: frozenset[str] = frozenset()
    perms: frozenset[str] = frozenset()
    ur: frozenset[tuple[str, str]] = frozenset()
    pa: frozenset[tuple[str, str, str]] = frozenset()

    def pa_op(self, role: str, fn: str) -> Optional[str]:
        """The op the role holds for the file, or None."""
        for r, f, op in self.pa:
            if r == role and f == fn:
                return op
        return None

    def roles_of(self, user: str) -> frozenset[str]:
        return frozenset(r for u, r in self.ur if u == user)

    def members_of(self, role: str) -> frozenset[str]:
        return frozenset(u for u, r in self.ur if r == role)

    def holders_of(self, fn: str) -> frozenset[str]:
        return frozenset(r for r, f, _ in self.pa if f == fn)


class RbacError(ValueError):
    """A label referenced a principal or object that does not exist."""


def check_invariants(state: RbacState) -> None:
    """Raise AssertionError if referential integrity is broken."""
    assert SUPERUSER not in state.users
    for u, r in state.ur:
        assert u in state.users and r in state.roles, (u, r)
    seen: set[tuple[str, str]] = set()
    for r, f, op in state.pa:
        assert r in state.roles and f in state.perms, (r, f)
        assert op in (READ, RW), op
        assert (r, f) not in seen, f"two ops for {(r, f)}"
        seen.add((r, f))


def _warn(on_warning: Optional[Callable[[str], None]], message: str) -> None:
    if on_warning is not None:
        on_warning(message)


def apply_label(
    state: RbacState,
    label: Label,
    on_warning: Optional[Callable[[str], None]] = None,
) -> RbacState:
    """Apply one administrative label, returning the successor state.

    Duplicate adds, absent deletes, already-satisfied assigns and not-held
    revokes return the state unchanged and report through ``on_warning``.
    Labels that name a nonexistent user/role/file raise :class:`RbacError`.
    """
    k = label.kind
    if k == "addU":
        u = label.user
        if u == SUPERUSER:
            raise RbacError(f"{SUPERUSER!r} is reserved")
        if u in state.users:
            _warn(on_warning, f"addU: {u!r} already exists")
            return state
        return replace(state, users=state.users | {u})

    if k == "delU":
        u = label.user
        if u not in state.users:
            _warn(on_warning, f"delU: {u!r} does not exist")
            return state
        return replace(
            state,
            users=state.users - {u},
            ur=frozenset(p for p in state.ur if p[0] != u),
        )

    if k == "addR":
        r = label.role
        if r in state.roles:
            _warn(on_warning, f"addR: {r!r} already exists")
            return state
        return replace(state, roles=state.roles | {r})

    if k == "delR":
        r = label.role
        if r not in state.roles:
            _warn(on_warning, f"delR: {r!r} does not exist")
            return state
        return replace(
            state,
            roles=state.roles - {r},
            ur=frozenset(p for p in state.ur if p[1] != r),
            pa=frozenset(p for p in state.pa if p[0] != r),
        )

    if k == "addP":
        fn = label.file
        if fn in state.perms:
            _warn(on_warning, f"addP: {fn!r} already exists")
            return state
        return replace(state, perms=state.perms | {fn})

    if k == "delP":
        fn = label.file
        if fn not in state.perms:
            _warn(on_warning, f"delP: {fn!r} does not exist")
            return state
        return replace(
            state,
            perms=state.perms - {fn},
            pa=frozenset(p for p in state.pa if p[1] != fn),
        )

    if k == "assignU":
        u, r = label.user, label.role
        if u not in state.users:
            raise RbacError(f"assignU: no user {u!r}")
        if r not in state.roles:
            raise RbacError(f"assignU: no role {r!r}")
        if (u, r) in state.ur:
            _warn(on_warning, f"assignU: {u!r} already in {r!r}")
            return state
        return replace(state, ur=state.ur | {(u, r)})

    if k == "revokeU":
        u, r = label.user, label.role
        if u not in state.users:
            raise RbacError(f"revokeU: no user {u!r}")
        if r not in state.roles:
            raise RbacError(f"revokeU: no role {r!r}")
        if (u, r) not in state.ur:
            _warn(on_warning, f"revokeU: {u!r} not in {r!r}")
            return state
        return replace(state, ur=state.ur - {(u, r)})

    if k == "assignP":
        r, fn, op = label.role, label.file, label.op
        if r not in state.roles:
            raise RbacError(f"assignP: no role {r!r}")
        if fn not in state.perms:
            raise RbacError(f"assignP: no file {fn!r}")
        held = state.pa_op(r, fn)
        if held == RW or held == op:
            _warn(on_warning, f"assignP: {r!r} already holds {held} on {fn!r}")
            return state
        pa = state.pa
        if held is not None:
            pa = pa - {(r, fn, held)}
        return replace(state, pa=pa | {(r, fn, op)})

    if k == "revokeP":
        r, fn, op = label.role, label.file, label.op
        if r not in state.roles:
            raise RbacError(f"revokeP: no role {r!r}")
        if fn not in state.perms:
            raise RbacError(f"revokeP: no file {fn!r}")
        held = state.pa_op(r, fn)
        if held is None:
            _warn(on_warning, f"revokeP: {r!r} holds nothing on {fn!r}")
            return state
        if op == WRITE:
            if held != RW:
                _warn(on_warning, f"revokeP: {r!r} holds no write on {fn!r}")
                return state
            return replace(
                state, pa=(state.pa - {(r, fn, RW)}) | {(r, fn, READ)}
            )
        return replace(state, pa=state.pa - {(r, fn, held)})

    raise AssertionError(k)


def apply_trace(
    state: RbacState,
    labels: Iterable[Label],
    on_warning: Optional[Callable[[str], None]] = None,
) -> RbacState:
    for label in labels:
        state = apply_label(state, label, on_warning)
    return state


# --- queries ----------------------------------------------------------------
#
# Ground query facts are tuples:
#   ("UR", u, r)        u is a member of r
#   ("PA", r, fn, op)   r holds exactly op on fn
#   ("R", r)            r exists
#   ("auth", u, fn, op) some role of u grants op on fn (RW grants Read)

def grants(held: str, requested: str) -> bool:
    """Does an assigned access level satisfy a requested one?"""
    return held == requested or (held == RW and requested == READ)


def eval_query(state: RbacState, query: tuple) -> bool:
    kind = query[0]
    if kind == "UR":
        return (query[1], query[2]) in state.ur
    if kind == "PA":
        return (query[1], query[2], query[3]) in state.pa
    if kind == "R":
        return query[1] in state.roles
    if kind == "auth":
        _, u, fn, op = query
        for r in state.roles_of(u):
            held = state.pa_op(r, fn)
            if held is not None and grants(held, op):
                return True
        return False
    raise ValueError(f"unknown query kind {kind!r}")


def theory(state: RbacState) -> frozenset[tuple]:
    """All true ground query facts over the state's own names.

    Brute-force enumerable by construction: R over roles, UR over users x
    roles, PA over roles x files x {Read, RW}, auth over users x files x
    {Read, RW}.
    """
    facts: set[tuple] = set()
    for r in state.roles:
        facts.add(("R", r))
    facts.update(("UR", u, r) for u, r in state.ur)
    facts.update(("PA", r, f, op) for r, f, op in state.pa)
    # auth with RW-subsumes-Read, via each user's role grants
    role_grant: dict[str, set[tuple[str, str]]] = {r: set() for r in state.roles}
    for r, f, op in state.pa:
        role_grant[r].add((f, READ))
        if op == RW:
            role_grant[r].add((f, RW))
    for u, r in state.ur:
        for f, op in role_grant[r]:
            facts.add(("auth", u, f, op))
    return frozenset(facts)


def auth_facts(state: RbacState) -> frozenset[tuple]:
    """Just the auth subset of :func:`theory` (the granted requests)."""
    return frozenset(f for f in theory(state) if f[0] == "auth")
