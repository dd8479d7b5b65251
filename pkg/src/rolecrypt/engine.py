"""Cryptographic enforcement of role-based access control on an untrusted store.

The filestore holds three kinds of signed tuples:

* ``RK`` — role-key tuples: the role's private keys, wrapped for one member
  (or for SU), bound to a role version.
* ``FK`` — file-key tuples: a file's symmetric key, wrapped for one holder
  (a role version or SU), bound to a file-key version.
* ``F``  — the file body, encrypted under the symmetric key of the version it
  was last written at (exactly one per file).

Revocation re-keys: revoking a member mints new role keys at v_r+1, re-issues
RK tuples to the remaining members and SU, re-encrypts the role's FK tuples to
the new role identity, and rolls every reachable file key forward to v_fn+1
for all current holders (including SU).  File bodies are re-encrypted lazily,
on the next write.  A minimal reference monitor verifies signatures on user
uploads (new files and writes); administrative traffic is signed but not
re-verified server-side.

One engine serves both crypto bindings.  The identity-based binding encrypts
and verifies directly against identities; the conventional public-key binding
generates key pairs, publishes the public halves in the USERS/ROLES metadata
records, and replaces a role's record wholesale when it is re-keyed.  Apart
from key handling in ``add_user`` the operation logic is shared.

Mutation ordering is deliberate: new tuples are written at not-yet-current
versions, then the ROLES/FILES version counters are bumped, then stale tuples
are deleted, so the set of granted requests never transiently leaves the
envelope of the pre- and post-states.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Optional

from .costmodel import StateStats
from .crypto import (
    CostVector,
    CryptoProvider,
    Identity,
    INVOKER,
    REFERENCE_MONITOR,
    SU_IDENTITY,
    SymbolicCiphertext,
    SymbolicKey,
    SymbolicSignature,
    role_identity,
    user_identity,
)
from .rbac import Label, RbacError, READ, RW, SUPERUSER, WRITE, grants


class AuthorizationError(Exception):
    """No role of the requesting user qualifies for the operation."""


class IntegrityError(Exception):
    """A signature check failed or a stale version was presented."""


@dataclass(frozen=True)
class RkTuple:
    member: Identity
    role: Identity  # versioned role identity
    ct: SymbolicCiphertext  # role private keys wrapped for the member
    sig: SymbolicSignature  # by SU


@dataclass(frozen=True)
class FkTuple:
    holder: Identity  # versioned role identity or SU
    fn: str
    op: str  # Read | RW
    version: int  # file-key version
    ct: SymbolicCiphertext  # symmetric file key wrapped for the holder
    issuer: Identity
    sig: SymbolicSignature  # by the issuer


@dataclass(frozen=True)
class FTuple:
    fn: str
    version: int  # file-key version the body is encrypted under
    body: SymbolicCiphertext  # symmetric encryption of the contents
    writer: Identity
    sig: SymbolicSignature  # by the writer


def rk_fields(t: RkTuple) -> tuple:
    return ("RK", t.member, t.role, t.ct)


def fk_fields(t: FkTuple) -> tuple:
    return ("FK", t.holder, t.fn, t.op, t.version, t.ct, t.issuer)


def f_fields(t: FTuple) -> tuple:
    return ("F", t.fn, t.version, t.body, t.writer)


class FileStore:
    """Tuple store keyed by (kind, subject, object, version), with the
    secondary indexes the operations' wildcard scans and deletes need.
    Every put/delete fires ``on_mutation`` once (replacement counts once)."""

    def __init__(self) -> None:
        self.rk: dict[tuple[str, str, int], RkTuple] = {}
        self.fk: dict[tuple[str, str, int], FkTuple] = {}
        self.f: dict[str, FTuple] = {}
        self._rk_by_role: dict[tuple[str, int], set[str]] = defaultdict(set)
        self._rk_by_member: dict[str, set[tuple[str, int]]] = defaultdict(set)
        self._fk_by_file: dict[str, set[tuple[str, int]]] = defaultdict(set)
        self._fk_by_holder: dict[str, set[tuple[str, int]]] = defaultdict(set)
        self.on_mutation: Optional[Callable[[], None]] = None

    def _fire(self) -> None:
        if self.on_mutation is not None:
            self.on_mutation()

    # -- RK

    def put_rk(self, t: RkTuple) -> None:
        key = (t.member.name, t.role.name, t.role.version)
        self.rk[key] = t
        self._rk_by_role[(key[1], key[2])].add(key[0])
        self._rk_by_member[key[0]].add((key[1], key[2]))
        self._fire()

    def del_rk(self, member: str, role: str, version: int) -> None:
        del self.rk[(member, role, version)]
        self._rk_by_role[(role, version)].discard(member)
        self._rk_by_member[member].discard((role, version))
        self._fire()

    def rk_members(self, role: str, version: int) -> list[str]:
        return sorted(self._rk_by_role.get((role, version), ()))

    def delete_rk_role_version(self, role: str, version: int) -> None:
        for m in self.rk_members(role, version):
            self.del_rk(m, role, version)

    def member_roles(self, member: str) -> list[str]:
        return sorted({r for r, _ in self._rk_by_member.get(member, ())})

    # -- FK

    def put_fk(self, t: FkTuple) -> None:
        key = (t.holder.name, t.fn, t.version)
        self.fk[key] = t
        self._fk_by_file[t.fn].add((key[0], key[2]))
        self._fk_by_holder[key[0]].add((t.fn, key[2]))
        self._fire()

    def del_fk(self, holder: str, fn: str, version: int) -> None:
        del self.fk[(holder, fn, version)]
        self._fk_by_file[fn].discard((holder, version))
        self._fk_by_holder[holder].discard((fn, version))
        self._fire()

    def fk_versions(self, holder: str, fn: str) -> list[int]:
        return sorted(
            v for f, v in self._fk_by_holder.get(holder, ()) if f == fn
        )

    def fk_holders_at(self, fn: str, version: int) -> list[str]:
        return sorted(
            h for h, v in self._fk_by_file.get(fn, ()) if v == version
        )

    def holder_files(self, holder: str) -> list[str]:
        return sorted({f for f, _ in self._fk_by_holder.get(holder, ())})

    def delete_fk_holder_file(self, holder: str, fn: str) -> None:
        for v in self.fk_versions(holder, fn):
            self.del_fk(holder, fn, v)

    def delete_fk_file(self, fn: str) -> None:
        for h, v in sorted(self._fk_by_file.get(fn, ())):
            self.del_fk(h, fn, v)

    # -- F

    def put_f(self, t: FTuple) -> None:
        self.f[t.fn] = t
        self._fire()

    def del_f(self, fn: str) -> None:
        del self.f[fn]
        self._fire()


@dataclass(frozen=True)
class KeyRing:
    enc_ref: object  # what others encrypt to (identity or public key)
    dec_key: SymbolicKey
    ver_ref: object  # what others verify against (identity or public key)
    sig_key: SymbolicKey


@dataclass(frozen=True)
class RoleRec:
    version: int
    keys: KeyRing  # replaced wholesale on re-key


class IbeBinding:
    """Identity-based keys: encryption/verification address identities
    directly; private keys are derived by the administrator (who holds the
    master secret, the escrow the scheme is chosen for)."""

    name = "ibe"

    def make_enc_keys(self, p: CryptoProvider, ident: Identity):
        return ident, p.ibe_keygen(ident)

    def make_sig_keys(self, p: CryptoProvider, ident: Identity):
        return ident, p.ibs_keygen(ident)

    def enc(self, p, enc_ref, payload):
        return p.ibe_enc(enc_ref, payload)

    def dec(self, p, dec_key, ct):
        return p.ibe_dec(dec_key, ct)

    def sign(self, p, sig_key, fields):
        return p.ibs_sign(sig_key, fields)

    def verify(self, p, ver_ref, fields, sig):
        return p.ibs_ver(ver_ref, fields, sig)


class PkiBinding:
    """Conventional key pairs: fresh pairs per principal and per role version,
    public halves published in the metadata records.  In add_user the pair is
    generated client-side by the joining user; the counters land in the same
    invoker scope either way."""

    name = "pki"

    def make_enc_keys(self, p: CryptoProvider, ident: Identity):
        return p.pke_gen(ident)

    def make_sig_keys(self, p: CryptoProvider, ident: Identity):
        return p.sig_gen(ident)

    def enc(self, p, enc_ref, payload):
        return p.pke_enc(enc_ref, payload)

    def dec(self, p, dec_key, ct):
        return p.pke_dec(dec_key, ct)

    def sign(self, p, sig_key, fields):
        return p.sig_sign(sig_key, fields)

    def verify(self, p, ver_ref, fields, sig):
        return p.sig_ver(ver_ref, fields, sig)


BINDINGS = {"ibe": IbeBinding, "pki": PkiBinding}


def default_content(fn: str) -> bytes:
    return b"file:" + fn.encode()


class Engine:
    """One mutable enforcement state driven by a single logical thread."""

    def __init__(
        self,
        binding: str | IbeBinding | PkiBinding = "ibe",
        provider: Optional[CryptoProvider] = None,
        versioning: bool = True,
        content_fn: Callable[[str], bytes] = default_content,
    ) -> None:
        self.binding = (
            BINDINGS[binding]() if isinstance(binding, str) else binding
        )
        self.provider = provider if provider is not None else CryptoProvider()
        self.versioning = versioning
        self.content_fn = content_fn
        self.fs = FileStore()
        self.users: dict[str, KeyRing] = {}
        self.roles: dict[str, RoleRec] = {}
        self.files: dict[str, int] = {}
        self.warnings = 0
        self._ver_refs: dict[str, object] = {}  # retained past deletion
        with self.provider.scope(INVOKER):
            self.su = self._mint_keyring(SU_IDENTITY)
        self._ver_refs[SUPERUSER] = self.su.ver_ref

    # -- key plumbing

    def _mint_keyring(self, ident: Identity) -> KeyRing:
        enc_ref, dec_key = self.binding.make_enc_keys(self.provider, ident)
        ver_ref, sig_key = self.binding.make_sig_keys(self.provider, ident)
        return KeyRing(enc_ref, dec_key, ver_ref, sig_key)

    def _keyring_of(self, name: str) -> KeyRing:
        return self.su if name == SUPERUSER else self.users[name]

    def _ver_ref_of(self, ident: Identity) -> object:
        if ident.kind == "role":
            return self.roles[ident.name].keys.ver_ref
        return self._ver_refs[ident.name]

    def _verify(self, ident: Identity, fields: tuple, sig) -> None:
        ok = self.binding.verify(
            self.provider, self._ver_ref_of(ident), fields, sig
        )
        if not ok:
            raise IntegrityError(f"bad signature by {ident} on {fields[0]}")

    def _verify_rk(self, t: RkTuple) -> None:
        self._verify(SU_IDENTITY, rk_fields(t), t.sig)

    def _verify_fk(self, t: FkTuple) -> None:
        self._verify(t.issuer, fk_fields(t), t.sig)

    def _sign_as_su(self, fields: tuple):
        return self.binding.sign(self.provider, self.su.sig_key, fields)

    def _issue_rk(self, member: Identity, role: Identity, ct) -> None:
        sig = self._sign_as_su(("RK", member, role, ct))
        self.fs.put_rk(RkTuple(member, role, ct, sig))

    def _issue_fk(
        self, holder: Identity, fn: str, op: str, version: int, ct
    ) -> None:
        sig = self._sign_as_su(
            ("FK", holder, fn, op, version, ct, SU_IDENTITY)
        )
        self.fs.put_fk(FkTuple(holder, fn, op, version, ct, SU_IDENTITY, sig))

    def _warn(self, message: str) -> None:
        self.warnings += 1

    # -- label dispatch

    def apply_label(self, label: Label) -> None:
        k = label.kind
        if k == "addU":
            self.add_user(label.user)
        elif k == "delU":
            self.del_user(label.user)
        elif k == "addR":
            self.add_role(label.role)
        elif k == "delR":
            self.del_role(label.role)
        elif k == "addP":
            self.add_file(SUPERUSER, label.file, self.content_fn(label.file))
        elif k == "delP":
            self.del_file(label.file)
        elif k == "assignU":
            self.assign_user(label.user, label.role)
        elif k == "revokeU":
            self.revoke_user(label.user, label.role)
        elif k == "assignP":
            self.assign_perm(label.role, label.file, label.op)
        elif k == "revokeP":
            self.revoke_perm(label.role, label.file, label.op)
        else:
            raise AssertionError(k)

    # -- administrative operations

    def add_user(self, u: str) -> None:
        if u == SUPERUSER:
            raise RbacError(f"{SUPERUSER!r} is reserved")
        if u in self.users:
            self._warn(f"addU: {u!r} exists")
            return
        with self.provider.scope(INVOKER):
            ring = self._mint_keyring(user_identity(u))
        self.users[u] = ring
        self._ver_refs[u] = ring.ver_ref

    def del_user(self, u: str) -> None:
        if u not in self.users:
            self._warn(f"delU: {u!r} missing")
            return
        for r in self.fs.member_roles(u):
            with self.provider.scope(INVOKER):
                self._revoke_user_inner(u, r)
        del self.users[u]

    def add_role(self, r: str) -> None:
        if r in self.roles:
            self._warn(f"addR: {r!r} exists")
            return
        with self.provider.scope(INVOKER):
            ident = role_identity(r, 1)
            ring = self._mint_keyring(ident)
            self.roles[r] = RoleRec(1, ring)
            ct = self.binding.enc(
                self.provider,
                self.su.enc_ref,
                ("role-keys", ring.dec_key, ring.sig_key),
            )
            self._issue_rk(SU_IDENTITY, ident, ct)

    def del_role(self, r: str) -> None:
        if r not in self.roles:
            self._warn(f"delR: {r!r} missing")
            return
        rec = self.roles.pop(r)
        self.fs.delete_rk_role_version(r, rec.version)
        for fn in self.fs.holder_files(r):
            with self.provider.scope(INVOKER):
                self._revoke_perm_full(r, fn)

    def add_file(self, uploader: str, fn: str, body: bytes) -> None:
        if fn in self.files:
            self._warn(f"addP: {fn!r} exists")
            return
        if uploader != SUPERUSER and uploader not in self.users:
            raise RbacError(f"addP: no user {uploader!r}")
        with self.provider.scope(INVOKER):
            ring = self._keyring_of(uploader)
            wident = user_identity(uploader)
            k = self.provider.sym_gen()
            body_ct = self.provider.sym_enc(k, body)
            fsig = self.binding.sign(
                self.provider, ring.sig_key, ("F", fn, 1, body_ct, wident)
            )
            ftup = FTuple(fn, 1, body_ct, wident, fsig)
            kct = self.binding.enc(self.provider, self.su.enc_ref, k)
            fkf = ("FK", SU_IDENTITY, fn, RW, 1, kct, wident)
            fksig = self.binding.sign(self.provider, ring.sig_key, fkf)
            fktup = FkTuple(SU_IDENTITY, fn, RW, 1, kct, wident, fksig)
        with self.provider.scope(REFERENCE_MONITOR):
            self._verify(wident, f_fields(ftup), ftup.sig)
            self._verify(wident, fk_fields(fktup), fktup.sig)
        self.files[fn] = 1
        self.fs.put_f(ftup)
        self.fs.put_fk(fktup)

    def del_file(self, fn: str) -> None:
        if fn not in self.files:
            self._warn(f"delP: {fn!r} missing")
            return
        del self.files[fn]
        self.fs.del_f(fn)
        self.fs.delete_fk_file(fn)

    def assign_user(self, u: str, r: str) -> None:
        if u not in self.users:
            raise RbacError(f"assignU: no user {u!r}")
        if r not in self.roles:
            raise RbacError(f"assignU: no role {r!r}")
        v = self.roles[r].version
        if (u, r, v) in self.fs.rk:
            self._warn(f"assignU: {u!r} already in {r!r}")
            return
        with self.provider.scope(INVOKER):
            sut = self.fs.rk[(SUPERUSER, r, v)]
            self._verify_rk(sut)
            payload = self.binding.dec(self.provider, self.su.dec_key, sut.ct)
            ct = self.binding.enc(
                self.provider, self.users[u].enc_ref, payload
            )
            self._issue_rk(user_identity(u), role_identity(r, v), ct)

    def revoke_user(self, u: str, r: str) -> None:
        if u not in self.users:
            raise RbacError(f"revokeU: no user {u!r}")
        if r not in self.roles:
            raise RbacError(f"revokeU: no role {r!r}")
        if (u, r, self.roles[r].version) not in self.fs.rk:
            self._warn(f"revokeU: {u!r} not in {r!r}")
            return
        with self.provider.scope(INVOKER):
            self._revoke_user_inner(u, r)

    def _revoke_user_inner(self, u: str, r: str) -> None:
        rec = self.roles[r]
        v = rec.version
        if not self.versioning:
            # naive deletion, for mutation testing only: the member's tuple
            # goes away but neither the role nor the file keys are rolled
            self.fs.del_rk(u, r, v)
            return
        new_ident = role_identity(r, v + 1)
        new_ring = self._mint_keyring(new_ident)
        payload = ("role-keys", new_ring.dec_key, new_ring.sig_key)
        for m in self.fs.rk_members(r, v):
            if m == u:
                continue
            self._verify_rk(self.fs.rk[(m, r, v)])
            ct = self.binding.enc(
                self.provider, self._keyring_of(m).enc_ref, payload
            )
            self._issue_rk(user_identity(m), new_ident, ct)
        for fn in self.fs.holder_files(r):
            # roll the role's own wrapped file keys onto the new role keys
            for vv in self.fs.fk_versions(r, fn):
                old = self.fs.fk[(r, fn, vv)]
                self._verify_fk(old)
                key_payload = self.binding.dec(
                    self.provider, rec.keys.dec_key, old.ct
                )
                ct = self.binding.enc(
                    self.provider, new_ring.enc_ref, key_payload
                )
                self._issue_fk(new_ident, fn, old.op, vv, ct)
            self._issue_new_file_key(fn, {r: (new_ident, new_ring.enc_ref)})
        self.roles[r] = RoleRec(v + 1, new_ring)
        self.fs.delete_rk_role_version(r, v)

    def _issue_new_file_key(
        self, fn: str, role_overrides: dict[str, tuple[Identity, object]]
    ) -> None:
        """Mint a fresh file key and wrap it for every current holder, at the
        next file-key version; then make that version current."""
        vfn = self.files[fn]
        k2 = self.provider.sym_gen()
        for h in self.fs.fk_holders_at(fn, vfn):
            old = self.fs.fk[(h, fn, vfn)]
            self._verify_fk(old)
            if h == SUPERUSER:
                ident, ref = SU_IDENTITY, self.su.enc_ref
            elif h in role_overrides:
                ident, ref = role_overrides[h]
            else:
                rrec = self.roles[h]
                ident, ref = role_identity(h, rrec.version), rrec.keys.enc_ref
            ct = self.binding.enc(self.provider, ref, k2)
            self._issue_fk(ident, fn, old.op, vfn + 1, ct)
        self.files[fn] = vfn + 1

    def assign_perm(self, r: str, fn: str, op: str) -> None:
        if op not in (READ, RW):
            raise RbacError(f"assignP: bad op {op!r}")
        if r not in self.roles:
            raise RbacError(f"assignP: no role {r!r}")
        if fn not in self.files:
            raise RbacError(f"assignP: no file {fn!r}")
        cur = self.fs.fk.get((r, fn, self.files[fn]))
        held = cur.op if cur is not None else None
        if held == RW or held == op:
            self._warn(f"assignP: {r!r} already holds {held} on {fn!r}")
            return
        with self.provider.scope(INVOKER):
            if held == READ:
                # add write to existing read: re-sign each version in place
                for vv in self.fs.fk_versions(r, fn):
                    old = self.fs.fk[(r, fn, vv)]
                    self._verify_fk(old)
                    self._issue_fk(old.holder, fn, RW, vv, old.ct)
            else:
                # fresh grant: copy SU's wrapped key at every version
                rrec = self.roles[r]
                rident = role_identity(r, rrec.version)
                for vv in self.fs.fk_versions(SUPERUSER, fn):
                    sut = self.fs.fk[(SUPERUSER, fn, vv)]
                    self._verify_fk(sut)
                    k = self.binding.dec(
                        self.provider, self.su.dec_key, sut.ct
                    )
                    ct = self.binding.enc(
                        self.provider, rrec.keys.enc_ref, k
                    )
                    self._issue_fk(rident, fn, op, vv, ct)

    def revoke_perm(self, r: str, fn: str, op: str) -> None:
        if op not in (WRITE, RW):
            raise RbacError(f"revokeP: bad op {op!r}")
        if r not in self.roles:
            raise RbacError(f"revokeP: no role {r!r}")
        if fn not in self.files:
            raise RbacError(f"revokeP: no file {fn!r}")
        cur = self.fs.fk.get((r, fn, self.files[fn]))
        held = cur.op if cur is not None else None
        if held is None:
            self._warn(f"revokeP: {r!r} holds nothing on {fn!r}")
            return
        if op == WRITE:
            if held != RW:
                self._warn(f"revokeP: {r!r} holds no write on {fn!r}")
                return
            with self.provider.scope(INVOKER):
                for vv in self.fs.fk_versions(r, fn):
                    old = self.fs.fk[(r, fn, vv)]
                    self._verify_fk(old)
                    self._issue_fk(old.holder, fn, READ, vv, old.ct)
            return
        with self.provider.scope(INVOKER):
            self._revoke_perm_full(r, fn)

    def _revoke_perm_full(self, r: str, fn: str) -> None:
        self.fs.delete_fk_holder_file(r, fn)
        if not self.versioning:
            return
        self._issue_new_file_key(fn, {})

    # -- data path

    def _qualifying_roles(self, u: str, fn: str, version: int, write: bool):
        out = []
        for rn in self.fs.member_roles(u):
            rec = self.roles.get(rn)
            if rec is None or (u, rn, rec.version) not in self.fs.rk:
                continue
            t = self.fs.fk.get((rn, fn, version))
            if t is None or (write and t.op != RW):
                continue
            out.append(rn)
        return out

    def read_file(self, u: str, fn: str) -> bytes:
        if u not in self.users:
            raise RbacError(f"read: no user {u!r}")
        if fn not in self.files:
            raise RbacError(f"read: no file {fn!r}")
        ft = self.fs.f[fn]
        roles = self._qualifying_roles(u, fn, ft.version, write=False)
        if not roles:
            raise AuthorizationError(f"{u!r} may not read {fn!r}")
        r = roles[0]  # lexicographically least qualifying role
        with self.provider.scope(INVOKER):
            rkt = self.fs.rk[(u, r, self.roles[r].version)]
            self._verify_rk(rkt)
            _, role_dec, _ = self.binding.dec(
                self.provider, self.users[u].dec_key, rkt.ct
            )
            fkt = self.fs.fk[(r, fn, ft.version)]
            self._verify_fk(fkt)
            k = self.binding.dec(self.provider, role_dec, fkt.ct)
            return self.provider.sym_dec(k, ft.body)

    def write_file(self, u: str, fn: str, body: bytes) -> None:
        if u not in self.users:
            raise RbacError(f"write: no user {u!r}")
        if fn not in self.files:
            raise RbacError(f"write: no file {fn!r}")
        vfn = self.files[fn]
        roles = self._qualifying_roles(u, fn, vfn, write=True)
        if not roles:
            raise AuthorizationError(f"{u!r} may not write {fn!r}")
        r = roles[0]
        with self.provider.scope(INVOKER):
            rkt = self.fs.rk[(u, r, self.roles[r].version)]
            self._verify_rk(rkt)
            _, role_dec, role_sig = self.binding.dec(
                self.provider, self.users[u].dec_key, rkt.ct
            )
            fkt = self.fs.fk[(r, fn, vfn)]
            self._verify_fk(fkt)
            k = self.binding.dec(self.provider, role_dec, fkt.ct)
            body_ct = self.provider.sym_enc(k, body)
            wident = role_identity(r, self.roles[r].version)
            fsig = self.binding.sign(
                self.provider, role_sig, ("F", fn, vfn, body_ct, wident)
            )
            ftup = FTuple(fn, vfn, body_ct, wident, fsig)
        with self.provider.scope(REFERENCE_MONITOR):
            if ftup.version != self.files[fn]:
                raise IntegrityError(f"stale write to {fn!r}")
            self._verify(wident, f_fields(ftup), ftup.sig)
            self._verify_fk(fkt)
        self.fs.put_f(ftup)

    # -- counted query forms

    def query_member(self, u: str, r: str) -> bool:
        rec = self.roles.get(r)
        if rec is None:
            return False
        t = self.fs.rk.get((u, r, rec.version))
        if t is None:
            return False
        return self.binding.verify(
            self.provider, self._ver_ref_of(SU_IDENTITY), rk_fields(t), t.sig
        )

    def query_holds(self, r: str, fn: str, op: str) -> bool:
        if fn not in self.files:
            return False
        t = self.fs.fk.get((r, fn, self.files[fn]))
        if t is None or t.op != op or t.issuer != SU_IDENTITY:
            return False
        return self.binding.verify(
            self.provider, self._ver_ref_of(t.issuer), fk_fields(t), t.sig
        )

    def query_role(self, r: str) -> bool:
        return r in self.roles

    def query_auth(self, u: str, fn: str, op: str) -> bool:
        if fn not in self.files:
            return False
        vfn = self.files[fn]
        for rn in self.fs.member_roles(u):
            rec = self.roles.get(rn)
            if rec is None:
                continue
            t = self.fs.fk.get((rn, fn, vfn))
            if t is None or not grants(t.op, op) or t.issuer != SU_IDENTITY:
                continue
            if self.query_member(u, rn) and self.binding.verify(
                self.provider, self._ver_ref_of(t.issuer), fk_fields(t), t.sig
            ):
                return True
        return False

    # -- instrumentation (uncounted index walks)

    def theory(self) -> frozenset[tuple]:
        """True ground facts, named as the reference model names them."""
        facts: set[tuple] = set()
        role_grant: dict[str, set[tuple[str, str]]] = {}
        for rn, rec in self.roles.items():
            facts.add(("R", rn))
            role_grant[rn] = set()
        for fn, vfn in self.files.items():
            for h, v in self.fs._fk_by_file.get(fn, ()):
                if v != vfn or h == SUPERUSER:
                    continue
                t = self.fs.fk[(h, fn, v)]
                if h in role_grant:
                    facts.add(("PA", h, fn, t.op))
                    role_grant[h].add((fn, READ))
                    if t.op == RW:
                        role_grant[h].add((fn, RW))
        for u in self.users:
            for rn, v in self.fs._rk_by_member.get(u, ()):
                rec = self.roles.get(rn)
                if rec is None or v != rec.version:
                    continue
                facts.add(("UR", u, rn))
                for fact in role_grant[rn]:
                    facts.add(("auth", u) + fact)
        return frozenset(facts)

    def auth_facts(self) -> frozenset[tuple]:
        return frozenset(f for f in self.theory() if f[0] == "auth")

    def dump(self) -> tuple:
        """Raw state for exact-equality comparisons."""
        return (
            frozenset(self.users),
            tuple(sorted((r, rec.version) for r, rec in self.roles.items())),
            tuple(sorted(self.files.items())),
            frozenset(self.fs.rk.items()),
            frozenset(self.fs.fk.items()),
            frozenset(self.fs.f.items()),
        )

    def stats(self) -> StateStats:
        members = {
            r: frozenset(
                m
                for m in self.fs.rk_members(r, rec.version)
                if m != SUPERUSER
            )
            for r, rec in self.roles.items()
        }
        role_files = {
            r: {
                fn: self.fs.fk[(r, fn, self.files[fn])].op
                for fn in self.fs.holder_files(r)
            }
            for r in self.roles
        }
        file_holders = {
            fn: frozenset(
                h
                for h in self.fs.fk_holders_at(fn, vfn)
                if h != SUPERUSER
            )
            for fn, vfn in self.files.items()
        }
        user_roles = {
            u: frozenset(self.fs.member_roles(u)) for u in self.users
        }
        return StateStats(
            members=members,
            role_files=role_files,
            file_versions=dict(self.files),
            file_holders=file_holders,
            user_roles=user_roles,
        )


def measure_label(engine: Engine, label: Label) -> CostVector:
    """Apply one label and return the primitive-operation delta it caused."""
    before = engine.provider.snapshot()
    engine.apply_label(label)
    return engine.provider.diff_since(before)
