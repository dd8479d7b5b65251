"""Symbolic cryptography with per-principal operation counting.

Keys, ciphertexts and signatures are inert records rather than bitstrings.
Encryption is deterministic (equal inputs give equal records); decryption
succeeds only when the presented key matches the ciphertext's recipient
exactly, and a mismatch raises and is recorded as an unauthorized-decryption
event.  Every primitive invocation increments a named counter attributed to
the principal currently on the scope stack (``invoker`` unless a
``reference_monitor`` scope is active).

Two families share one provider so a single engine can run against either:
identity-based primitives (ibe_*/ibs_*: encrypt/verify against an identity)
and conventional public-key primitives (pke_*/sig_*: encrypt/verify against a
generated public key object).
"""

from __future__ import annotations

import hashlib
import itertools
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional

INVOKER = "invoker"
REFERENCE_MONITOR = "reference_monitor"

PRINCIPALS = (INVOKER, REFERENCE_MONITOR)

OP_NAMES = (
    "ibe_keygen",
    "ibe_enc",
    "ibe_dec",
    "ibs_keygen",
    "ibs_sign",
    "ibs_ver",
    "pke_gen",
    "pke_enc",
    "pke_dec",
    "sig_gen",
    "sig_sign",
    "sig_ver",
    "sym_gen",
    "sym_enc",
    "sym_dec",
)

#: Counter renaming that maps identity-based measurements onto the
#: conventional public-key family (used for cross-variant comparisons).
IBE_TO_PKI = {
    "ibe_keygen": "pke_gen",
    "ibe_enc": "pke_enc",
    "ibe_dec": "pke_dec",
    "ibs_keygen": "sig_gen",
    "ibs_sign": "sig_sign",
    "ibs_ver": "sig_ver",
}
PKI_TO_IBE = {v: k for k, v in IBE_TO_PKI.items()}


@dataclass(frozen=True)
class Identity:
    """A principal a key can be derived for: a user, a role version, or SU."""

    kind: str  # "user" | "role" | "superuser"
    name: str
    version: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in ("user", "role", "superuser"):
            raise ValueError(f"bad identity kind {self.kind!r}")
        if (self.kind == "role") != (self.version is not None):
            raise ValueError("exactly role identities carry a version")

    def __str__(self) -> str:
        if self.kind == "role":
            return f"({self.name},v{self.version})"
        return self.name


SU_IDENTITY = Identity("superuser", "SU")


def user_identity(name: str) -> Identity:
    return SU_IDENTITY if name == "SU" else Identity("user", name)


def role_identity(name: str, version: int) -> Identity:
    return Identity("role", name, version)


@dataclass(frozen=True)
class SymbolicKey:
    """A key record.  alg is one of:
    ibe-dec, ibs-sign (identity-derived private keys);
    pke-pub, pke-priv, sig-ver, sig-sign (generated pairs, matched by serial);
    sym (fresh symmetric keys, matched by serial).
    """

    alg: str
    owner: Optional[Identity] = None
    serial: Optional[int] = None


@dataclass(frozen=True)
class SymbolicCiphertext:
    """Deterministic ciphertext: recipient reference plus structural payload."""

    alg: str  # "ibe" | "pke" | "sym"
    recipient: object  # Identity (ibe), SymbolicKey pke-pub (pke) or sym (sym)
    payload: object


@dataclass(frozen=True)
class SymbolicSignature:
    alg: str  # "ibs" | "sig"
    signer: Identity
    key_serial: Optional[int]  # None for ibs
    digest: bytes


class UnauthorizedDecrypt(Exception):
    """Decryption was attempted with a key that does not match the recipient."""


class CostVector:
    """An immutable bag of (principal, op) counts with exact arithmetic."""

    __slots__ = ("_counts",)

    def __init__(self, counts: Optional[Mapping[tuple[str, str], int]] = None):
        c = Counter()
        if counts:
            for k, v in counts.items():
                if v:
                    c[k] = v
        self._counts = c

    def get(self, op: str, principal: Optional[str] = None) -> int:
        if principal is not None:
            return self._counts.get((principal, op), 0)
        return sum(v for (_, o), v in self._counts.items() if o == op)

    def by_principal(self, principal: str) -> dict[str, int]:
        return {
            o: v for (p, o), v in sorted(self._counts.items()) if p == principal
        }

    def totals(self) -> dict[str, int]:
        out: Counter = Counter()
        for (_, o), v in self._counts.items():
            out[o] += v
        return dict(sorted(out.items()))

    def items(self) -> list[tuple[tuple[str, str], int]]:
        return sorted(self._counts.items())

    def renamed(self, mapping: Mapping[str, str]) -> "CostVector":
        c: Counter = Counter()
        for (p, o), v in self._counts.items():
            c[(p, mapping.get(o, o))] += v
        return CostVector(c)

    def __add__(self, other: "CostVector") -> "CostVector":
        return CostVector(self._counts + other._counts)

    def __sub__(self, other: "CostVector") -> "CostVector":
        c = Counter(self._counts)
        c.subtract(other._counts)
        return CostVector(c)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CostVector) and self._counts == other._counts

    def __bool__(self) -> bool:
        return any(self._counts.values())

    def __repr__(self) -> str:
        parts = [f"{p}.{o}={v}" for (p, o), v in self.items()]
        return f"CostVector({', '.join(parts)})"


# --- canonical serialization --------------------------------------------------
#
# Tuples are signed over a canonical byte form: a one-byte type tag, a 4-byte
# big-endian length, then the body, recursively for structured fields, fields
# concatenated in declared order.

def canonical_bytes(value: object) -> bytes:
    tag, body = _encode(value)
    return tag + len(body).to_bytes(4, "big") + body


def _encode(value: object) -> tuple[bytes, bytes]:
    if value is None:
        return b"N", b""
    if isinstance(value, bool):
        return b"O", b"\x01" if value else b"\x00"
    if isinstance(value, int):
        return b"I", str(value).encode()
    if isinstance(value, str):
        return b"S", value.encode()
    if isinstance(value, bytes):
        return b"B", value
    if isinstance(value, Identity):
        return b"D", b"".join(
            canonical_bytes(x) for x in (value.kind, value.name, value.version)
        )
    if isinstance(value, SymbolicKey):
        return b"K", b"".join(
            canonical_bytes(x) for x in (value.alg, value.owner, value.serial)
        )
    if isinstance(value, SymbolicCiphertext):
        return b"C", b"".join(
            canonical_bytes(x)
            for x in (value.alg, value.recipient, value.payload)
        )
    if isinstance(value, SymbolicSignature):
        return b"G", b"".join(
            canonical_bytes(x)
            for x in (value.alg, value.signer, value.key_serial, value.digest)
        )
    if isinstance(value, (tuple, list)):
        return b"T", b"".join(canonical_bytes(x) for x in value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def digest_fields(fields: tuple) -> bytes:
    return hashlib.sha256(canonical_bytes(fields)).digest()


class CryptoProvider:
    """Counts primitive invocations and evaluates the symbolic algebra."""

    def __init__(self) -> None:
        self._counts: Counter = Counter()
        self._scopes: list[str] = []
        self._serials = itertools.count(1)
        self.unauthorized_events: list[tuple] = []

    # -- scopes and accounting

    @property
    def principal(self) -> str:
        return self._scopes[-1] if self._scopes else INVOKER

    @contextmanager
    def scope(self, principal: str) -> Iterator[None]:
        if principal not in PRINCIPALS:
            raise ValueError(f"unknown principal {principal!r}")
        self._scopes.append(principal)
        try:
            yield
        finally:
            self._scopes.pop()

    def _count(self, op: str) -> None:
        self._counts[(self.principal, op)] += 1

    def snapshot(self) -> CostVector:
        return CostVector(self._counts)

    def diff_since(self, snap: CostVector) -> CostVector:
        return self.snapshot() - snap

    # -- identity-based family

    def ibe_keygen(self, ident: Identity) -> SymbolicKey:
        self._count("ibe_keygen")
        return SymbolicKey("ibe-dec", owner=ident)

    def ibe_enc(self, ident: Identity, payload: object) -> SymbolicCiphertext:
        self._count("ibe_enc")
        return SymbolicCiphertext("ibe", ident, payload)

    def ibe_dec(self, key: SymbolicKey, ct: SymbolicCiphertext) -> object:
        self._count("ibe_dec")
        if ct.alg != "ibe" or key.alg != "ibe-dec" or key.owner != ct.recipient:
            self.unauthorized_events.append(("ibe_dec", key, ct))
            raise UnauthorizedDecrypt(
                f"key for {key.owner} cannot open ciphertext to {ct.recipient}"
            )
        return ct.payload

    def ibs_keygen(self, ident: Identity) -> SymbolicKey:
        self._count("ibs_keygen")
        return SymbolicKey("ibs-sign", owner=ident)

    def ibs_sign(self, key: SymbolicKey, fields: tuple) -> SymbolicSignature:
        self._count("ibs_sign")
        if key.alg != "ibs-sign":
            raise TypeError("ibs_sign requires an ibs-sign key")
        return SymbolicSignature("ibs", key.owner, None, digest_fields(fields))

    def ibs_ver(
        self, ident: Identity, fields: tuple, sig: SymbolicSignature
    ) -> bool:
        self._count("ibs_ver")
        return (
            sig.alg == "ibs"
            and sig.signer == ident
            and sig.digest == digest_fields(fields)
        )

    # -- conventional public-key family

    def pke_gen(self, owner: Identity) -> tuple[SymbolicKey, SymbolicKey]:
        self._count("pke_gen")
        n = next(self._serials)
        return (
            SymbolicKey("pke-pub", owner=owner, serial=n),
            SymbolicKey("pke-priv", owner=owner, serial=n),
        )

    def pke_enc(self, pub: SymbolicKey, payload: object) -> SymbolicCiphertext:
        self._count("pke_enc")
        if pub.alg != "pke-pub":
            raise TypeError("pke_enc requires a pke-pub key")
        return SymbolicCiphertext("pke", pub, payload)

    def pke_dec(self, priv: SymbolicKey, ct: SymbolicCiphertext) -> object:
        self._count("pke_dec")
        ok = (
            ct.alg == "pke"
            and priv.alg == "pke-priv"
            and isinstance(ct.recipient, SymbolicKey)
            and priv.serial == ct.recipient.serial
        )
        if not ok:
            self.unauthorized_events.append(("pke_dec", priv, ct))
            raise UnauthorizedDecrypt(
                f"key {priv.serial} cannot open ciphertext to {ct.recipient}"
            )
        return ct.payload

    def sig_gen(self, owner: Identity) -> tuple[SymbolicKey, SymbolicKey]:
        self._count("sig_gen")
        n = next(self._serials)
        return (
            SymbolicKey("sig-ver", owner=owner, serial=n),
            SymbolicKey("sig-sign", owner=owner, serial=n),
        )

    def sig_sign(self, key: SymbolicKey, fields: tuple) -> SymbolicSignature:
        self._count("sig_sign")
        if key.alg != "sig-sign":
            raise TypeError("sig_sign requires a sig-sign key")
        return SymbolicSignature(
            "sig", key.owner, key.serial, digest_fields(fields)
        )

    def sig_ver(
        self, ver: SymbolicKey, fields: tuple, sig: SymbolicSignature
    ) -> bool:
        self._count("sig_ver")
        return (
            sig.alg == "sig"
            and ver.alg == "sig-ver"
            and sig.key_serial == ver.serial
            and sig.digest == digest_fields(fields)
        )

    # -- symmetric family

    def sym_gen(self) -> SymbolicKey:
        self._count("sym_gen")
        return SymbolicKey("sym", serial=next(self._serials))

    def sym_enc(self, key: SymbolicKey, payload: object) -> SymbolicCiphertext:
        self._count("sym_enc")
        if key.alg != "sym":
            raise TypeError("sym_enc requires a sym key")
        return SymbolicCiphertext("sym", key, payload)

    def sym_dec(self, key: SymbolicKey, ct: SymbolicCiphertext) -> object:
        self._count("sym_dec")
        if ct.alg != "sym" or key != ct.recipient:
            self.unauthorized_events.append(("sym_dec", key, ct))
            raise UnauthorizedDecrypt("wrong symmetric key")
        return ct.payload
