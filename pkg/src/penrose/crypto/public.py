"""Paillier public-key operations.

This module never touches private key material; the aggregation server and
agents import only from here.  Generator is ``g = n + 1`` so encryption is
``(1 + m*n) * r^n mod n^2``.
"""
from __future__ import annotations

import base64
import hashlib
import secrets
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import gmpy2
from gmpy2 import mpz

SUPPORTED_BITS = (1024, 2048, 3072)
DEFAULT_BITS = 2048
FINGERPRINT_BYTES = 8

_BEGIN = "-----BEGIN PENROSE PAILLIER PUBLIC KEY-----"
_END = "-----END PENROSE PAILLIER PUBLIC KEY-----"


class CryptoError(ValueError):
    pass


class KeyMismatchError(CryptoError):
    pass


class MalformedCiphertextError(CryptoError):
    pass


def _int_to_bytes(x: int, width: int) -> bytes:
    return int(x).to_bytes(width, "big")


@dataclass(frozen=True, eq=False)
class PublicKey:
    n: mpz

    def __post_init__(self):
        object.__setattr__(self, "n", mpz(self.n))
        object.__setattr__(self, "n_squared", self.n * self.n)

    @property
    def g(self) -> mpz:
        return self.n + 1

    @property
    def bits(self) -> int:
        return int(self.n.bit_length())

    @property
    def ciphertext_bytes(self) -> int:
        """Serialized ciphertext width: twice the key size, in bytes."""
        return 2 * ((self.bits + 7) // 8)

    @property
    def fingerprint(self) -> bytes:
        width = (self.bits + 7) // 8
        return hashlib.sha256(_int_to_bytes(self.n, width)).digest()[:FINGERPRINT_BYTES]

    def __eq__(self, other):
        return isinstance(other, PublicKey) and self.n == other.n

    def __hash__(self):
        return hash(int(self.n))

    # -- primitive operations ------------------------------------------------

    def random_r(self) -> mpz:
        while True:
            r = mpz(secrets.randbelow(int(self.n) - 1) + 1)
            if gmpy2.gcd(r, self.n) == 1:
                return r

    def obfuscator(self) -> mpz:
        """r^n mod n^2, an encryption of zero."""
        return gmpy2.powmod(self.random_r(), self.n, self.n_squared)

    def encrypt(self, m: int, r: int | None = None) -> mpz:
        m = mpz(m)
        if m < 0 or m >= self.n:
            raise CryptoError("plaintext outside [0, n)")
        rn = self.obfuscator() if r is None else gmpy2.powmod(mpz(r), self.n, self.n_squared)
        return (1 + m * self.n) % self.n_squared * rn % self.n_squared

    def check(self, c: int) -> mpz:
        c = mpz(c)
        if c <= 0 or c >= self.n_squared:
            raise MalformedCiphertextError("ciphertext outside (0, n^2)")
        return c

    def add(self, c1: int, c2: int) -> mpz:
        return mpz(c1) * mpz(c2) % self.n_squared

    def add_plain(self, c: int, m: int) -> mpz:
        return mpz(c) * ((1 + mpz(m) * self.n) % self.n_squared) % self.n_squared

    def rerandomize(self, c: int) -> mpz:
        return mpz(c) * self.obfuscator() % self.n_squared

    # -- serialization -------------------------------------------------------

    def ct_to_bytes(self, c: int) -> bytes:
        return _int_to_bytes(c, self.ciphertext_bytes)

    def ct_from_bytes(self, data: bytes) -> mpz:
        if len(data) != self.ciphertext_bytes:
            raise MalformedCiphertextError(f"ciphertext must be {self.ciphertext_bytes} bytes")
        return self.check(int.from_bytes(data, "big"))

    def dumps(self) -> str:
        width = (self.bits + 7) // 8
        body = base64.b64encode(_int_to_bytes(self.n, width)).decode("ascii")
        lines = [_BEGIN, f"key-bits: {self.bits}", f"fingerprint: {self.fingerprint.hex()}", ""]
        lines += [body[i:i + 64] for i in range(0, len(body), 64)]
        lines.append(_END)
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PublicKey":
        lines = [ln.strip() for ln in text.strip().splitlines()]
        if not lines or lines[0] != _BEGIN or lines[-1] != _END:
            raise CryptoError("not a public key envelope")
        headers, body = {}, []
        for ln in lines[1:-1]:
            if ":" in ln:
                k, v = ln.split(":", 1)
                headers[k.strip()] = v.strip()
            elif ln:
                body.append(ln)
        n = int.from_bytes(base64.b64decode("".join(body)), "big")
        pk = cls(mpz(n))
        if "key-bits" in headers and int(headers["key-bits"]) != pk.bits:
            raise CryptoError(f"key-bits header {headers['key-bits']} != modulus size {pk.bits}")
        if "fingerprint" in headers and headers["fingerprint"] != pk.fingerprint.hex():
            raise CryptoError("fingerprint header does not match modulus")
        return pk

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="ascii")

    @classmethod
    def load(cls, path: str | Path) -> "PublicKey":
        return cls.loads(Path(path).read_text(encoding="ascii"))


def encrypt(pk: PublicKey, m: int) -> mpz:
    return pk.encrypt(m)


def homomorphic_add(pk: PublicKey, c1: int, c2: int) -> mpz:
    return pk.add(c1, c2)


@dataclass
class EncryptedHistogram:
    snippet_hash: bytes
    counter_id: int
    bins: list
    key_fingerprint: bytes

    @property
    def bin_count(self) -> int:
        return len(self.bins)

    def to_bytes(self, pk: PublicKey) -> bytes:
        return b"".join(pk.ct_to_bytes(c) for c in self.bins)


def encrypt_histogram(pk: PublicKey, snippet_hash: bytes, counter_id: int,
                      values: Sequence[int]) -> EncryptedHistogram:
    return EncryptedHistogram(snippet_hash, counter_id, [pk.encrypt(int(v)) for v in values],
                              pk.fingerprint)


def add_histograms(pk: PublicKey, a: EncryptedHistogram, b: EncryptedHistogram) -> EncryptedHistogram:
    """Bin-wise homomorphic sum; keeps ``a``'s snippet hash."""
    if a.key_fingerprint != pk.fingerprint or b.key_fingerprint != pk.fingerprint:
        raise KeyMismatchError("histogram encrypted under a different key")
    if a.counter_id != b.counter_id:
        raise CryptoError(f"counter mismatch {a.counter_id} vs {b.counter_id}")
    if a.bin_count != b.bin_count:
        raise CryptoError(f"bin count mismatch {a.bin_count} vs {b.bin_count}")
    n2 = pk.n_squared
    return EncryptedHistogram(a.snippet_hash, a.counter_id,
                              [x * y % n2 for x, y in zip(a.bins, b.bins)], a.key_fingerprint)


def rerandomize_histogram(pk: PublicKey, h: EncryptedHistogram) -> EncryptedHistogram:
    return EncryptedHistogram(h.snippet_hash, h.counter_id, [pk.rerandomize(c) for c in h.bins],
                              h.key_fingerprint)
