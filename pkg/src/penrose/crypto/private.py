"""Paillier key generation, CRT decryption and private key files.

Only the designer console imports this module.
"""
from __future__ import annotations

import base64
import json
import os
import secrets
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import gmpy2
from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt
from gmpy2 import mpz

from .public import (SUPPORTED_BITS, CryptoError, EncryptedHistogram, KeyMismatchError,
                     PublicKey)

MR_ROUNDS = 64
KEY_FILE_FORMAT = "penrose-paillier-private/1"


class KeyFileError(CryptoError):
    pass


def _random_prime(bits: int) -> mpz:
    while True:
        # top two bits set so p*q has exactly 2*bits bits
        c = mpz(secrets.randbits(bits)) | (mpz(3) << (bits - 2)) | 1
        if gmpy2.is_prime(c, MR_ROUNDS):
            return c


@dataclass(frozen=True, eq=False)
class PrivateKey:
    public: PublicKey
    p: mpz
    q: mpz

    def __post_init__(self):
        p, q = mpz(self.p), mpz(self.q)
        if p == q or p * q != self.public.n:
            raise CryptoError("p and q do not factor the public modulus")
        if p > q:
            p, q = q, p
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "_p2", p * p)
        object.__setattr__(self, "_q2", q * q)
        object.__setattr__(self, "_hp", self._h(p, p * p))
        object.__setattr__(self, "_hq", self._h(q, q * q))
        object.__setattr__(self, "_q_inv", gmpy2.invert(q, p))

    def _h(self, x: mpz, x2: mpz) -> mpz:
        g = self.public.n + 1
        return gmpy2.invert((gmpy2.powmod(g, x - 1, x2) - 1) // x, x)

    @property
    def lam(self) -> mpz:
        return gmpy2.lcm(self.p - 1, self.q - 1)

    @property
    def mu(self) -> mpz:
        n = self.public.n
        u = gmpy2.powmod(n + 1, self.lam, n * n)
        return gmpy2.invert((u - 1) // n, n)

    def decrypt(self, c: int) -> int:
        c = self.public.check(c)
        p, q = self.p, self.q
        mp = (gmpy2.powmod(c, p - 1, self._p2) - 1) // p * self._hp % p
        mq = (gmpy2.powmod(c, q - 1, self._q2) - 1) // q * self._hq % q
        return int(mq + (mp - mq) * self._q_inv % p * q)

    def decrypt_plain(self, c: int) -> int:
        """Textbook (non-CRT) decryption, kept as a cross-check."""
        n = self.public.n
        c = self.public.check(c)
        return int((gmpy2.powmod(c, self.lam, n * n) - 1) // n * self.mu % n)

    # -- key file ------------------------------------------------------------

    def to_file_bytes(self, passphrase: bytes) -> bytes:
        salt, nonce = os.urandom(16), os.urandom(12)
        key = Scrypt(salt=salt, length=32, n=2 ** 14, r=8, p=1).derive(passphrase)
        width = (self.p.bit_length() + 7) // 8
        secret = int(self.p).to_bytes(width, "big") + int(self.q).to_bytes(width, "big")
        aad = self.public.fingerprint
        doc = {
            "format": KEY_FILE_FORMAT,
            "key_bits": self.public.bits,
            "fingerprint": self.public.fingerprint.hex(),
            "n": base64.b64encode(int(self.public.n).to_bytes((self.public.bits + 7) // 8, "big")).decode(),
            "kdf": {"name": "scrypt", "n": 2 ** 14, "r": 8, "p": 1, "salt": salt.hex()},
            "nonce": nonce.hex(),
            "ciphertext": base64.b64encode(AESGCM(key).encrypt(nonce, secret, aad)).decode(),
        }
        return (json.dumps(doc, indent=2) + "\n").encode()

    @classmethod
    def from_file_bytes(cls, data: bytes, passphrase: bytes) -> "PrivateKey":
        try:
            doc = json.loads(data)
            if doc.get("format") != KEY_FILE_FORMAT:
                raise KeyFileError(f"unknown key file format {doc.get('format')!r}")
            kdf = doc["kdf"]
            key = Scrypt(salt=bytes.fromhex(kdf["salt"]), length=32, n=kdf["n"], r=kdf["r"],
                         p=kdf["p"]).derive(passphrase)
            pub = PublicKey(mpz(int.from_bytes(base64.b64decode(doc["n"]), "big")))
            secret = AESGCM(key).decrypt(bytes.fromhex(doc["nonce"]),
                                         base64.b64decode(doc["ciphertext"]), pub.fingerprint)
        except InvalidTag:
            raise KeyFileError("wrong passphrase or corrupted key file") from None
        except (KeyError, ValueError, TypeError) as exc:
            raise KeyFileError(f"malformed key file: {exc}") from None
        half = len(secret) // 2
        return cls(pub, mpz(int.from_bytes(secret[:half], "big")),
                   mpz(int.from_bytes(secret[half:], "big")))

    def save(self, path: str | Path, passphrase: bytes) -> None:
        path = Path(path)
        path.write_bytes(self.to_file_bytes(passphrase))
        os.chmod(path, 0o600)

    @classmethod
    def load(cls, path: str | Path, passphrase: bytes) -> "PrivateKey":
        return cls.from_file_bytes(Path(path).read_bytes(), passphrase)


def keygen(bits: int = 2048) -> tuple[PublicKey, PrivateKey]:
    if bits not in SUPPORTED_BITS:
        raise CryptoError(f"key size must be one of {SUPPORTED_BITS}")
    half = bits // 2
    while True:
        p, q = _random_prime(half), _random_prime(half)
        if p != q and gmpy2.gcd(p * q, (p - 1) * (q - 1)) == 1:
            break
    pk = PublicKey(p * q)
    return pk, PrivateKey(pk, p, q)


def decrypt(sk: PrivateKey, c: int) -> int:
    return sk.decrypt(c)


def decrypt_histogram(sk: PrivateKey, h: EncryptedHistogram) -> list[int]:
    if h.key_fingerprint != sk.public.fingerprint:
        raise KeyMismatchError("histogram was encrypted under a different key")
    return [sk.decrypt(c) for c in h.bins]


def decrypt_values(sk: PrivateKey, cts: Sequence[int]) -> list[int]:
    return [sk.decrypt(c) for c in cts]
