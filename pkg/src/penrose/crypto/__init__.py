"""Paillier additively homomorphic encryption.

Only :mod:`penrose.crypto.public` is imported here; private-key code lives
in :mod:`penrose.crypto.private` and must be imported explicitly.
"""
from .public import (CryptoError, EncryptedHistogram, KeyMismatchError, MalformedCiphertextError,
                     PublicKey, add_histograms, encrypt, encrypt_histogram, homomorphic_add)

__all__ = ["CryptoError", "EncryptedHistogram", "KeyMismatchError", "MalformedCiphertextError",
           "PublicKey", "add_histograms", "encrypt", "encrypt_histogram", "homomorphic_add"]
