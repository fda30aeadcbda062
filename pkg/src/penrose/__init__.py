"""Privacy-preserving fleet-scale GPU kernel telemetry.

Agents sample kernel counters into partial histograms, encrypt them under a
Paillier public key and push them anonymously; an untrusted aggregation
server folds ciphertexts per application fingerprint; the designer console
holds the private key and decrypts only the aggregates.
"""

__version__ = "0.1.0"
