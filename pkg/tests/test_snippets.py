import math

import numpy as np
import pytest

from penrose.snippets import (NUM_HASHES, Disposition, FamilyMismatchError, IntegrityError, MinHashSignature,
                              SnippetAssembler, SnippetTables, SnippetTooShortError, estimate_jaccard, family,
                              minhash, minhash_windows, ngrams8, pad_snippet, salt_kernel_name, snippet_hash,
                              window_bytes)

from conftest import fingerprint, names


def test_salt_identity_and_determinism():
    assert salt_kernel_name("gemm_k1") == "gemm_k1"
    assert salt_kernel_name("gemm_k1", b"s") == salt_kernel_name("gemm_k1", b"s")
    assert salt_kernel_name("gemm_k1", b"s") != salt_kernel_name("gemm_k1", b"t")


def test_salt_no_collisions():
    out = {salt_kernel_name(f"kernel_{i}", b"app-salt") for i in range(100_000)}
    assert len(out) == 100_000


def test_ngram_windows_of_short_sequence():
    grams = ngrams8(list("AAABCCDDDE"))
    assert grams == {tuple("AAABCCDD"), tuple("AABCCDDD"), tuple("ABCCDDDE")}


def test_identical_kernels_give_one_window():
    assert len(ngrams8(["k"] * 8)) == 1


def test_window_count_is_n_minus_7():
    assert len(window_bytes(names("k", 100))) == 93


def test_too_short_raises_and_padding_fixes_it():
    with pytest.raises(SnippetTooShortError):
        window_bytes(["a", "b"])
    assert pad_snippet(["a", "b"]) == ["a", "b"] + ["b"] * 6
    with pytest.raises(SnippetTooShortError):
        pad_snippet([])


def test_single_window_signature_is_its_hashes():
    fam = family()
    w = next(iter(window_bytes(names("k", 8))))
    sig = minhash_windows([w], fam)
    assert np.array_equal(sig.values, fam.hash_window(w))


def test_signature_bytes_roundtrip():
    sig = minhash(names("k", 50))
    again = MinHashSignature.from_bytes(sig.to_bytes())
    assert again == sig and len(sig.to_bytes()) == NUM_HASHES * 8


def _sets(shared, only_a, only_b, tag):
    c = [f"{tag}c{i}".encode() for i in range(shared)]
    return c + [f"{tag}x{i}".encode() for i in range(only_a)], c + [f"{tag}y{i}".encode() for i in range(only_b)]


def test_half_overlap_near_one_third():
    a, b = _sets(500, 500, 500, "h")
    assert len(set(a) & set(b)) / len(set(a) | set(b)) == pytest.approx(1 / 3)
    est = estimate_jaccard(minhash_windows(a), minhash_windows(b))
    assert abs(est - 1 / 3) <= 0.15


def test_self_and_disjoint():
    m = minhash(names("k", 40))
    assert estimate_jaccard(m, m) == 1.0
    assert estimate_jaccard(m, minhash(names("z", 40))) <= 0.05


def test_family_mismatch():
    a = minhash(names("k", 20), family(1))
    b = minhash(names("k", 20), family(2))
    with pytest.raises(FamilyMismatchError):
        estimate_jaccard(a, b)


def _binomial_tail(n, p, lo, hi):
    """P(X/n outside [lo, hi]) for X ~ Binomial(n, p), exactly."""
    inside = sum(math.comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1) if lo <= k / n <= hi)
    return 1 - inside


def test_high_similarity_estimate_concentrates():
    tail = _binomial_tail(100, 0.85, 0.74 - 1e-9, 0.96 + 1e-9)
    assert tail <= 0.01
    trials, misses = 200, 0
    for t in range(trials):
        a, b = _sets(850, 75, 75, f"t{t}")
        misses += abs(estimate_jaccard(minhash_windows(a), minhash_windows(b)) - 0.85) > 0.11
    # allow generous slack above the expected 200 * tail
    assert misses <= max(6, 4 * trials * tail)


def test_classify_new_then_exact():
    tables = SnippetTables()
    sh, sig = fingerprint(names("k", 300))
    c1 = tables.classify(sh, sig)
    assert c1.disposition is Disposition.NEW and c1.canonical == sh
    c2 = tables.classify(sh, sig)
    assert c2.disposition is Disposition.EXACT and c2.canonical == sh


def test_near_duplicate_is_matched():
    base = names("k", 1000)
    near = base[:-5] + names("z", 5)
    exact_j = len(set(ngrams8(base)) & set(ngrams8(near))) / len(set(ngrams8(base)) | set(ngrams8(near)))
    assert exact_j >= 0.9
    tables = SnippetTables()
    sh1, sig1 = fingerprint(base)
    sh2, sig2 = fingerprint(near)
    tables.classify(sh1, sig1)
    c = tables.classify(sh2, sig2)
    assert c.disposition is Disposition.MATCHED and c.canonical == sh1
    assert tables.classify(sh2, sig2).disposition is Disposition.EXACT
    assert len(tables) == 1


def test_unrelated_snippet_is_new():
    tables = SnippetTables()
    tables.classify(*fingerprint(names("k", 200)))
    assert tables.classify(*fingerprint(names("q", 200))).disposition is Disposition.NEW
    assert len(tables) == 2


def test_hash_signature_mismatch_rejected():
    tables = SnippetTables()
    sh, _ = fingerprint(names("k", 50))
    _, other = fingerprint(names("q", 50))
    with pytest.raises(IntegrityError):
        tables.classify(sh, other)


def test_tables_survive_restart(tmp_path):
    t = SnippetTables(tmp_path)
    base = names("k", 1000)
    near = base[:-3] + names("z", 3)
    t.classify(*fingerprint(base))
    t.classify(*fingerprint(near))
    before = t.snapshot()
    t.close()
    again = SnippetTables(tmp_path)
    assert again.snapshot() == before
    assert again.classify(*fingerprint(near)).disposition is Disposition.EXACT
    assert again.classify(*fingerprint(base)).disposition is Disposition.EXACT
    again.close()


def test_torn_trailing_record_is_discarded(tmp_path):
    t = SnippetTables(tmp_path)
    t.classify(*fingerprint(names("k", 100)))
    t.close()
    with open(tmp_path / "est.log", "ab") as f:
        f.write(b"\x01" * 10)
    again = SnippetTables(tmp_path)
    assert len(again.est) == 1
    again.close()


def test_assembler_cuts_full_and_partial_windows():
    asm = SnippetAssembler(length=4)
    out = [asm.push(n) for n in names("k", 6)]
    full = [s for s in out if s is not None]
    assert len(full) == 1 and full[0].complete and len(full[0].kernels) == 4
    tail = asm.finish()
    assert tail is not None and not tail.complete and len(tail.kernels) == 2
    assert asm.finish() is None


def test_snippet_hash_is_sha256_of_signature():
    import hashlib
    sig = minhash(names("k", 30))
    assert snippet_hash(sig) == hashlib.sha256(sig.to_bytes()).digest()
