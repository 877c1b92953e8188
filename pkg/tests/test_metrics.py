import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokenlens.lzpipe import get_compressor
from tokenlens.metrics import (
    EmpiricalDistribution,
    KGramTable,
    MetricsError,
    MetricsReport,
    capacity_utilization,
    compression_ratio,
    entropy_rate,
    intrinsic_compressibility,
    kgram_entropy,
    pearson_correlation,
    redundancy_bound,
    renyi_entropy,
    shannon_entropy,
    tokens_per_char,
    unigram_entropy,
)
from tokenlens.tokenizer import SPECIAL_TOKENS, Preprocessing, TokenizerModel, Vocabulary


# ---------------------------------------------------------------------------
# independent oracle: per-position dict recount, O(n*k)


def oracle_kgram(seq, k, estimator="plugin"):
    n = len(seq)
    joint = Counter(tuple(seq[i - k + 1 : i + 1]) for i in range(k - 1, n))
    ctx = Counter(tuple(seq[i - k + 1 : i]) for i in range(k - 1, n))
    total = 0.0
    for i in range(k - 1, n):
        w = tuple(seq[i - k + 1 : i + 1])
        p = joint[w] / ctx[w[:-1]]
        term = -math.log2(p)
        if estimator == "as-written":
            term *= p
        total += term
    return total / (n - k + 1)


def oracle_unigram(seq):
    counts = Counter(seq)
    n = len(seq)
    return -sum(c / n * math.log2(c / n) for c in counts.values())


# ---------------------------------------------------------------------------
# entropies: hand-computed spec examples


def test_unigram_entropy_constant_stream():
    assert unigram_entropy([3] * 50) == 0.0


def test_unigram_entropy_half_half():
    assert unigram_entropy([0, 0, 1, 1]) == pytest.approx(1.0)


def test_unigram_entropy_uniform_is_log2k():
    assert unigram_entropy(list(range(16))) == pytest.approx(4.0)


def test_kgram_constant_stream_zero_both_estimators():
    for k in (2, 3, 4, 5):
        for est in ("plugin", "as-written"):
            assert kgram_entropy([1] * 64, k, est) == 0.0


def test_kgram_alternating_deterministic_contexts():
    assert kgram_entropy([0, 1, 0, 1, 0, 1], 2, "plugin") == pytest.approx(0.0)


def test_kgram_aabb_hand_built_table():
    # positions 2..4: -log p(a|a)=1, -log p(b|a)=1, -log p(b|b)=0 -> 2/3
    assert kgram_entropy([0, 0, 1, 1], 2, "plugin") == pytest.approx(2.0 / 3.0)


def test_kgram_table_invariant_joint_sums_to_context():
    rng = np.random.default_rng(0)
    seq = rng.integers(0, 5, 200)
    table = KGramTable.from_stream(seq, 3)
    joints = table.joint_counts()
    ctxs = table.context_counts()
    summed = Counter()
    for w, c in joints.items():
        summed[w[:-1]] += c
    assert dict(summed) == ctxs


def test_kgram_errors():
    with pytest.raises(MetricsError):
        kgram_entropy([1, 2], 4)
    with pytest.raises(MetricsError):
        kgram_entropy([1, 2, 3], 2, "bogus")


def test_kgram_matches_oracle_on_random_streams():
    rng = np.random.default_rng(42)
    for _ in range(40):
        n = int(rng.integers(5, 400))
        vocab = int(rng.integers(2, 30))
        seq = rng.integers(0, vocab, n).tolist()
        for k in (2, 3, 5):
            if n < k:
                continue
            for est in ("plugin", "as-written"):
                assert kgram_entropy(seq, k, est) == pytest.approx(
                    oracle_kgram(seq, k, est), abs=1e-9
                )


def test_kgram_oracle_equivalence_large_stream():
    rng = np.random.default_rng(1)
    seq = rng.integers(0, 64, 100_000).tolist()
    for k in (2, 4):
        assert kgram_entropy(seq, k) == pytest.approx(oracle_kgram(seq, k), abs=1e-9)


def test_plugin_monotonicity_is_not_a_theorem():
    # documented edge case: the same repeated pattern carries all surprisal
    # mass at both orders while the position count n-k+1 shrinks with k,
    # so H_{k+1} can slightly exceed H_k. Pin the hand-computed values.
    seq = [0, 0, 1]
    # H_1 = entropy of {0: 2/3, 1: 1/3}
    assert unigram_entropy(seq) == pytest.approx(-(2 / 3) * math.log2(2 / 3) - (1 / 3) * math.log2(1 / 3))
    # H_2: contexts (0)->0 and (0)->1, each p=1/2 over N=2 positions
    assert kgram_entropy(seq, 2) == pytest.approx(1.0)
    assert kgram_entropy(seq, 2) > unigram_entropy(seq)


# ---------------------------------------------------------------------------
# renyi, eta, rates, redundancy, pearson


def test_renyi_uniform_any_alpha():
    dist = EmpiricalDistribution(counts={i: 3 for i in range(8)}, total=24)
    for alpha in (0.5, 2.0, 3.0):
        assert renyi_entropy(dist, alpha) == pytest.approx(3.0)


def test_renyi_half_half_alpha2():
    dist = EmpiricalDistribution(counts={0: 2, 1: 2}, total=4)
    assert renyi_entropy(dist, 2.0) == pytest.approx(1.0)


def test_renyi_three_quarters_alpha2():
    dist = EmpiricalDistribution(counts={0: 3, 1: 1}, total=4)
    assert renyi_entropy(dist, 2.0) == pytest.approx(math.log2(16 / 10))


def test_renyi_rejects_alpha_one():
    dist = EmpiricalDistribution(counts={0: 1}, total=1)
    with pytest.raises(MetricsError):
        renyi_entropy(dist, 1.0)


def test_entropy_rate_product():
    assert entropy_rate(10.5, 0.25) == pytest.approx(2.625)
    assert entropy_rate(0.0, 0.3) == 0.0


def test_capacity_utilization():
    assert capacity_utilization(math.log2(16000), 16000) == pytest.approx(1.0)
    assert capacity_utilization(0.0, 16000) == 0.0
    with pytest.raises(MetricsError):
        capacity_utilization(1.0, 1)


def test_pearson_exact_lines():
    assert pearson_correlation([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson_correlation([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0)


def test_pearson_zero_variance_errors():
    with pytest.raises(MetricsError):
        pearson_correlation([1, 1, 1], [1, 2, 3])


def test_pearson_affine_invariance():
    rng = np.random.default_rng(3)
    xs = rng.normal(size=50)
    ys = rng.normal(size=50)
    r = pearson_correlation(xs, ys)
    assert pearson_correlation(2.5 * xs + 7, ys) == pytest.approx(r, abs=1e-12)
    assert abs(r) <= 1.0


def test_redundancy_bound_values():
    assert redundancy_bound(1, 100) == 0.0
    assert redundancy_bound(16000, 10**6) == pytest.approx(0.1594, abs=1e-4)


def test_redundancy_bound_decreasing_in_n():
    values = [redundancy_bound(16000, n) for n in (10**3, 10**4, 10**5, 10**6, 10**7)]
    assert all(a > b for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------------------
# corpus-level metrics


def _identity_byte_model():
    tokens = list(SPECIAL_TOKENS) + [bytes([b]) for b in range(256)]
    return TokenizerModel(
        family="bpe",
        vocab=Vocabulary(tokens, specials=SPECIAL_TOKENS),
        byte_level=True,
        preprocessing=Preprocessing(nfkc=False),
    )


def test_cr_identity_byte_tokenizer():
    assert compression_ratio(_identity_byte_model(), ["hello ascii text"]) == pytest.approx(1.0)


def test_cr_wordlevel_hand_count():
    tokens = list(SPECIAL_TOKENS) + ["hello", "world"]
    model = TokenizerModel(family="wordlevel", vocab=Vocabulary(tokens, specials=SPECIAL_TOKENS))
    # "hello world": 11 bytes, 2 tokens
    assert compression_ratio(model, ["hello world"]) == pytest.approx(5.5)


def test_cr_merges_never_decrease_it(small_english, small_bpe_model):
    ancestor = _identity_byte_model()
    text = small_english[:20_000]
    assert compression_ratio(small_bpe_model, [text]) >= compression_ratio(ancestor, [text])


def test_tokens_per_char_identity():
    assert tokens_per_char(_identity_byte_model(), ["plain ascii"]) == pytest.approx(1.0)


def test_cross_metric_consistency(small_bpe_model, small_english):
    corpus = [small_english[:5000], small_english[5000:9000]]
    cr = compression_ratio(small_bpe_model, corpus)
    tpc = tokens_per_char(small_bpe_model, corpus)
    total_bytes = sum(len(t.encode()) for t in corpus)
    total_chars = sum(len(t) for t in corpus)
    assert cr == pytest.approx((total_bytes / total_chars) / tpc, rel=1e-12)


def test_intrinsic_compressibility_repetitive():
    assert intrinsic_compressibility("ab" * 100_000, get_compressor("zstd")) < 0.1


def test_intrinsic_compressibility_doubling_lowers_bpc(small_english):
    text = small_english[:50_000]
    comp = get_compressor("zstd")
    assert intrinsic_compressibility(text + text, comp) < intrinsic_compressibility(text, comp)


def test_empty_corpus_errors():
    with pytest.raises(MetricsError):
        compression_ratio(_identity_byte_model(), [])
    with pytest.raises(MetricsError):
        intrinsic_compressibility("", get_compressor("zstd"))


# ---------------------------------------------------------------------------
# estimator property suite (bulk protocol; see also acceptance criterion 5)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_estimator_invariants_random_streams(data):
    n = data.draw(st.integers(5, 600))
    vocab = data.draw(st.integers(2, 64))
    seq = data.draw(st.lists(st.integers(0, vocab - 1), min_size=n, max_size=n))
    h1 = unigram_entropy(seq)
    log2k = math.log2(vocab)
    assert 0.0 <= h1 <= log2k + 1e-12
    dist = EmpiricalDistribution.from_stream(np.asarray(seq))
    shannon = shannon_entropy(dist)
    r2 = renyi_entropy(dist, 2.0)
    assert r2 <= shannon + 1e-12
    assert 0.0 <= capacity_utilization(shannon, vocab) <= 1.0 + 1e-12
    assert 0.0 <= capacity_utilization(r2, vocab) <= 1.0 + 1e-12
    for k in (2, 3, 4, 5):
        if n < k:
            continue
        plugin = kgram_entropy(seq, k, "plugin")
        aswritten = kgram_entropy(seq, k, "as-written")
        assert 0.0 <= aswritten <= plugin + 1e-12
        assert plugin <= log2k + 1e-12


def test_report_flat_row_stable_keys():
    rep = MetricsReport(domain="d", family="bpe", vocab_size=100, train_size=10, test_domain="d")
    rep.h = {1: 2.0, 2: 1.0}
    rep.h_rates = {1: 0.5}
    row = rep.flat()
    keys = list(row.keys())
    assert keys.index("h1") < keys.index("h2") < keys.index("h1_rate")
    rt = MetricsReport.from_json_dict(rep.to_json_dict())
    assert rt.h == rep.h and rt.domain == rep.domain
