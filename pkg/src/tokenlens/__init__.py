"""tokenlens: tokenizer training and information-theoretic analysis toolkit.

Treats tokenizers as structured compressors: train subword tokenizers from
scratch, measure compression ratio and k-gram entropy structure of token
streams, run tokenize-then-LZ pipelines, train a compression-aware BPE
variant, and compute channel capacity-utilization metrics.
"""

from .corpus import (
    CharStream,
    CorpusSplit,
    Document,
    SkipTally,
    load_documents,
    split_train_test,
    stream_characters,
)
from .tokenizer import (
    SPECIAL_TOKENS,
    Preprocessing,
    TokenStream,
    TokenizerModel,
    Vocabulary,
    decode,
    encode,
    load_model,
    load_rank_list_model,
    normalize,
    pretokenize,
    prepare_text,
    save_model,
)
from .trainers import PairCount, TrainConfig, train, train_bpe, train_unigram, train_wordlevel, train_wordpiece
from .metrics import (
    EmpiricalDistribution,
    KGramTable,
    MetricsReport,
    analyze_stream,
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
from .lzpipe import (
    Compressor,
    PackedIdStream,
    get_compressor,
    pack_token_ids,
    pipeline_report,
    raw_lz_bpc,
    token_lz_bpc,
    unpack_token_ids,
)
from .lzbpe import (
    LzBpeTrace,
    MergeCandidate,
    apply_merge,
    byte_tokenize,
    evaluate_candidate,
    pair_frequencies,
    top_k_candidates,
    train_lz_aware_bpe,
)

__version__ = "0.1.0"
