"""Semantic search over cyber-threat-intelligence text.

Sentences are represented as attention graphs; queries match corpus sentences
through approximate subgraph isomorphism over embedding-compatible nodes, with
a cached-graph / synonym-cluster index that prunes candidates without changing
results.
"""

from .errors import (
    CaseConstructionError,
    CtiSearchError,
    DuplicateEntryError,
    EmptyAttributionError,
    GraphSizeError,
    InterchangeError,
    MalformedLineError,
    MissingWordError,
    StaleIndexError,
    StructuralError,
    ValueRangeError,
)
from .graphs import (
    AttentionGraph,
    GraphParams,
    Node,
    build_fully_connected,
    build_graph,
    default_stopwords,
    preprocess_words,
)
from .interchange import (
    AttentionRecord,
    DocMeta,
    EmbeddingTable,
    read_attention_file,
    read_doc_meta,
    read_embeddings,
    write_attention_file,
    write_doc_meta,
    write_embeddings,
)
from .index import (
    BuildStats,
    CorpusIndex,
    Fingerprint,
    SearchHit,
    attribute,
    build_index,
    candidates,
    compute_fingerprint,
    load_index,
    save_index,
    search,
    search_unoptimized,
    verify_index,
)
from .matching import (
    EMPTY_MATCH,
    MatchParams,
    MatchSet,
    SynonymResolver,
    best_match,
    brute_force_mcs,
    find_match_sets,
    similarity_score,
    validate_match_set,
    word_distance,
    word_match,
)

__version__ = "0.1.0"
