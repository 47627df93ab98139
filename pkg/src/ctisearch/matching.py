"""Approximate subgraph-isomorphism matching between attention graphs.

Two nodes match when their word embeddings are closer than ``tau``.  Match
sets are grown greedily: candidate node pairs are visited in ascending
``(G1-index, G2-index)`` order; a pair joins every existing set it neighbors
(in both graphs at once) that it does not conflict with, merging those sets
when the union stays one-to-one, and seeds a new singleton set otherwise.
The similarity of a match set is ``prod(kappa * (1 - distance))`` over its
pairs, so with ``kappa > 1`` larger isomorphic subgraphs always win.

`brute_force_mcs` is the exact reference oracle: it enumerates every valid
match set outright and is only usable on small graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import GraphSizeError
from .graphs import AttentionGraph
from .interchange import EmbeddingTable

__all__ = [
    "MatchParams",
    "MatchSet",
    "EMPTY_MATCH",
    "word_distance",
    "word_match",
    "find_match_sets",
    "similarity_score",
    "best_match",
    "brute_force_mcs",
    "validate_match_set",
    "SynonymResolver",
    "QueryMatcher",
]

DISTANCE_MODES = ("half-cosine", "minmax-euclidean", "exact-word")

# Slack for vectorized prefilters; final distances always come from the scalar
# functions below, so a superset of candidates is harmless and a subset is not.
_PREFILTER_EPS = 1e-9


@dataclass(frozen=True)
class MatchParams:
    """Node-match threshold ``tau`` and score base ``kappa`` (reference values
    0.37 and 2.72)."""

    tau: float = 0.37
    kappa: float = 2.72
    distance_mode: str = "half-cosine"

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.kappa <= 1.0:
            raise ValueError("kappa must be larger than 1")
        if self.distance_mode not in DISTANCE_MODES:
            raise ValueError(f"unknown distance_mode {self.distance_mode!r}")


@dataclass(frozen=True)
class MatchSet:
    """An injective, connectivity-consistent set of node correspondences.

    ``pairs`` holds ``(G1 node index, G2 node index)`` sorted ascending;
    ``word_pairs`` and ``distances`` are aligned with it.
    """

    pairs: tuple[tuple[int, int], ...]
    word_pairs: tuple[tuple[str, str], ...]
    distances: tuple[float, ...] = field(compare=False)

    def __len__(self) -> int:
        return len(self.pairs)

    def transposed(self) -> "MatchSet":
        order = sorted(range(len(self.pairs)), key=lambda k: (self.pairs[k][1], self.pairs[k][0]))
        return MatchSet(
            pairs=tuple((self.pairs[k][1], self.pairs[k][0]) for k in order),
            word_pairs=tuple((self.word_pairs[k][1], self.word_pairs[k][0]) for k in order),
            distances=tuple(self.distances[k] for k in order),
        )


EMPTY_MATCH = MatchSet(pairs=(), word_pairs=(), distances=())


# ---------------------------------------------------------------------------
# word distance


def word_distance(
    w1: str, w2: str, emb: EmbeddingTable, mode: str = "half-cosine"
) -> float:
    """Distance between two in-vocabulary words, in [0, 1].

    Default is half the cosine distance of the embeddings,
    ``(1 - cos(e1, e2)) / 2``; identical words are exactly 0.  The
    ``minmax-euclidean`` alternative rescales every dimension to [0, 1] over
    the table and takes Euclidean distance divided by sqrt(dimension).
    """
    if mode == "exact-word":
        if w1 not in emb:
            emb.row(w1)  # raises MissingWordError
        if w2 not in emb:
            emb.row(w2)
        return 0.0 if w1 == w2 else 1.0
    r1 = emb.row(w1)
    r2 = emb.row(w2)
    if w1 == w2:
        return 0.0
    if mode == "half-cosine":
        cos = float(np.dot(emb.unit_rows[r1], emb.unit_rows[r2]))
        return min(max((1.0 - cos) / 2.0, 0.0), 1.0)
    if mode == "minmax-euclidean":
        lo, span = emb.minmax_stats
        s1 = (emb.matrix[r1] - lo) / span
        s2 = (emb.matrix[r2] - lo) / span
        d = float(np.linalg.norm(s1 - s2)) / math.sqrt(emb.dimension)
        return min(max(d, 0.0), 1.0)
    raise ValueError(f"unknown distance mode {mode!r}")


def word_match(w1: str, w2: str, emb: EmbeddingTable, params: MatchParams) -> bool:
    """True iff the two words' distance is strictly below ``params.tau``."""
    return word_distance(w1, w2, emb, params.distance_mode) < params.tau


class SynonymResolver:
    """Finds, for a word, every vocabulary word within ``tau`` (with exact
    distances).

    The scan is vectorized with an epsilon-loose prefilter and then confirmed
    pair-by-pair with `word_distance`, so results agree bit-exactly with the
    scalar path while staying O(vocabulary) per word.  Results are cached.
    """

    def __init__(self, emb: EmbeddingTable, params: MatchParams):
        self.emb = emb
        self.params = params
        self._cache: dict[str, dict[str, float]] = {}
        self._scaled: np.ndarray | None = None

    def matches_of(self, word: str) -> dict[str, float]:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        emb, params = self.emb, self.params
        mode = params.distance_mode
        if word not in emb:
            result: dict[str, float] = {}
            self._cache[word] = result
            return result
        if mode == "exact-word":
            result = {word: 0.0}
            self._cache[word] = result
            return result
        row = emb.row(word)
        if mode == "half-cosine":
            cos = emb.unit_rows @ emb.unit_rows[row]
            candidate_rows = np.nonzero(cos >= (1.0 - 2.0 * params.tau) - _PREFILTER_EPS)[0]
        else:  # minmax-euclidean
            if self._scaled is None:
                lo, span = emb.minmax_stats
                self._scaled = (emb.matrix - lo) / span
            diff = self._scaled - self._scaled[row]
            dist = np.linalg.norm(diff, axis=1) / math.sqrt(emb.dimension)
            candidate_rows = np.nonzero(dist <= params.tau + _PREFILTER_EPS)[0]
        result = {}
        for r in candidate_rows.tolist():
            other = emb.words[r]
            d = word_distance(word, other, emb, mode)
            if d < params.tau:
                result[other] = d
        self._cache[word] = result
        return result


# ---------------------------------------------------------------------------
# match-set discovery

# A candidate pair is (g1_index, g2_index, g1_word, g2_word, distance).
_Pair = tuple[int, int, str, str, float]


def _candidate_pairs(
    g1: AttentionGraph,
    g2: AttentionGraph,
    emb: EmbeddingTable,
    params: MatchParams,
    match_map: Mapping[str, Mapping[str, float]] | None = None,
) -> list[_Pair]:
    """All matching node pairs, ascending by (G1 index, G2 index).

    ``match_map`` (word -> {word: distance} for g1's words) lets callers reuse
    precomputed synonym lookups; without it distances are computed directly.
    """
    if match_map is None:
        g2_words = {n.word for n in g2.nodes}
        match_map = {}
        for w1 in {n.word for n in g1.nodes}:
            row: dict[str, float] = {}
            for w2 in g2_words:
                d = word_distance(w1, w2, emb, params.distance_mode)
                if d < params.tau:
                    row[w2] = d
            match_map[w1] = row
    pairs: list[_Pair] = []
    nodes2 = sorted(g2.nodes, key=lambda n: n.index)
    for n1 in sorted(g1.nodes, key=lambda n: n.index):
        matches = match_map.get(n1.word)
        if not matches:
            continue
        for n2 in nodes2:
            d = matches.get(n2.word)
            if d is not None:
                pairs.append((n1.index, n2.index, n1.word, n2.word, d))
    return pairs


class _Partial:
    __slots__ = ("pairs", "g1_used", "g2_used")

    def __init__(self, pair: _Pair):
        self.pairs: list[_Pair] = [pair]
        self.g1_used: set[int] = {pair[0]}
        self.g2_used: set[int] = {pair[1]}

    def add(self, pair: _Pair) -> None:
        self.pairs.append(pair)
        self.g1_used.add(pair[0])
        self.g2_used.add(pair[1])

    def absorb(self, other: "_Partial") -> None:
        self.pairs.extend(other.pairs)
        self.g1_used |= other.g1_used
        self.g2_used |= other.g2_used


def _grow_sets(
    pairs: Sequence[_Pair],
    adj1: Mapping[int, set[int]],
    adj2: Mapping[int, set[int]],
) -> list[_Partial]:
    sets: list[_Partial] = []
    for pair in pairs:
        i, j = pair[0], pair[1]
        neighbors1 = adj1[i]
        neighbors2 = adj2[j]
        eligible = [
            s
            for s in sets
            if i not in s.g1_used
            and j not in s.g2_used
            and any(p[0] in neighbors1 and p[1] in neighbors2 for p in s.pairs)
        ]
        if not eligible:
            sets.append(_Partial(pair))
            continue
        base = eligible[0]
        base.add(pair)
        for other in eligible[1:]:
            # merge through the new pair when the union stays injective
            if base.g1_used.isdisjoint(other.g1_used) and base.g2_used.isdisjoint(other.g2_used):
                base.absorb(other)
                sets.remove(other)
    return sets


def _finalize(partial: _Partial) -> MatchSet:
    ordered = sorted(partial.pairs, key=lambda p: (p[0], p[1]))
    return MatchSet(
        pairs=tuple((p[0], p[1]) for p in ordered),
        word_pairs=tuple((p[2], p[3]) for p in ordered),
        distances=tuple(p[4] for p in ordered),
    )


def find_match_sets(
    g1: AttentionGraph,
    g2: AttentionGraph,
    emb: EmbeddingTable,
    params: MatchParams,
    match_map: Mapping[str, Mapping[str, float]] | None = None,
) -> list[MatchSet]:
    """Grow match sets over all matching node pairs of the two graphs.

    Deterministic: pairs are visited ascending by (G1 index, G2 index) and
    sets are kept in creation order.
    """
    pairs = _candidate_pairs(g1, g2, emb, params, match_map)
    if not pairs:
        return []
    partials = _grow_sets(pairs, g1.adjacency(), g2.adjacency())
    return [_finalize(p) for p in partials]


def similarity_score(s: MatchSet, emb: EmbeddingTable, params: MatchParams) -> float:
    """``prod(kappa * (1 - distance))`` over the set's pairs; empty set -> 0.

    The empty match scores 0 rather than the empty product 1 so that it ranks
    below every genuine match.
    """
    if len(s.pairs) == 0:
        return 0.0
    distances = s.distances
    if len(distances) != len(s.pairs):
        distances = tuple(
            word_distance(w1, w2, emb, params.distance_mode) for w1, w2 in s.word_pairs
        )
    score = 1.0
    for d in distances:
        score *= params.kappa * (1.0 - d)
    return score


def _score_partial(partial: _Partial, kappa: float) -> float:
    score = 1.0
    for p in partial.pairs:
        score *= kappa * (1.0 - p[4])
    return score


def _pick_best(partials: list[_Partial], kappa: float) -> _Partial:
    # max score, then larger set, then lexicographically smallest pair list
    return min(
        partials,
        key=lambda s: (
            -_score_partial(s, kappa),
            -len(s.pairs),
            tuple(sorted((p[0], p[1]) for p in s.pairs)),
        ),
    )


def _best_from_pairs(
    pairs: list[_Pair], g1: AttentionGraph, g2: AttentionGraph, kappa: float, swapped: bool
) -> tuple[MatchSet, float]:
    """Grow and pick the best set; ``swapped`` runs the growth in (g2, g1)
    orientation and transposes the winner back."""
    if swapped:
        pairs = sorted((j, i, w2, w1, d) for (i, j, w1, w2, d) in pairs)
        partials = _grow_sets(pairs, g2.adjacency(), g1.adjacency())
        best = _pick_best(partials, kappa)
        return _finalize(best).transposed(), _score_partial(best, kappa)
    partials = _grow_sets(pairs, g1.adjacency(), g2.adjacency())
    best = _pick_best(partials, kappa)
    return _finalize(best), _score_partial(best, kappa)


def best_match(
    g1: AttentionGraph,
    g2: AttentionGraph,
    emb: EmbeddingTable,
    params: MatchParams,
    match_map: Mapping[str, Mapping[str, float]] | None = None,
) -> tuple[MatchSet, float]:
    """The highest-scoring match set between two graphs, with its score.

    The pair of graphs is processed in a canonical orientation (decided by
    `AttentionGraph.canon_key`) so the score is exactly symmetric in its
    arguments; the returned pairs are always (g1 node, g2 node).
    """
    pairs = _candidate_pairs(g1, g2, emb, params, match_map)
    if not pairs:
        return EMPTY_MATCH, 0.0
    swapped = g2.canon_key() < g1.canon_key()
    return _best_from_pairs(pairs, g1, g2, params.kappa, swapped)


class QueryMatcher:
    """One query matched against many corpus graphs.

    Precomputes the query's synonym lookups as an inverted corpus-word ->
    query-nodes index, so scanning a non-matching sentence costs one dict
    probe per corpus node.  Produces results identical to `best_match`.
    """

    def __init__(
        self,
        query_graph: AttentionGraph,
        emb: EmbeddingTable,
        params: MatchParams,
        resolver: "SynonymResolver | None" = None,
    ):
        self.query_graph = query_graph
        self.emb = emb
        self.params = params
        resolver = resolver or SynonymResolver(emb, params)
        self.match_map: dict[str, dict[str, float]] = {
            w: resolver.matches_of(w) for w in {n.word for n in query_graph.nodes}
        }
        inverted: dict[str, list[tuple[int, str, float]]] = {}
        for node in sorted(query_graph.nodes, key=lambda n: n.index):
            for w2, d in self.match_map[node.word].items():
                inverted.setdefault(w2, []).append((node.index, node.word, d))
        self._inverted = inverted
        query_graph.adjacency()
        self._key1 = query_graph.canon_key()

    def candidate_pairs(self, g2: AttentionGraph) -> list[_Pair]:
        inverted = self._inverted
        pairs: list[_Pair] = []
        for n2 in g2.nodes:
            hits = inverted.get(n2.word)
            if hits:
                j = n2.index
                w2 = n2.word
                for i, w1, d in hits:
                    pairs.append((i, j, w1, w2, d))
        pairs.sort(key=lambda p: (p[0], p[1]))
        return pairs

    def best_against(self, g2: AttentionGraph) -> tuple[MatchSet, float]:
        pairs = self.candidate_pairs(g2)
        if not pairs:
            return EMPTY_MATCH, 0.0
        swapped = g2.canon_key() < self._key1
        return _best_from_pairs(pairs, self.query_graph, g2, self.params.kappa, swapped)


# ---------------------------------------------------------------------------
# exact oracle


def brute_force_mcs(
    g1: AttentionGraph,
    g2: AttentionGraph,
    emb: EmbeddingTable,
    params: MatchParams,
    max_nodes: int = 8,
) -> tuple[MatchSet, float]:
    """Exact maximum-similarity match set by exhaustive enumeration.

    Enumerates every injective, predicate-satisfying, connectivity-consistent
    pair set and returns the score-maximal one under `best_match`'s
    tie-breaking.  Exponential; refuses graphs larger than ``max_nodes``.
    """
    if len(g1.nodes) > max_nodes or len(g2.nodes) > max_nodes:
        raise GraphSizeError(
            f"brute force limited to {max_nodes} nodes per graph "
            f"(got {len(g1.nodes)} and {len(g2.nodes)})"
        )
    pairs = _candidate_pairs(g1, g2, emb, params)
    if not pairs:
        return EMPTY_MATCH, 0.0
    adj1 = g1.adjacency()
    adj2 = g2.adjacency()
    n = len(pairs)
    # pair-level relations: coexistence (injectivity) and adjacency (connectivity)
    compatible = [[False] * n for _ in range(n)]
    adjacent = [[False] * n for _ in range(n)]
    for a in range(n):
        ia, ja = pairs[a][0], pairs[a][1]
        for b in range(a + 1, n):
            ib, jb = pairs[b][0], pairs[b][1]
            if ia != ib and ja != jb:
                compatible[a][b] = compatible[b][a] = True
                if ib in adj1[ia] and jb in adj2[ja]:
                    adjacent[a][b] = adjacent[b][a] = True

    best_key: tuple | None = None
    best_subset: frozenset[int] | None = None
    seen: set[frozenset[int]] = set()

    def consider(subset: frozenset[int]) -> None:
        nonlocal best_key, best_subset
        score = 1.0
        for a in subset:
            score *= params.kappa * (1.0 - pairs[a][4])
        key = (-score, -len(subset), tuple(sorted((pairs[a][0], pairs[a][1]) for a in subset)))
        if best_key is None or key < best_key:
            best_key = key
            best_subset = subset

    def extend(subset: frozenset[int]) -> None:
        if subset in seen:
            return
        seen.add(subset)
        consider(subset)
        for b in range(n):
            if b in subset:
                continue
            if not all(compatible[a][b] for a in subset):
                continue
            if not any(adjacent[a][b] for a in subset):
                continue
            extend(subset | {b})

    for a in range(n):
        extend(frozenset((a,)))

    assert best_subset is not None
    chosen = _Partial(pairs[min(best_subset)])
    for a in sorted(best_subset):
        if a != min(best_subset):
            chosen.add(pairs[a])
    score = _score_partial(chosen, params.kappa)
    return _finalize(chosen), score


# ---------------------------------------------------------------------------
# validity checking (independent of how a set was built)


def validate_match_set(
    s: MatchSet,
    g1: AttentionGraph,
    g2: AttentionGraph,
    emb: EmbeddingTable,
    params: MatchParams,
) -> list[str]:
    """Check the three match-set invariants; returns a list of violations
    (empty means valid).

    Connectivity consistency is checked as connectedness of the pairs under
    simultaneous adjacency, which is equivalent to the existence of an
    insertion order in which every pair neighbors an earlier one.
    """
    problems: list[str] = []
    node1 = {n.index: n.word for n in g1.nodes}
    node2 = {n.index: n.word for n in g2.nodes}
    g1_seen: set[int] = set()
    g2_seen: set[int] = set()
    for (i, j), (w1, w2) in zip(s.pairs, s.word_pairs):
        if i not in node1 or node1[i] != w1:
            problems.append(f"pair ({i},{j}): no node {i}/{w1!r} in G1")
            continue
        if j not in node2 or node2[j] != w2:
            problems.append(f"pair ({i},{j}): no node {j}/{w2!r} in G2")
            continue
        if i in g1_seen:
            problems.append(f"G1 node {i} used twice")
        if j in g2_seen:
            problems.append(f"G2 node {j} used twice")
        g1_seen.add(i)
        g2_seen.add(j)
        if word_distance(w1, w2, emb, params.distance_mode) >= params.tau:
            problems.append(f"pair ({i},{j}): words {w1!r}/{w2!r} do not match under tau")
    if problems or len(s.pairs) <= 1:
        return problems
    adj1 = g1.adjacency()
    adj2 = g2.adjacency()
    remaining = set(range(1, len(s.pairs)))
    frontier = [0]
    while frontier:
        a = frontier.pop()
        ia, ja = s.pairs[a]
        reached = [
            b
            for b in remaining
            if s.pairs[b][0] in adj1[ia] and s.pairs[b][1] in adj2[ja]
        ]
        for b in reached:
            remaining.discard(b)
            frontier.append(b)
    if remaining:
        problems.append("pairs are not connectivity-consistent")
    return problems
