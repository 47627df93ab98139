"""Retrieval evaluation: balanced behavior cases, threshold sweeps, ablations.

The controlled protocol is per behavior: its dataset holds all case sentences
associated with the behavior (positives) plus an equal number of cases
sampled from other behaviors (negatives).  A case counts as retrieved at a
threshold when its best score against any of the behavior's description
sentences exceeds the threshold.  Micro-averaged precision/recall/F1 over the
pooled counts is the headline number; macro averages are reported alongside.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .errors import CaseConstructionError, MalformedLineError
from .graphs import AttentionGraph, GraphParams, build_fully_connected, build_graph
from .index import SentenceKey
from .interchange import AttentionRecord, EmbeddingTable
from .matching import MatchParams, QueryMatcher, SynonymResolver

__all__ = [
    "BehaviorCase",
    "BehaviorSpec",
    "ThresholdMetrics",
    "EvalReport",
    "CaseScorer",
    "precision_recall_f1",
    "read_behavior_file",
    "build_behavior_cases",
    "sweep_thresholds",
    "run_protocol",
    "run_ablation",
    "ABLATION_VARIANTS",
]

ABLATION_VARIANTS = ("no-attention", "no-embedding")


@dataclass(frozen=True)
class BehaviorSpec:
    """Raw behavior entry: its description sentences and its true-positive cases."""

    behavior_id: str
    description_sents: tuple[SentenceKey, ...]
    case_sents: tuple[SentenceKey, ...]


@dataclass(frozen=True)
class BehaviorCase:
    """A balanced evaluation set for one behavior."""

    behavior_id: str
    description_sents: tuple[SentenceKey, ...]
    positives: frozenset[SentenceKey]
    negatives: frozenset[SentenceKey]

    def __post_init__(self):
        if len(self.negatives) != len(self.positives):
            raise CaseConstructionError(
                f"behavior {self.behavior_id}: |negatives| must equal |positives|"
            )
        if self.positives & self.negatives:
            raise CaseConstructionError(
                f"behavior {self.behavior_id}: positives and negatives overlap"
            )


def read_behavior_file(path: str | Path) -> list[BehaviorSpec]:
    """JSON lines: {"behavior_id", "description_sents": [[doc, sid], ...],
    "case_sents": [[doc, sid], ...]}."""
    path = str(path)
    out: list[BehaviorSpec] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                behavior_id = obj["behavior_id"]
                desc = tuple((d, int(s)) for d, s in obj["description_sents"])
                cases = tuple((d, int(s)) for d, s in obj["case_sents"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise MalformedLineError("malformed behavior entry", path=path, line=line_no) from None
            if behavior_id in seen:
                raise MalformedLineError(
                    f"duplicate behavior_id {behavior_id!r}", path=path, line=line_no
                )
            seen.add(behavior_id)
            out.append(BehaviorSpec(behavior_id, desc, cases))
    return out


def build_behavior_cases(
    behaviors: Sequence[BehaviorSpec] | str | Path, seed: int
) -> list[BehaviorCase]:
    """Sample each behavior's negatives uniformly (without replacement) from the
    other behaviors' cases; deterministic given the seed."""
    if isinstance(behaviors, (str, Path)):
        behaviors = read_behavior_file(behaviors)
    all_cases: set[SentenceKey] = set()
    for spec in behaviors:
        all_cases.update(spec.case_sents)
    out: list[BehaviorCase] = []
    for spec in behaviors:
        positives = frozenset(spec.case_sents)
        if not positives:
            raise CaseConstructionError(f"behavior {spec.behavior_id} has no positive cases")
        pool = sorted(all_cases - positives)
        if len(pool) < len(positives):
            raise CaseConstructionError(
                f"behavior {spec.behavior_id}: pool of {len(pool)} foreign cases cannot "
                f"supply {len(positives)} negatives"
            )
        rng = random.Random(f"{seed}:{spec.behavior_id}")
        negatives = frozenset(rng.sample(pool, len(positives)))
        out.append(
            BehaviorCase(
                behavior_id=spec.behavior_id,
                description_sents=spec.description_sents,
                positives=positives,
                negatives=negatives,
            )
        )
    return out


# ---------------------------------------------------------------------------
# metrics


def precision_recall_f1(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Standard definitions with the 0/0 -> 0 convention."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass(frozen=True)
class ThresholdMetrics:
    threshold: float
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float


@dataclass
class EvalReport:
    thresholds: list[ThresholdMetrics]
    best_threshold: float
    best_f1: float
    per_behavior: dict[str, dict]  # behavior -> metrics at the best threshold
    runtime: dict[str, float | int] = field(default_factory=dict)

    def to_json_obj(self, include_runtime: bool = False) -> dict:
        # runtime holds wall-clock timings; excluded by default so identical
        # seeds serialize byte-identically
        obj = {
            "best_threshold": self.best_threshold,
            "best_f1": self.best_f1,
            "thresholds": [dict(m.__dict__) for m in self.thresholds],
            "per_behavior": self.per_behavior,
        }
        if include_runtime:
            obj["runtime"] = self.runtime
        return obj

    def to_json(self, include_runtime: bool = False, **kw) -> str:
        kw.setdefault("sort_keys", True)
        return json.dumps(self.to_json_obj(include_runtime), **kw)

    def format_text(self) -> str:
        lines = [
            f"{'threshold':>10} {'P':>7} {'R':>7} {'F1':>7} {'macroF1':>8} {'tp':>6} {'fp':>6} {'fn':>6}"
        ]
        for m in self.thresholds:
            lines.append(
                f"{m.threshold:>10.4g} {m.precision:>7.4f} {m.recall:>7.4f} {m.f1:>7.4f}"
                f" {m.macro_f1:>8.4f} {m.tp:>6} {m.fp:>6} {m.fn:>6}"
            )
        lines.append(f"best threshold {self.best_threshold:.4g} with F1 {self.best_f1:.4f}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# scoring


class CaseScorer:
    """Scores case sentences against a behavior's description queries.

    A case's score is the max best-match score over the behavior's
    description sentences (multi-sentence descriptions query independently
    and keep the best).
    """

    def __init__(
        self,
        graphs: Mapping[SentenceKey, AttentionGraph],
        emb: EmbeddingTable,
        match_params: MatchParams,
    ):
        self.graphs = graphs
        self.emb = emb
        self.match_params = match_params
        self.resolver = SynonymResolver(emb, match_params)

    def _graph(self, key: SentenceKey) -> AttentionGraph:
        try:
            return self.graphs[key]
        except KeyError:
            raise CaseConstructionError(f"sentence {key!r} is not in the corpus") from None

    def case_scores(self, case: BehaviorCase) -> dict[SentenceKey, float]:
        matchers = [
            QueryMatcher(self._graph(k), self.emb, self.match_params, resolver=self.resolver)
            for k in case.description_sents
        ]
        out: dict[SentenceKey, float] = {}
        for key in sorted(case.positives | case.negatives):
            g = self._graph(key)
            best = 0.0
            for matcher in matchers:
                score = matcher.best_against(g)[1]
                if score > best:
                    best = score
            out[key] = best
        return out


def sweep_thresholds(
    cases: Sequence[BehaviorCase],
    scorer: CaseScorer | Callable[[BehaviorCase], Mapping[SentenceKey, float]],
    thresholds: Sequence[float],
) -> EvalReport:
    """Evaluate every threshold; the best one maximizes micro F1 (ties ->
    smallest threshold)."""
    if not thresholds:
        raise ValueError("thresholds must be non-empty")
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    started = time.perf_counter()
    score_fn = scorer.case_scores if isinstance(scorer, CaseScorer) else scorer
    scored: list[tuple[BehaviorCase, Mapping[SentenceKey, float]]] = [
        (case, score_fn(case)) for case in cases
    ]
    rows: list[ThresholdMetrics] = []
    per_threshold_behavior: list[dict[str, tuple[int, int, int]]] = []
    for threshold in thresholds:
        tp = fp = fn = 0
        macro_p = macro_r = macro_f = 0.0
        behavior_counts: dict[str, tuple[int, int, int]] = {}
        for case, scores in scored:
            retrieved = {k for k, s in scores.items() if s > threshold}
            btp = len(retrieved & case.positives)
            bfp = len(retrieved & case.negatives)
            bfn = len(case.positives - retrieved)
            behavior_counts[case.behavior_id] = (btp, bfp, bfn)
            tp += btp
            fp += bfp
            fn += bfn
            p, r, f = precision_recall_f1(btp, bfp, bfn)
            macro_p += p
            macro_r += r
            macro_f += f
        n = max(len(scored), 1)
        p, r, f = precision_recall_f1(tp, fp, fn)
        rows.append(
            ThresholdMetrics(
                threshold=threshold,
                tp=tp,
                fp=fp,
                fn=fn,
                precision=p,
                recall=r,
                f1=f,
                macro_precision=macro_p / n,
                macro_recall=macro_r / n,
                macro_f1=macro_f / n,
            )
        )
        per_threshold_behavior.append(behavior_counts)
    best_row = max(rows, key=lambda m: (m.f1, -m.threshold))
    best_idx = rows.index(best_row)
    per_behavior = {}
    for behavior_id, (btp, bfp, bfn) in sorted(per_threshold_behavior[best_idx].items()):
        p, r, f = precision_recall_f1(btp, bfp, bfn)
        per_behavior[behavior_id] = {
            "tp": btp, "fp": bfp, "fn": bfn, "precision": p, "recall": r, "f1": f,
        }
    return EvalReport(
        thresholds=rows,
        best_threshold=best_row.threshold,
        best_f1=best_row.f1,
        per_behavior=per_behavior,
        runtime={
            "elapsed_s": time.perf_counter() - started,
            "behaviors": len(cases),
            "cases": sum(len(c.positives) + len(c.negatives) for c in cases),
        },
    )


# ---------------------------------------------------------------------------
# full protocol / ablations


def run_protocol(
    cases: Sequence[BehaviorCase],
    records: Iterable[AttentionRecord],
    emb: EmbeddingTable,
    graph_params: GraphParams,
    match_params: MatchParams,
    thresholds: Sequence[float],
    variant: str | None = None,
) -> EvalReport:
    """Build graphs for the requested variant and run the sweep.

    ``variant`` None is the full system; ``no-attention`` connects all word
    pairs instead of thresholding attention; ``no-embedding`` only matches
    identical words.
    """
    builder = build_graph
    params = match_params
    if variant == "no-attention":
        builder = build_fully_connected
    elif variant == "no-embedding":
        params = MatchParams(
            tau=match_params.tau, kappa=match_params.kappa, distance_mode="exact-word"
        )
    elif variant is not None:
        raise ValueError(f"unknown ablation variant {variant!r}")
    graphs = {rec.key: builder(rec, emb, graph_params) for rec in records}
    scorer = CaseScorer(graphs, emb, params)
    return sweep_thresholds(cases, scorer, thresholds)


def run_ablation(
    variant: str,
    cases: Sequence[BehaviorCase],
    records: Iterable[AttentionRecord],
    emb: EmbeddingTable,
    graph_params: GraphParams,
    match_params: MatchParams,
    thresholds: Sequence[float],
) -> EvalReport:
    if variant not in ABLATION_VARIANTS:
        raise ValueError(f"unknown ablation variant {variant!r}")
    return run_protocol(cases, records, emb, graph_params, match_params, thresholds, variant)
