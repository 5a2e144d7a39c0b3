"""Serialize -> generate -> retrieve orchestration and beam fusion.

Per test user: build the prompt (when the generator needs one), collect
beam candidates, retrieve top-m per candidate, optionally drop history
items, and fuse the per-beam rankings into one top-K list. Results are
written as line-delimited records sorted by user id, so reruns with a
deterministic generator are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import Catalog, ItemId, SegmentThresholds, SplitExample
from .dense import DenseIndex, ROLE_QUERY, embed, provider_fingerprint
from .errors import ConfigError, GenerationError, TransportError
from .generate import DEFAULT_BEAMS
from .lexical import LexicalIndex
from .textify import (
    DEFAULT_TEMPLATE,
    DEFAULT_TOKEN_BUDGET,
    PromptTemplate,
    build_test_prompt,
)

FUSION_RANK_INTERLEAVE = "rank-interleave"
FUSION_SCORE_MAX = "score-max"

MISS = "miss"


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    generator: str
    retriever: str  # "lexical" or "dense"
    beams: int = DEFAULT_BEAMS
    k: int = 5
    per_beam_depth: int | None = None  # defaults to k
    thresholds: SegmentThresholds = field(default_factory=lambda: SegmentThresholds(5, 14))
    exclude_history: bool = False
    fusion: str = FUSION_RANK_INTERLEAVE
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1 or self.beams < 1:
            raise ConfigError("k and beams must be >= 1")
        if self.per_beam_depth is not None and self.per_beam_depth < 1:
            raise ConfigError("per-beam depth must be >= 1")
        if self.fusion not in (FUSION_RANK_INTERLEAVE, FUSION_SCORE_MAX):
            raise ConfigError(f"unknown fusion policy {self.fusion!r}")

    @property
    def depth(self) -> int:
        return self.per_beam_depth if self.per_beam_depth is not None else self.k

    def canonical(self) -> dict:
        return {
            "dataset": self.dataset,
            "generator": self.generator,
            "retriever": self.retriever,
            "beams": self.beams,
            "k": self.k,
            "per_beam_depth": self.depth,
            "thresholds": {"l": self.thresholds.l, "h": self.thresholds.h},
            "exclude_history": self.exclude_history,
            "fusion": self.fusion,
            "seed": self.seed,
        }

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class ItemProvenance:
    item: ItemId
    beam: int
    beam_rank: int
    score: float


@dataclass
class RecommendationList:
    user: str
    items: list[ItemId]
    provenance: list[ItemProvenance]


class LexicalRetriever:
    kind = "lexical"

    def __init__(self, index: LexicalIndex):
        self.index = index

    @property
    def fingerprint(self) -> str:
        key = f"lexical:k1={self.index.k1}:b={self.index.b}:N={self.index.N}"
        return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]

    def search(self, query_text: str, k: int) -> list[tuple[ItemId, float]]:
        return self.index.topk(query_text, k)


class DenseRetriever:
    kind = "dense"

    def __init__(self, index: DenseIndex, provider):
        expected = index.fingerprint
        actual = provider_fingerprint(provider.name, provider.dim)
        if actual != expected:
            raise ConfigError(
                f"provider {provider.name} (dim {provider.dim}) does not match the index "
                f"built with {index.provider_name} (dim {index.dim})"
            )
        self.index = index
        self.provider = provider

    @property
    def fingerprint(self) -> str:
        return self.index.fingerprint

    def search(self, query_text: str, k: int) -> list[tuple[ItemId, float]]:
        vec = embed(self.provider, [query_text], ROLE_QUERY)[0]
        return self.index.topk(vec, k)


def merge_beams(
    per_beam_results: Sequence[Sequence[tuple[ItemId, float]]],
    k: int,
    policy: str = FUSION_RANK_INTERLEAVE,
    user: str = "",
) -> RecommendationList:
    """Fuse beam-ordered ranked lists into one deduplicated top-k list.

    rank-interleave: each round every beam (in beam order) contributes its
    best not-yet-selected item. score-max: items sort by their maximum
    score over beams, ties by ascending item id.
    """
    if policy == FUSION_RANK_INTERLEAVE:
        provenance = _interleave(per_beam_results, k)
    elif policy == FUSION_SCORE_MAX:
        provenance = _score_max(per_beam_results, k)
    else:
        raise ConfigError(f"unknown fusion policy {policy!r}")
    return RecommendationList(
        user=user, items=[p.item for p in provenance], provenance=provenance
    )


def _interleave(per_beam: Sequence[Sequence[tuple[ItemId, float]]], k: int) -> list[ItemProvenance]:
    cursors = [0] * len(per_beam)
    seen: set[ItemId] = set()
    out: list[ItemProvenance] = []
    progress = True
    while len(out) < k and progress:
        progress = False
        for b, hits in enumerate(per_beam):
            c = cursors[b]
            while c < len(hits) and hits[c][0] in seen:
                c += 1
            cursors[b] = c
            if c >= len(hits):
                continue
            item, score = hits[c]
            seen.add(item)
            out.append(ItemProvenance(item=item, beam=b, beam_rank=c + 1, score=score))
            cursors[b] = c + 1
            progress = True
            if len(out) == k:
                break
    return out


def _score_max(per_beam: Sequence[Sequence[tuple[ItemId, float]]], k: int) -> list[ItemProvenance]:
    best: dict[ItemId, ItemProvenance] = {}
    for b, hits in enumerate(per_beam):
        for rank, (item, score) in enumerate(hits, start=1):
            cur = best.get(item)
            if cur is None or score > cur.score:
                best[item] = ItemProvenance(item=item, beam=b, beam_rank=rank, score=score)
    ordered = sorted(best.values(), key=lambda p: (-p.score, p.item))
    return ordered[:k]


def recommend_topk(
    example: SplitExample,
    config: ExperimentConfig,
    retriever,
    generator,
    catalog: Catalog,
    template: PromptTemplate = DEFAULT_TEMPLATE,
    budget: int = DEFAULT_TOKEN_BUDGET,
) -> tuple[RecommendationList, list[dict]]:
    """Run one user end to end; returns the fused list and per-beam trace."""
    prompt = None
    if generator.needs_prompt:
        history_items = [catalog[i] for i in example.history]
        prompt = build_test_prompt(history_items, budget=budget, template=template)
    candidates = generator.generate(example, catalog, prompt)
    history = set(example.history) if config.exclude_history else frozenset()
    per_beam: list[list[tuple[ItemId, float]]] = []
    trace: list[dict] = []
    for query in candidates.queries:
        hits = retriever.search(query, config.depth)
        if history:
            hits = [(i, s) for i, s in hits if i not in history]
        per_beam.append(hits)
        trace.append({"query": query, "hit_items": [i for i, _ in hits]})
    rec = merge_beams(per_beam, config.k, config.fusion, user=example.user)
    return rec, trace


def _result_record(
    example: SplitExample, rec: RecommendationList, trace: list[dict], errors: int
) -> dict:
    rank: int | str = MISS
    if example.target in rec.items:
        rank = rec.items.index(example.target) + 1
    return {
        "user": example.user,
        "target": example.target,
        "rank_or_miss": rank,
        "beams": trace,
        "errors": errors,
    }


def run_experiment(
    config: ExperimentConfig,
    catalog: Catalog,
    test_examples: Sequence[SplitExample],
    retriever,
    generator,
    out_dir: str | Path,
    template: PromptTemplate = DEFAULT_TEMPLATE,
    budget: int = DEFAULT_TOKEN_BUDGET,
    workers: int = 1,
    progress_every: int = 0,
) -> dict:
    """Score every test user and write results plus a run manifest.

    A generator failure for one user is recorded (all-miss) and never
    aborts the run. Results are sorted by user id before writing.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    examples = sorted(test_examples, key=lambda e: e.user)

    def process(example: SplitExample) -> dict:
        try:
            rec, trace = recommend_topk(
                example, config, retriever, generator, catalog, template, budget
            )
            return _result_record(example, rec, trace, errors=0)
        except (GenerationError, TransportError):
            empty = RecommendationList(user=example.user, items=[], provenance=[])
            return _result_record(example, empty, [], errors=1)

    records: list[dict] = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, record in enumerate(pool.map(process, examples), start=1):
                records.append(record)
                if progress_every and i % progress_every == 0:
                    print(f"  processed {i}/{len(examples)} users")
    else:
        for i, example in enumerate(examples, start=1):
            records.append(process(example))
            if progress_every and i % progress_every == 0:
                print(f"  processed {i}/{len(examples)} users")

    results_path = out_dir / "results.jsonl"
    with open(results_path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")

    failures = sum(r["errors"] for r in records)
    manifest = {
        "config": config.canonical(),
        "config_hash": config.config_hash,
        "retriever_fingerprint": retriever.fingerprint,
        "users": len(records),
        "failures": failures,
        "results_file": results_path.name,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        f.write(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest
