"""Recall@k / NDCG@k aggregation over per-user ranks, with user-segment slices.

Single-target form: each user has exactly one held-out item, so the
ideal DCG is 1 and a user's NDCG contribution is 1/log2(rank+1) when the
target ranks within the cutoff, else 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import SEGMENTS, SegmentThresholds, assign_segment
from .errors import EvalError
from .pipeline import MISS


@dataclass(frozen=True)
class RankOutcome:
    user: str
    target: str
    rank: int | None  # None = miss
    seq_length: int


@dataclass(frozen=True)
class SegmentMetrics:
    users: int
    recall: float
    ndcg: float


@dataclass(frozen=True)
class EvalReport:
    k: int
    overall: SegmentMetrics
    segments: dict[str, SegmentMetrics]
    shares: dict[str, float]  # segment population, percent
    config_hash: str = ""


def _hit(outcome: RankOutcome, k: int) -> bool:
    return outcome.rank is not None and outcome.rank <= k


def recall_at_k(outcomes: Iterable[RankOutcome], k: int) -> float:
    outcomes = list(outcomes)
    if not outcomes:
        raise EvalError("no outcomes to evaluate")
    return sum(1 for o in outcomes if _hit(o, k)) / len(outcomes)


def ndcg_at_k(outcomes: Iterable[RankOutcome], k: int) -> float:
    outcomes = list(outcomes)
    if not outcomes:
        raise EvalError("no outcomes to evaluate")
    gain = sum(1.0 / math.log2(o.rank + 1) for o in outcomes if _hit(o, k))
    return gain / len(outcomes)


def _metrics(outcomes: list[RankOutcome], k: int) -> SegmentMetrics:
    metrics = SegmentMetrics(
        users=len(outcomes),
        recall=recall_at_k(outcomes, k),
        ndcg=ndcg_at_k(outcomes, k),
    )
    # Per-user gain is at most 1, so this holds on every run.
    assert metrics.ndcg <= metrics.recall + 1e-12
    return metrics


def segment_report(
    outcomes: Iterable[RankOutcome],
    thresholds: SegmentThresholds,
    k: int = 5,
    config_hash: str = "",
) -> EvalReport:
    """Metrics overall and per length segment; shares are user percentages."""
    outcomes = list(outcomes)
    if not outcomes:
        raise EvalError("no outcomes to evaluate")
    by_segment: dict[str, list[RankOutcome]] = {s: [] for s in SEGMENTS}
    for o in outcomes:
        by_segment[assign_segment(o.seq_length, thresholds)].append(o)
    total = len(outcomes)
    segments = {
        name: _metrics(group, k) for name, group in by_segment.items() if group
    }
    shares = {name: 100.0 * m.users / total for name, m in segments.items()}
    return EvalReport(
        k=k,
        overall=_metrics(outcomes, k),
        segments=segments,
        shares=shares,
        config_hash=config_hash,
    )


def load_outcomes(
    results_path: str | Path,
    seq_lengths: Mapping[str, int],
) -> list[RankOutcome]:
    """Read a results file; seq_lengths maps user id to full sequence length n."""
    outcomes = []
    with open(results_path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                rank = rec["rank_or_miss"]
                outcomes.append(
                    RankOutcome(
                        user=rec["user"],
                        target=rec["target"],
                        rank=None if rank == MISS else int(rank),
                        seq_length=int(seq_lengths[rec["user"]]),
                    )
                )
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise EvalError(f"{results_path}: bad record at line {lineno}: {exc}") from exc
    return outcomes


def report_to_dict(report: EvalReport) -> dict:
    return {
        "k": report.k,
        "config_hash": report.config_hash,
        "overall": {
            "users": report.overall.users,
            "recall": report.overall.recall,
            "ndcg": report.overall.ndcg,
        },
        "segments": {
            name: {"users": m.users, "recall": m.recall, "ndcg": m.ndcg}
            for name, m in sorted(report.segments.items())
        },
        "shares": {name: report.shares[name] for name in sorted(report.shares)},
    }


def format_report(report: EvalReport) -> str:
    """Human-readable table; metrics shown to 4 decimals, shares to 2."""
    k = report.k
    lines = [
        f"{'segment':<12} {'users':>8} {'share%':>8} {'recall@' + str(k):>10} {'ndcg@' + str(k):>10}",
        f"{'overall':<12} {report.overall.users:>8} {100.0:>8.2f} "
        f"{report.overall.recall:>10.4f} {report.overall.ndcg:>10.4f}",
    ]
    for name in SEGMENTS:
        m = report.segments.get(name)
        if m is None:
            continue
        lines.append(
            f"{name:<12} {m.users:>8} {report.shares[name]:>8.2f} "
            f"{m.recall:>10.4f} {m.ndcg:>10.4f}"
        )
    return "\n".join(lines)
