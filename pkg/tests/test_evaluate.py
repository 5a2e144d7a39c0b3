"""Recall@k / NDCG@k closed forms and segment aggregation."""

import json
import math
import random

import pytest

from seqrec.corpus import SegmentThresholds
from seqrec.errors import EvalError
from seqrec.evaluate import (
    RankOutcome,
    format_report,
    load_outcomes,
    ndcg_at_k,
    recall_at_k,
    segment_report,
)


def outcome(rank, n=5, user="u", target="t") -> RankOutcome:
    return RankOutcome(user=user, target=target, rank=rank, seq_length=n)


class TestRecall:
    def test_all_rank_one(self):
        assert recall_at_k([outcome(1) for _ in range(4)], 5) == 1.0

    def test_quarter_hit(self):
        outcomes = [outcome(1), outcome(None), outcome(None), outcome(None)]
        assert recall_at_k(outcomes, 5) == 0.25

    def test_empty_raises(self):
        with pytest.raises(EvalError):
            recall_at_k([], 5)


class TestNdcg:
    def test_rank_one_gives_full_gain(self):
        assert ndcg_at_k([outcome(1)], 5) == 1.0

    def test_rank_three_gives_half(self):
        assert ndcg_at_k([outcome(3)], 5) == pytest.approx(0.5)

    def test_rank_beyond_cutoff_gives_zero(self):
        assert ndcg_at_k([outcome(6)], 5) == 0.0

    def test_ndcg_never_exceeds_recall(self):
        rng = random.Random(8)
        for _ in range(100):
            outcomes = [
                outcome(rng.choice([1, 2, 3, 4, 5, None]), n=rng.randint(1, 20))
                for _ in range(rng.randint(1, 40))
            ]
            assert ndcg_at_k(outcomes, 5) <= recall_at_k(outcomes, 5) + 1e-15

    def test_k_monotonicity(self):
        rng = random.Random(9)
        outcomes = [outcome(rng.choice([1, 2, 3, 4, 5, 6, 7, None])) for _ in range(60)]
        for k in range(1, 7):
            assert recall_at_k(outcomes, k) <= recall_at_k(outcomes, k + 1) + 1e-15
            assert ndcg_at_k(outcomes, k) <= ndcg_at_k(outcomes, k + 1) + 1e-15


class TestSegmentReport:
    def test_cold_hit_fixture(self):
        # 3 cold users always hit at rank 1, 7 longer users always miss.
        # Hand-computed: cold recall 1.0, others 0.0, overall 3/10.
        outcomes = [outcome(1, n=3, user=f"c{i}") for i in range(3)]
        outcomes += [outcome(None, n=10, user=f"r{i}") for i in range(5)]
        outcomes += [outcome(None, n=20, user=f"p{i}") for i in range(2)]
        report = segment_report(outcomes, SegmentThresholds(5, 14), k=5)
        assert report.segments["cold_start"].recall == 1.0
        assert report.segments["regular"].recall == 0.0
        assert report.segments["power"].recall == 0.0
        assert report.overall.recall == pytest.approx(0.3)
        assert report.shares["cold_start"] == pytest.approx(30.0)

    def test_single_segment_equals_overall(self):
        outcomes = [outcome(rank, n=1) for rank in (1, 2, None, 4)]
        report = segment_report(outcomes, SegmentThresholds(5, 14), k=5)
        assert set(report.segments) == {"cold_start"}
        assert report.segments["cold_start"] == report.overall

    def test_weighted_mean_consistency(self):
        rng = random.Random(10)
        outcomes = [
            outcome(rng.choice([1, 2, 3, None]), n=rng.randint(1, 30), user=f"u{i}")
            for i in range(500)
        ]
        report = segment_report(outcomes, SegmentThresholds(5, 13), k=5)
        total = sum(m.users for m in report.segments.values())
        assert total == report.overall.users
        for metric in ("recall", "ndcg"):
            weighted = sum(
                getattr(m, metric) * m.users for m in report.segments.values()
            ) / total
            assert abs(weighted - getattr(report.overall, metric)) <= 1e-12

    def test_contribution_identity_per_user(self):
        for rank in (1, 2, 3, 4, 5):
            assert 1.0 / math.log2(rank + 1) <= 1.0

    def test_format_report_rounds_to_four_decimals(self):
        outcomes = [outcome(1, n=2), outcome(None, n=2), outcome(3, n=2)]
        text = format_report(segment_report(outcomes, SegmentThresholds(5, 14), k=5))
        assert "0.6667" in text  # recall 2/3
        assert "cold_start" in text


class TestLoadOutcomes:
    def test_reads_results_file(self, tmp_path):
        path = tmp_path / "results.jsonl"
        rows = [
            {"user": "u1", "target": "A", "rank_or_miss": 2, "beams": [], "errors": 0},
            {"user": "u2", "target": "B", "rank_or_miss": "miss", "beams": [], "errors": 0},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        outcomes = load_outcomes(path, {"u1": 4, "u2": 9})
        assert outcomes[0].rank == 2 and outcomes[0].seq_length == 4
        assert outcomes[1].rank is None and outcomes[1].seq_length == 9

    def test_malformed_record_names_line(self, tmp_path):
        path = tmp_path / "results.jsonl"
        path.write_text('{"user": "u1", "target": "A", "rank_or_miss": 1, "errors": 0}\n{bad\n')
        with pytest.raises(EvalError, match="line 2"):
            load_outcomes(path, {"u1": 3})
