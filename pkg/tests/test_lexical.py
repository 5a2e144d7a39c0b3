"""BM25 index against an independent straight-line scorer."""

import math
import random

import pytest

from seqrec.corpus import Catalog
from seqrec.errors import IndexBuildError
from seqrec.lexical import (
    LEXICAL_MAGIC,
    LexicalIndex,
    build_lexical_index,
    lexical_topk,
    score_bm25,
    tokenize,
)


from oracles import bruteforce_bm25_topk as bruteforce_topk, random_term_corpus as random_corpus


class TestTokenize:
    def test_title_line(self):
        assert tokenize("Title: Sigma F80 - Flat Kabuki TM") == [
            "title", "sigma", "f80", "flat", "kabuki", "tm",
        ]

    def test_mixed_alphanumerics(self):
        assert tokenize('32" 80cm Long Hair') == ["32", "80cm", "long", "hair"]

    def test_punctuation_only(self):
        assert tokenize("---") == []

    def test_underscore_splits(self):
        assert tokenize("foo_bar") == ["foo", "bar"]


class TestIndexStatistics:
    def test_toy_corpus_hand_counts(self, toy_catalog):
        # Rendered docs: "Title: red fox" / "Title: red red wolf" / "Title: blue owl"
        index = build_lexical_index(toy_catalog)
        assert index.N == 3
        assert index.avgdl == pytest.approx((3 + 4 + 3) / 3)
        df = {t: int(index.df[index.terms.index(t)]) for t in index.terms}
        assert df == {"title": 3, "red": 2, "fox": 1, "wolf": 1, "blue": 1, "owl": 1}

    def test_single_doc(self):
        index = LexicalIndex(["d0"], [["alpha", "beta", "alpha"]])
        assert index.avgdl == 3.0
        assert all(int(x) == 1 for x in index.df)

    def test_empty_catalog_rejected(self):
        with pytest.raises(IndexBuildError):
            build_lexical_index(Catalog([]))


class TestScore:
    def test_hand_computed_ln2(self):
        # tf=1, |d|=avgdl, N=2, df=1: idf=ln 2 and the normalizer cancels.
        index = LexicalIndex(["d0", "d1"], [["a", "b"], ["c", "d"]])
        assert index.score(["a"], "d0") == pytest.approx(math.log(2.0), abs=1e-12)

    def test_absent_term_scores_zero(self):
        index = LexicalIndex(["d0"], [["a", "b"]])
        assert index.score(["zzz"], "d0") == 0.0

    def test_duplicate_query_terms_count_once(self):
        index = LexicalIndex(["d0", "d1"], [["a", "b"], ["c", "d"]])
        assert index.score(["a", "a", "a"], "d0") == index.score(["a"], "d0")

    def test_additivity_over_distinct_terms(self):
        index = LexicalIndex(["d0", "d1"], [["a", "b"], ["c", "d"]])
        combined = index.score(["a", "b"], "d0")
        assert combined == pytest.approx(index.score(["a"], "d0") + index.score(["b"], "d0"))

    def test_matches_bruteforce_on_random_small_corpus(self):
        rng = random.Random(99)
        doc_ids = [f"d{i}" for i in range(5)]
        doc_terms = [[rng.choice("abcde") for _ in range(rng.randint(1, 9))] for _ in range(5)]
        index = LexicalIndex(doc_ids, doc_terms)
        expected = dict(bruteforce_topk(doc_ids, doc_terms, ["a", "b", "c"], 5))
        for doc_id in doc_ids:
            got = score_bm25(index, ["a", "b", "c"], doc_id)
            assert got == pytest.approx(expected.get(doc_id, 0.0), abs=1e-9)

    def test_idf_nonnegative_and_monotone(self):
        rng = random.Random(5)
        for _ in range(50):
            doc_ids, doc_terms, vocab = random_corpus(rng, max_docs=30, vocab_size=10)
            index = LexicalIndex(doc_ids, doc_terms)
            by_df = sorted(
                ((int(index.df[i]), float(index._idf[i])) for i in range(len(index.terms)))
            )
            for (df1, idf1), (df2, idf2) in zip(by_df, by_df[1:]):
                assert idf1 >= 0.0 and idf2 >= 0.0
                if df1 < df2:
                    assert idf1 >= idf2


class TestTopk:
    def test_self_retrieval(self, toy_catalog):
        index = build_lexical_index(toy_catalog)
        hits = index.topk("Title: blue owl", 3)
        assert hits[0][0] == "A3"

    def test_k_larger_than_matches(self, toy_catalog):
        index = build_lexical_index(toy_catalog)
        hits = index.topk("owl", 10)
        assert [h[0] for h in hits] == ["A3"]

    def test_zero_score_docs_never_returned(self, toy_catalog):
        index = build_lexical_index(toy_catalog)
        assert index.topk("zzz qqq", 5) == []

    def test_matches_bruteforce_on_random_corpora(self):
        rng = random.Random(42)
        for _ in range(150):
            doc_ids, doc_terms, vocab = random_corpus(rng)
            index = LexicalIndex(doc_ids, doc_terms)
            query_terms = [rng.choice(vocab) for _ in range(rng.randint(1, 6))]
            k = rng.randint(1, 10)
            got = lexical_topk(index, " ".join(query_terms), k)
            want = bruteforce_topk(doc_ids, doc_terms, query_terms, k)
            assert [g[0] for g in got] == [w[0] for w in want]
            for (_, gs), (_, ws) in zip(got, want):
                assert gs == pytest.approx(ws, abs=1e-9)


class TestPersistence:
    def test_roundtrip_preserves_scores(self, toy_catalog, tmp_path):
        index = build_lexical_index(toy_catalog)
        path = tmp_path / "toy.lexical.idx"
        index.save(path)
        assert path.read_bytes().startswith(LEXICAL_MAGIC)
        loaded = LexicalIndex.load(path)
        assert loaded.topk("Title: red fox", 3) == index.topk("Title: red fox", 3)
        assert loaded.k1 == index.k1 and loaded.b == index.b

    def test_rebuild_is_byte_identical(self, toy_catalog, tmp_path):
        p1, p2 = tmp_path / "a.idx", tmp_path / "b.idx"
        build_lexical_index(toy_catalog).save(p1)
        build_lexical_index(toy_catalog).save(p2)
        assert p1.read_bytes() == p2.read_bytes()
