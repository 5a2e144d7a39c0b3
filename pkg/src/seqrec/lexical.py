"""Inverted index with Okapi BM25 scoring and exact top-k search.

Scores use the nonnegative ln(1 + (N - df + 0.5)/(df + 0.5)) IDF variant
with k1=1.2, b=0.75 defaults. Duplicate query terms contribute once.
Zero-score documents are never returned; ties break by ascending item id.
"""

from __future__ import annotations

import json
import re
import struct
from collections import Counter
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import Catalog, ItemId
from .errors import CorpusFormatError, IndexBuildError
from .textify import DEFAULT_TEMPLATE, PromptTemplate, render_item

LEXICAL_MAGIC = b"SRLEX1\n"

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric; no stemming or stopwords."""
    return _TOKEN_RE.findall(text.lower())


def _unique_terms(terms: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(terms))


class LexicalIndex:
    """BM25 inverted index over rendered catalog item texts.

    Immutable once built; per-posting score contributions are precomputed
    so queries reduce to gather-and-accumulate.
    """

    def __init__(
        self,
        doc_ids: list[ItemId],
        doc_terms: list[list[str]],
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
    ):
        self.k1 = float(k1)
        self.b = float(b)
        self.doc_ids = list(doc_ids)
        self._doc_index = {d: i for i, d in enumerate(self.doc_ids)}
        self.N = len(doc_ids)
        self.doc_lengths = np.array([len(t) for t in doc_terms], dtype=np.int64)
        self.avgdl = float(self.doc_lengths.sum()) / self.N if self.N else 0.0

        postings: dict[str, list[tuple[int, int]]] = {}
        for ordinal, terms in enumerate(doc_terms):
            for term, tf in Counter(terms).items():
                postings.setdefault(term, []).append((ordinal, tf))

        self.terms = sorted(postings)
        self._term_index = {t: i for i, t in enumerate(self.terms)}
        self.df = np.array([len(postings[t]) for t in self.terms], dtype=np.int64)
        self.offsets = np.zeros(len(self.terms) + 1, dtype=np.int64)
        np.cumsum(self.df, out=self.offsets[1:])
        total = int(self.offsets[-1])
        self.postings_doc = np.empty(total, dtype=np.uint32)
        self.postings_tf = np.empty(total, dtype=np.uint32)
        pos = 0
        for t in self.terms:
            for ordinal, tf in postings[t]:
                self.postings_doc[pos] = ordinal
                self.postings_tf[pos] = tf
                pos += 1
        self._finalize()

    def _finalize(self) -> None:
        n, df = self.N, self.df.astype(np.float64)
        self._idf = np.log(1.0 + (n - df + 0.5) / (df + 0.5))
        tf = self.postings_tf.astype(np.float64)
        dl = self.doc_lengths[self.postings_doc].astype(np.float64)
        idf = np.repeat(self._idf, self.df)
        k1, b = self.k1, self.b
        avgdl = self.avgdl if self.avgdl > 0 else 1.0
        self._contrib = idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl))

    def idf(self, term: str) -> float:
        i = self._term_index.get(term)
        return float(self._idf[i]) if i is not None else 0.0

    def term_frequency(self, term: str, doc_id: ItemId) -> int:
        i = self._term_index.get(term)
        if i is None:
            return 0
        lo, hi = int(self.offsets[i]), int(self.offsets[i + 1])
        ordinal = self._doc_index[doc_id]
        pos = lo + int(np.searchsorted(self.postings_doc[lo:hi], ordinal))
        if pos < hi and int(self.postings_doc[pos]) == ordinal:
            return int(self.postings_tf[pos])
        return 0

    def score(self, query_terms: Iterable[str], doc_id: ItemId) -> float:
        """BM25 score of one document for the given query terms (deduplicated)."""
        ordinal = self._doc_index[doc_id]
        dl = float(self.doc_lengths[ordinal])
        avgdl = self.avgdl if self.avgdl > 0 else 1.0
        k1, b = self.k1, self.b
        total = 0.0
        for term in _unique_terms(query_terms):
            i = self._term_index.get(term)
            if i is None:
                continue
            lo, hi = int(self.offsets[i]), int(self.offsets[i + 1])
            pos = lo + int(np.searchsorted(self.postings_doc[lo:hi], ordinal))
            if pos >= hi or int(self.postings_doc[pos]) != ordinal:
                continue
            tf = float(self.postings_tf[pos])
            idf = float(self._idf[i])
            total += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl))
        return total

    def topk(self, query_text: str, k: int) -> list[tuple[ItemId, float]]:
        """Exact top-k by BM25 over all documents; zero-score docs excluded."""
        if k < 1:
            return []
        scores = np.zeros(self.N, dtype=np.float64)
        touched_parts = []
        for term in _unique_terms(tokenize(query_text)):
            i = self._term_index.get(term)
            if i is None:
                continue
            lo, hi = int(self.offsets[i]), int(self.offsets[i + 1])
            docs = self.postings_doc[lo:hi]
            scores[docs] += self._contrib[lo:hi]
            touched_parts.append(docs)
        if not touched_parts:
            return []
        touched = np.unique(np.concatenate(touched_parts))
        # Primary key descending score, secondary ascending ordinal (= item id).
        order = np.lexsort((touched, -scores[touched]))
        top = touched[order[:k]]
        return [(self.doc_ids[int(o)], float(scores[int(o)])) for o in top]

    def save(self, path: str | Path) -> None:
        header = {
            "k1": self.k1,
            "b": self.b,
            "N": self.N,
            "avgdl": self.avgdl,
            "doc_ids": self.doc_ids,
            "doc_lengths": self.doc_lengths.tolist(),
            "terms": self.terms,
            "df": self.df.tolist(),
        }
        blob = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        blob = blob.encode("utf-8")
        with open(path, "wb") as f:
            f.write(LEXICAL_MAGIC)
            f.write(struct.pack("<Q", len(blob)))
            f.write(blob)
            f.write(self.postings_doc.astype("<u4").tobytes())
            f.write(self.postings_tf.astype("<u4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "LexicalIndex":
        with open(path, "rb") as f:
            if f.read(len(LEXICAL_MAGIC)) != LEXICAL_MAGIC:
                raise CorpusFormatError(f"{path}: not a lexical index file")
            (hlen,) = struct.unpack("<Q", f.read(8))
            header = json.loads(f.read(hlen).decode("utf-8"))
            idx = cls.__new__(cls)
            idx.k1 = float(header["k1"])
            idx.b = float(header["b"])
            idx.N = int(header["N"])
            idx.avgdl = float(header["avgdl"])
            idx.doc_ids = list(header["doc_ids"])
            idx._doc_index = {d: i for i, d in enumerate(idx.doc_ids)}
            idx.doc_lengths = np.array(header["doc_lengths"], dtype=np.int64)
            idx.terms = list(header["terms"])
            idx._term_index = {t: i for i, t in enumerate(idx.terms)}
            idx.df = np.array(header["df"], dtype=np.int64)
            idx.offsets = np.zeros(len(idx.terms) + 1, dtype=np.int64)
            np.cumsum(idx.df, out=idx.offsets[1:])
            total = int(idx.offsets[-1])
            idx.postings_doc = np.frombuffer(f.read(4 * total), dtype="<u4").astype(np.uint32)
            idx.postings_tf = np.frombuffer(f.read(4 * total), dtype="<u4").astype(np.uint32)
            idx._finalize()
            return idx


def build_lexical_index(
    catalog: Catalog,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    template: PromptTemplate = DEFAULT_TEMPLATE,
) -> LexicalIndex:
    """Index the rendered text of every catalog item; ordinals follow id order."""
    if len(catalog) == 0:
        raise IndexBuildError("cannot build a lexical index over an empty catalog")
    doc_ids = []
    doc_terms = []
    for item in catalog:
        doc_ids.append(item.id)
        doc_terms.append(tokenize(render_item(item, template)))
    return LexicalIndex(doc_ids, doc_terms, k1=k1, b=b)


def score_bm25(index: LexicalIndex, query_terms: Iterable[str], doc_id: ItemId) -> float:
    return index.score(query_terms, doc_id)


def lexical_topk(index: LexicalIndex, query_text: str, k: int) -> list[tuple[ItemId, float]]:
    return index.topk(query_text, k)
