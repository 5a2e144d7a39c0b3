"""Medium-scale smoke: full-catalog retrieval stays fast and oracle-exact."""

import random
import time

from seqrec.corpus import Catalog, Item
from seqrec.lexical import build_lexical_index, tokenize
from seqrec.textify import render_item

from oracles import bruteforce_bm25_topk


def test_five_thousand_doc_catalog_stays_fast_and_exact():
    rng = random.Random(2)
    vocab = [f"w{i}" for i in range(2500)]
    items = [
        Item(f"I{i:05d}", " ".join(rng.choice(vocab) for _ in range(rng.randint(3, 9))))
        for i in range(5000)
    ]
    catalog = Catalog(items)
    index = build_lexical_index(catalog)

    queries = [render_item(items[rng.randrange(len(items))]) for _ in range(200)]
    started = time.perf_counter()
    results = [index.topk(q, 5) for q in queries]
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0, f"200 queries took {elapsed:.1f}s"
    assert all(r for r in results)

    # Spot-check the fast path against the straight-line scorer.
    doc_ids = index.doc_ids
    doc_terms = [tokenize(render_item(catalog[d])) for d in doc_ids]
    for q in queries[:5]:
        got = index.topk(q, 5)
        want = bruteforce_bm25_topk(doc_ids, doc_terms, tokenize(q), 5)
        assert [g[0] for g in got] == [w[0] for w in want]
