"""Precompute an embedding table for the engine's file-backed provider.

Reads a corpus artifact, embeds every rendered item line under both the
query and passage roles, and writes the table in the engine's embedding
container format so experiments can run without this service online.

Usage:
    python -m seqrec_sidecar.export_embeddings --corpus beauty.corpus \
        --out beauty.e5-small-v2.emb [--stub]
"""

from __future__ import annotations

import argparse
import json
import struct
from pathlib import Path

import numpy as np

from .finetune_recipe import read_corpus
from .stub import StubEmbedder

MAGIC = b"SREMB1\n"


def write_table(path: str | Path, keys: list[str], matrix: np.ndarray, provider: str) -> None:
    header = {
        "dim": int(matrix.shape[1]),
        "rows": int(matrix.shape[0]),
        "provider": provider,
        "normalized": True,
        "manifest_kind": "text_keys",
        "keys": keys,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    blob = blob.encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        f.write(matrix.astype("<f4").tobytes(order="C"))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Export role-prefixed item embeddings")
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--model", default="intfloat/e5-small-v2")
    parser.add_argument("--stub", action="store_true", help="use the stub embedder (tests)")
    parser.add_argument("--batch-size", type=int, default=128)
    args = parser.parse_args(argv)

    titles, _sequences = read_corpus(args.corpus)
    texts = [f"Title: {title}" for _, title in sorted(titles.items())]

    if args.stub:
        embedder = StubEmbedder()
    else:
        from .real import E5Embedder

        embedder = E5Embedder(args.model)

    keys: list[str] = []
    blocks: list[np.ndarray] = []
    for role in ("query", "passage"):
        for start in range(0, len(texts), args.batch_size):
            batch = texts[start : start + args.batch_size]
            blocks.append(embedder.embed(batch, role))
            keys.extend(f"{role}: {t}" for t in batch)
    matrix = np.vstack(blocks)
    write_table(args.out, keys, matrix, provider=embedder.name)
    print(f"wrote {matrix.shape[0]} vectors (dim {matrix.shape[1]}) to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
