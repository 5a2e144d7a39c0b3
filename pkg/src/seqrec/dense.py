"""Embedding providers and exact dot-product top-k search over the catalog.

Catalog scoring is always a full scan (no approximate structures):
vectors are stored as float32, scores accumulate in float64, and ties
break by ascending item id. Providers are interchangeable behind one
contract: a deterministic hash-based mock, a precomputed-file lookup,
and an HTTP client for a real encoder service.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from .corpus import Catalog, ItemId
from .errors import CorpusFormatError, IndexBuildError, ProviderContractError, TransportError
from .lexical import tokenize
from .textify import DEFAULT_TEMPLATE, PromptTemplate, render_item

DENSE_MAGIC = b"SREMB1\n"

DEFAULT_DIM = 384

ROLE_QUERY = "query"
ROLE_PASSAGE = "passage"


def provider_fingerprint(name: str, dim: int) -> str:
    return hashlib.sha256(f"{name}:{dim}".encode("utf-8")).hexdigest()[:16]


def _hash_int(token: str, salt: bytes) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, person=salt).digest()
    return int.from_bytes(digest, "little")


def hash_mock_embed(text: str, d: int) -> np.ndarray:
    """Deterministic bag-of-words feature hashing into d buckets with +/-1 signs.

    All-zero accumulations (blank text) map to the first unit basis vector
    so every output has unit L2 norm.
    """
    if d < 2:
        raise ValueError("embedding dimension must be >= 2")
    acc = np.zeros(d, dtype=np.float64)
    for token in tokenize(text):
        bucket = _hash_int(token, b"bucket_p") % d
        sign = 1.0 if _hash_int(token, b"sign_pep") % 2 == 0 else -1.0
        acc[bucket] += sign
    norm = float(np.linalg.norm(acc))
    if norm == 0.0:
        acc[0] = 1.0
        norm = 1.0
    return (acc / norm).astype(np.float32)


class HashEmbeddingProvider:
    """Test-double provider backed by hash_mock_embed; role has no effect."""

    def __init__(self, dim: int = DEFAULT_DIM):
        self.name = "hash-mock"
        self.dim = dim
        self.normalizes = True
        self.applies_role_prefix = False

    def embed(self, texts: Sequence[str], role: str) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.stack([hash_mock_embed(t, self.dim) for t in texts])


class FileEmbeddingProvider:
    """Serve precomputed vectors from an embedding table keyed by prefixed text.

    Keys in the table are `<role>: <text>` strings, matching the prefix
    convention of e5-family encoders.
    """

    def __init__(self, path: str | Path):
        header, matrix = _read_container(path)
        if header.get("manifest_kind") != "text_keys":
            raise ProviderContractError(f"{path}: not an embedding table (no text keys)")
        self.name = header["provider"]
        self.dim = int(header["dim"])
        self.normalizes = bool(header.get("normalized", True))
        self.applies_role_prefix = True
        self._rows = {key: i for i, key in enumerate(header["keys"])}
        self._matrix = matrix

    def embed(self, texts: Sequence[str], role: str) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            key = f"{role}: {text}"
            row = self._rows.get(key)
            if row is None:
                raise ProviderContractError(f"no precomputed embedding for key {key!r}")
            out[i] = self._matrix[row]
        return out


class HttpEmbeddingProvider:
    """Client for a POST /embed endpoint (see the inference sidecar)."""

    def __init__(
        self,
        url: str,
        name: str = "e5-small-v2",
        dim: int = DEFAULT_DIM,
        normalizes: bool = True,
        retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 60.0,
    ):
        self.url = url.rstrip("/")
        self.name = name
        self.dim = dim
        self.normalizes = normalizes
        self.applies_role_prefix = True
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout

    def embed(self, texts: Sequence[str], role: str) -> np.ndarray:
        payload = {"texts": list(texts), "role": role}
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = requests.post(f"{self.url}/embed", json=payload, timeout=self.timeout)
                resp.raise_for_status()
                body = resp.json()
                if int(body["dim"]) != self.dim:
                    raise ProviderContractError(
                        f"provider returned dim {body['dim']}, expected {self.dim}"
                    )
                matrix = np.array(body["vectors"], dtype=np.float32)
                if matrix.shape != (len(texts), self.dim):
                    raise ProviderContractError(f"provider returned shape {matrix.shape}")
                return matrix
            except ProviderContractError:
                raise
            except Exception as exc:  # noqa: BLE001 - transport failures retried
                last_error = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * (2**attempt))
        raise TransportError(f"embed endpoint failed after {self.retries} attempts: {last_error}")


class DenseIndex:
    """Catalog embedding matrix with exact dot-product top-k search."""

    def __init__(
        self,
        doc_ids: list[ItemId],
        matrix: np.ndarray,
        provider_name: str,
        normalized: bool = True,
    ):
        if matrix.ndim != 2 or matrix.shape[0] != len(doc_ids):
            raise IndexBuildError(f"matrix shape {matrix.shape} does not match {len(doc_ids)} docs")
        self.doc_ids = list(doc_ids)
        self.matrix = matrix.astype(np.float32, copy=False)
        self.provider_name = provider_name
        self.normalized = normalized
        self._matrix64: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def fingerprint(self) -> str:
        return provider_fingerprint(self.provider_name, self.dim)

    def _scores(self, query: np.ndarray) -> np.ndarray:
        if self._matrix64 is None:
            self._matrix64 = self.matrix.astype(np.float64)
        return self._matrix64 @ query.astype(np.float64)

    def topk(self, query_vector: np.ndarray, k: int) -> list[tuple[ItemId, float]]:
        query = np.asarray(query_vector)
        if query.shape != (self.dim,):
            raise ProviderContractError(
                f"query dimension {query.shape} does not match index dim {self.dim}"
            )
        if k < 1:
            return []
        scores = self._scores(query)
        ordinals = np.arange(len(self.doc_ids))
        order = np.lexsort((ordinals, -scores))[: min(k, len(self.doc_ids))]
        return [(self.doc_ids[int(o)], float(scores[int(o)])) for o in order]

    def save(self, path: str | Path) -> None:
        header = {
            "dim": self.dim,
            "rows": len(self.doc_ids),
            "provider": self.provider_name,
            "normalized": self.normalized,
            "manifest_kind": "item_ids",
            "doc_ids": self.doc_ids,
        }
        _write_container(path, header, self.matrix)

    @classmethod
    def load(cls, path: str | Path) -> "DenseIndex":
        header, matrix = _read_container(path)
        if header.get("manifest_kind") != "item_ids":
            raise CorpusFormatError(f"{path}: not a dense catalog index")
        return cls(
            doc_ids=list(header["doc_ids"]),
            matrix=matrix,
            provider_name=header["provider"],
            normalized=bool(header.get("normalized", True)),
        )


def _write_container(path: str | Path, header: dict, matrix: np.ndarray) -> None:
    blob = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    blob = blob.encode("utf-8")
    with open(path, "wb") as f:
        f.write(DENSE_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        f.write(matrix.astype("<f4").tobytes(order="C"))


def _read_container(path: str | Path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as f:
        if f.read(len(DENSE_MAGIC)) != DENSE_MAGIC:
            raise CorpusFormatError(f"{path}: not an embedding container")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        rows, dim = int(header["rows"]), int(header["dim"])
        data = np.frombuffer(f.read(rows * dim * 4), dtype="<f4")
        if data.size != rows * dim:
            raise CorpusFormatError(f"{path}: truncated embedding matrix")
        return header, data.reshape(rows, dim).astype(np.float32)


def write_embedding_table(
    path: str | Path,
    keys: Sequence[str],
    matrix: np.ndarray,
    provider_name: str,
    normalized: bool = True,
) -> None:
    """Persist a text-keyed embedding table for FileEmbeddingProvider."""
    header = {
        "dim": int(matrix.shape[1]),
        "rows": int(matrix.shape[0]),
        "provider": provider_name,
        "normalized": normalized,
        "manifest_kind": "text_keys",
        "keys": list(keys),
    }
    _write_container(path, header, matrix)


def embed(provider, texts: Sequence[str], role: str) -> np.ndarray:
    """Embed texts through a provider, enforcing the declared dimension."""
    if not texts:
        return np.zeros((0, provider.dim), dtype=np.float32)
    matrix = provider.embed(texts, role)
    if matrix.shape != (len(texts), provider.dim):
        raise ProviderContractError(
            f"provider {provider.name} returned shape {matrix.shape}, "
            f"expected ({len(texts)}, {provider.dim})"
        )
    if provider.normalizes:
        norms = np.linalg.norm(matrix.astype(np.float64), axis=1)
        worst = float(np.abs(norms - 1.0).max())
        if worst > 1e-3:  # declared contract is unit norm within 1e-4
            raise ProviderContractError(
                f"provider {provider.name} declares normalized output but a vector "
                f"deviates from unit norm by {worst:.2e}"
            )
    return matrix


def build_dense_index(
    catalog: Catalog,
    provider,
    batch_size: int = 64,
    template: PromptTemplate = DEFAULT_TEMPLATE,
) -> DenseIndex:
    """Embed every rendered catalog item (role=passage) into an index."""
    if len(catalog) == 0:
        raise IndexBuildError("cannot build a dense index over an empty catalog")
    doc_ids = []
    texts = []
    for item in catalog:
        doc_ids.append(item.id)
        texts.append(render_item(item, template))
    rows = []
    done = 0
    for start in range(0, len(texts), batch_size):
        batch = texts[start : start + batch_size]
        try:
            rows.append(embed(provider, batch, ROLE_PASSAGE))
        except Exception as exc:
            raise IndexBuildError(
                f"provider failed after embedding {done} of {len(texts)} rows: {exc}"
            ) from exc
        done += len(batch)
    matrix = np.vstack(rows)
    return DenseIndex(doc_ids, matrix, provider.name, normalized=provider.normalizes)


def dense_topk(index: DenseIndex, query_vector: np.ndarray, k: int) -> list[tuple[ItemId, float]]:
    return index.topk(query_vector, k)
