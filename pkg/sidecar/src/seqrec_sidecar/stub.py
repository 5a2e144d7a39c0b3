"""Deterministic stub backends so contract tests never download weights.

The stub embedder hashes role-prefixed tokens into signed buckets and
L2-normalizes, mimicking the prefix-sensitive behavior of the real
encoder. The stub generator either replays canned beams or continues the
prompt by echoing its item lines in most-recent-first order.
"""

from __future__ import annotations

import hashlib

import numpy as np


class StubEmbedder:
    """Hash-based sentence embedder with e5-style role prefixes."""

    def __init__(self, dim: int = 384):
        self.name = f"stub-embedder-{dim}"
        self.dim = dim
        self.normalized = True

    def embed(self, texts: list[str], role: str) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            out[i] = self._one(f"{role}: {text}")
        return out

    def _one(self, prefixed: str) -> np.ndarray:
        acc = np.zeros(self.dim, dtype=np.float64)
        for token in prefixed.lower().split():
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:4], "big") % self.dim
            sign = 1.0 if digest[4] & 1 == 0 else -1.0
            acc[bucket] += sign
        norm = float(np.linalg.norm(acc))
        if norm == 0.0:
            acc[0] = 1.0
            norm = 1.0
        return (acc / norm).astype(np.float32)


class StubGenerator:
    """Beam-search stand-in: canned beams, or echo of prompt item lines."""

    def __init__(self, canned_beams: list[str] | None = None):
        self.name = "stub-generator"
        self.canned_beams = canned_beams
        self.decoding = {"strategy": "stub", "deterministic": True}

    def generate(self, prompt: str, num_beams: int, max_new_tokens: int) -> list[tuple[str, float]]:
        if self.canned_beams is not None:
            beams = list(self.canned_beams)
        else:
            lines = [l for l in prompt.splitlines() if l.startswith("Title: ")]
            seen: set[str] = set()
            beams = []
            for line in reversed(lines):
                if line not in seen:
                    seen.add(line)
                    beams.append(line)
        beams = beams[:num_beams]
        capped = [" ".join(b.split()[:max_new_tokens]) for b in beams]
        return [(text, -float(i)) for i, text in enumerate(capped)]
