"""Query generators: last-item, oracle (diagnostic), and external HTTP service.

A generator turns one test example into an ordered set of candidate
next-item texts. The engine never reorders candidates; blank queries are
dropped at construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import requests

from .corpus import Catalog, SplitExample
from .errors import GenerationError
from .textify import RenderedExample, render_item, parse_generated_candidate

DEFAULT_BEAMS = 5
DEFAULT_MAX_NEW_TOKENS = 50


@dataclass(frozen=True)
class CandidateSet:
    user: str
    candidates: tuple[tuple[str, float | None], ...]
    beam_width: int

    @staticmethod
    def from_raw(
        user: str,
        raw: list[tuple[str, float | None]],
        beam_width: int,
    ) -> "CandidateSet":
        kept = tuple((q, s) for q, s in raw if q)
        return CandidateSet(user=user, candidates=kept[:beam_width], beam_width=beam_width)

    @property
    def queries(self) -> list[str]:
        return [q for q, _ in self.candidates]


class LastItemGenerator:
    """Training-free baseline: the single candidate is the last history item's text."""

    name = "lis"
    needs_prompt = False

    def generate(
        self,
        example: SplitExample,
        catalog: Catalog,
        prompt: RenderedExample | None = None,
    ) -> CandidateSet:
        if not example.history:
            raise GenerationError(f"user {example.user} has an empty history")
        last = catalog[example.history[-1]]
        return CandidateSet.from_raw(example.user, [(render_item(last), None)], beam_width=1)


class OracleGenerator:
    """Diagnostic upper bound: emits the target item's own text. Self-tests only."""

    name = "oracle"
    needs_prompt = False

    def generate(
        self,
        example: SplitExample,
        catalog: Catalog,
        prompt: RenderedExample | None = None,
    ) -> CandidateSet:
        target = catalog[example.target]
        return CandidateSet.from_raw(example.user, [(render_item(target), None)], beam_width=1)


@dataclass
class ExternalGenerator:
    """Client for a POST /generate beam-search endpoint."""

    url: str
    beams: int = DEFAULT_BEAMS
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    retries: int = 3
    backoff: float = 0.5
    timeout: float = 120.0
    name: str = field(default="external", init=False)
    needs_prompt: bool = field(default=True, init=False)

    def generate(
        self,
        example: SplitExample,
        catalog: Catalog,
        prompt: RenderedExample | None = None,
    ) -> CandidateSet:
        if prompt is None:
            raise GenerationError(f"user {example.user}: external generation needs a prompt")
        payload = {
            "prompt": prompt.text,
            "num_beams": self.beams,
            "max_new_tokens": self.max_new_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = requests.post(
                    f"{self.url.rstrip('/')}/generate", json=payload, timeout=self.timeout
                )
                resp.raise_for_status()
                body = resp.json()
                raw = [
                    (parse_generated_candidate(c.get("text", "")), c.get("score"))
                    for c in body["candidates"]
                ]
                return CandidateSet.from_raw(example.user, raw, beam_width=self.beams)
            except Exception as exc:  # noqa: BLE001 - transient failures retried
                last_error = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * (2**attempt))
        raise GenerationError(
            f"user {example.user}: generate endpoint failed after "
            f"{self.retries} attempts: {last_error}"
        )
