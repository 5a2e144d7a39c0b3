"""Wire-protocol schemas for the inference sidecar."""

from typing import Literal

from pydantic import BaseModel, Field


class EmbedRequest(BaseModel):
    texts: list[str]
    role: Literal["query", "passage"]


class EmbedResponse(BaseModel):
    dim: int
    vectors: list[list[float]]
    normalized: bool


class GenerateRequest(BaseModel):
    prompt: str
    num_beams: int = Field(default=5, ge=1, le=64)
    max_new_tokens: int = Field(default=50, ge=1, le=2048)


class Candidate(BaseModel):
    text: str
    score: float


class GenerateResponse(BaseModel):
    candidates: list[Candidate]


class BackendInfo(BaseModel):
    name: str
    dim: int | None = None
    extra: dict = Field(default_factory=dict)


class Health(BaseModel):
    status: str
    mode: Literal["stub", "real"]
    embedder: BackendInfo | None
    generator: BackendInfo | None
