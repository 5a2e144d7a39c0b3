"""HTTP inference sidecar: embeddings and beam-search generation."""

from .service import Settings, create_app
from .stub import StubEmbedder, StubGenerator

__version__ = "0.1.0"

__all__ = ["Settings", "StubEmbedder", "StubGenerator", "create_app"]
