"""Exception hierarchy shared across the engine.

Each class maps to one failure category so the CLI can translate them
into stable exit codes.
"""


class SeqrecError(Exception):
    """Base class for all engine errors."""


class CorpusFormatError(SeqrecError):
    """Raw dump is malformed beyond the tolerated error rate."""


class SplitError(SeqrecError):
    """A user sequence is too short to split."""


class StatsError(SeqrecError):
    """Statistics requested over an empty corpus."""


class RenderError(SeqrecError):
    """An item cannot be rendered to text (excluded or empty title)."""


class BudgetError(SeqrecError):
    """Prompt cannot fit the token budget even after truncation."""


class IndexBuildError(SeqrecError):
    """Index construction failed or was given an empty catalog."""


class ProviderContractError(SeqrecError):
    """Embedding provider violated its declared contract (dim, fingerprint)."""


class TransportError(SeqrecError):
    """HTTP transport to an external service failed after retries."""


class GenerationError(SeqrecError):
    """Candidate generation failed for a user."""


class EvalError(SeqrecError):
    """Metric computation over empty or malformed outcomes."""


class ConfigError(SeqrecError):
    """Invalid or inconsistent run configuration."""
