"""Serialize purchase histories into prompts and parse generated candidates back.

The default template renders the instruction header, a chronological
`Purchase history:` block of `Title: ...` lines, and a `Next item:` label.
Training texts additionally end with the target item line. Over-budget
prompts drop whole items from the front (oldest first), never mid-line.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import Item
from .errors import BudgetError, RenderError

DEFAULT_HEADER = (
    "Below is a customer's purchase history on Amazon, listed in chronological order "
    "(earliest to latest). Each item is represented by the following format: "
    "Title: <item title>. Based on this history, predict only one item the customer "
    "is most likely to purchase next in the same format."
)

DEFAULT_TOKEN_BUDGET = 1024

TokenCounter = Callable[[str], int]


def whitespace_token_count(text: str) -> int:
    """Approximate token counter used for the prompt budget: whitespace words."""
    return len(text.split())


@dataclass(frozen=True)
class PromptTemplate:
    instruction_header: str = DEFAULT_HEADER
    history_label: str = "Purchase history:"
    next_item_label: str = "Next item:"
    item_line_format: str = "Title: {title}"


DEFAULT_TEMPLATE = PromptTemplate()


@dataclass(frozen=True)
class RenderedExample:
    text: str
    target_suffix: str | None
    token_budget_used: int


def render_item(item: Item, template: PromptTemplate = DEFAULT_TEMPLATE) -> str:
    """Render one item line, e.g. `Title: Sigma F80 - Flat Kabuki TM`."""
    if item.excluded:
        raise RenderError(f"item {item.id} is excluded from the text catalog")
    title = " ".join(item.title.split())
    if not title:
        raise RenderError(f"item {item.id} has an empty title")
    return template.item_line_format.format(title=title).rstrip()


def _assemble(
    history_lines: Sequence[str],
    target_line: str | None,
    template: PromptTemplate,
) -> str:
    parts = [template.instruction_header, ""]
    parts.append(template.history_label)
    parts.extend(history_lines)
    parts.append(template.next_item_label)
    if target_line is not None:
        parts.append(target_line)
    return "\n".join(parts) + "\n"


def _truncate_to_budget(
    history_lines: list[str],
    target_line: str | None,
    budget: int,
    template: PromptTemplate,
    count_tokens: TokenCounter,
) -> tuple[str, int]:
    lines = list(history_lines)
    while True:
        text = _assemble(lines, target_line, template)
        used = count_tokens(text)
        if used <= budget:
            return text, used
        if len(lines) <= 1:
            raise BudgetError(
                f"prompt needs {used} tokens with a single history item, budget is {budget}"
            )
        lines.pop(0)


def build_training_text(
    history: Sequence[Item],
    target: Item,
    budget: int = DEFAULT_TOKEN_BUDGET,
    template: PromptTemplate = DEFAULT_TEMPLATE,
    count_tokens: TokenCounter = whitespace_token_count,
) -> RenderedExample:
    """Serialize history plus the next-item line into one training text."""
    if not history:
        raise RenderError("training text requires a non-empty history")
    history_lines = [render_item(item, template) for item in history]
    target_line = render_item(target, template)
    text, used = _truncate_to_budget(history_lines, target_line, budget, template, count_tokens)
    return RenderedExample(text=text, target_suffix=target_line, token_budget_used=used)


def build_test_prompt(
    history: Sequence[Item],
    budget: int = DEFAULT_TOKEN_BUDGET,
    template: PromptTemplate = DEFAULT_TEMPLATE,
    count_tokens: TokenCounter = whitespace_token_count,
) -> RenderedExample:
    """Serialize the full history into a prompt ending at the next-item label."""
    if not history:
        raise RenderError("test prompt requires a non-empty history")
    history_lines = [render_item(item, template) for item in history]
    text, used = _truncate_to_budget(history_lines, None, budget, template, count_tokens)
    return RenderedExample(text=text, target_suffix=None, token_budget_used=used)


def parse_generated_candidate(raw: str) -> str:
    """Reduce a raw generation to a retrieval query: first non-blank line, trimmed.

    A `Title: ` prefix is kept because catalog documents carry the same
    prefix. Returns "" for an entirely blank generation; callers skip
    such beams.
    """
    for line in raw.splitlines():
        line = line.strip()
        if line:
            return line
    return ""
