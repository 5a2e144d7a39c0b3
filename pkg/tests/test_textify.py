"""Prompt rendering, item-granular left truncation, and candidate parsing."""

import random

import pytest

from seqrec.corpus import Item
from seqrec.errors import BudgetError, RenderError
from seqrec.textify import (
    RenderedExample,
    build_test_prompt,
    build_training_text,
    parse_generated_candidate,
    render_item,
    whitespace_token_count,
)

from conftest import WIG_TITLES, make_item

TRAINING_TEXT = (
    "Below is a customer's purchase history on Amazon, listed in chronological order "
    "(earliest to latest). Each item is represented by the following format: "
    "Title: <item title>. Based on this history, predict only one item the customer "
    "is most likely to purchase next in the same format.\n"
    "\n"
    "Purchase history:\n"
    "Title: 63cm Long Zipper Beige+pink Wavy Cosplay Hair Wig Rw157\n"
    "Title: MapofBeauty Long Wave Curly Hair Wig Full Wig for Women Long (Black)\n"
    "Next item:\n"
    "Title: 32\" 80cm Long Hair Heat Resistant Spiral Curly Cosplay Wig (Red Dark)\n"
)

TEST_PROMPT = (
    "Below is a customer's purchase history on Amazon, listed in chronological order "
    "(earliest to latest). Each item is represented by the following format: "
    "Title: <item title>. Based on this history, predict only one item the customer "
    "is most likely to purchase next in the same format.\n"
    "\n"
    "Purchase history:\n"
    "Title: 63cm Long Zipper Beige+pink Wavy Cosplay Hair Wig Rw157\n"
    "Title: MapofBeauty Long Wave Curly Hair Wig Full Wig for Women Long (Black)\n"
    "Title: 32\" 80cm Long Hair Heat Resistant Spiral Curly Cosplay Wig (Red Dark)\n"
    "Next item:\n"
)


class TestRenderItem:
    def test_title_line(self):
        item = make_item("A1", "Sigma F80 - Flat Kabuki TM")
        assert render_item(item) == "Title: Sigma F80 - Flat Kabuki TM"

    def test_internal_newline_replaced_by_space(self):
        item = make_item("A1", "first line\nsecond line")
        assert render_item(item) == "Title: first line second line"

    def test_empty_title_errors(self):
        with pytest.raises(RenderError):
            render_item(make_item("A1", "   "))

    def test_excluded_item_errors(self):
        with pytest.raises(RenderError):
            render_item(Item("A1", "fine title", excluded=True))


class TestPromptRendering:
    def test_training_text_verbatim(self, wig_items):
        rendered = build_training_text(wig_items[:2], wig_items[2])
        assert rendered.text == TRAINING_TEXT
        assert rendered.target_suffix == "Title: " + WIG_TITLES[2]

    def test_test_prompt_verbatim(self, wig_items):
        rendered = build_test_prompt(wig_items)
        assert rendered.text == TEST_PROMPT
        assert rendered.target_suffix is None

    def test_single_item_history(self, wig_items):
        rendered = build_test_prompt(wig_items[:1])
        lines = rendered.text.splitlines()
        assert lines[-2:] == ["Title: " + WIG_TITLES[0], "Next item:"]

    def test_round_trip(self, wig_items):
        prompt = build_test_prompt(wig_items[:2])
        training = build_training_text(wig_items[:2], wig_items[2])
        assert prompt.text + render_item(wig_items[2]) + "\n" == training.text

    def test_prompt_determinism(self, wig_items):
        a = build_test_prompt(wig_items)
        b = build_test_prompt(wig_items)
        assert a == b

    def test_round_trip_on_random_histories(self):
        rng = random.Random(17)
        for _ in range(50):
            items = [
                make_item(f"R{i}", " ".join(f"tok{rng.randint(0, 50)}"
                                            for _ in range(rng.randint(1, 7))))
                for i in range(rng.randint(1, 12))
            ]
            target = make_item("T", "target product line")
            prompt = build_test_prompt(items)
            training = build_training_text(items, target)
            assert prompt.text + render_item(target) + "\n" == training.text


class TestTruncation:
    def test_budget_drops_front_items(self, wig_items):
        full = build_test_prompt(wig_items)
        tight = build_test_prompt(wig_items, budget=full.token_budget_used - 1)
        assert WIG_TITLES[0] not in tight.text
        assert WIG_TITLES[1] in tight.text and WIG_TITLES[2] in tight.text

    def test_long_history_respects_budget(self):
        items = [make_item(f"I{i}", f"Product number {i} deluxe edition") for i in range(200)]
        rendered = build_test_prompt(items, budget=1024)
        # Oracle: recount the final text with the budget tokenizer.
        assert whitespace_token_count(rendered.text) == rendered.token_budget_used
        assert rendered.token_budget_used <= 1024
        assert "Product number 0 deluxe" not in rendered.text
        assert "Product number 199 deluxe" in rendered.text

    def test_budget_too_small_errors(self, wig_items):
        with pytest.raises(BudgetError):
            build_test_prompt(wig_items, budget=10)

    def test_truncation_inactive_on_short_history(self, wig_items):
        small = build_test_prompt(wig_items, budget=200)
        large = build_test_prompt(wig_items, budget=1200)
        assert small.text == large.text

    def test_truncation_monotonicity(self):
        rng = random.Random(11)
        items = [
            make_item(f"I{i}", " ".join(f"word{rng.randint(0, 99)}" for _ in range(rng.randint(2, 8))))
            for i in range(30)
        ]
        full = build_test_prompt(items, budget=100000)

        def retained(rendered: RenderedExample) -> list[str]:
            lines = rendered.text.splitlines()
            return [l for l in lines if l.startswith("Title: ")]

        previous = retained(full)
        for budget in range(full.token_budget_used, 60, -7):
            try:
                current = retained(build_test_prompt(items, budget=budget))
            except BudgetError:
                break
            # Only a prefix of history items may disappear; never a reorder.
            assert current == previous[len(previous) - len(current):]
            previous = current


class TestParseGeneratedCandidate:
    def test_first_line_kept_with_prefix(self):
        raw = "Title: Sigma F80 - Flat Kabuki TM\n\nextra"
        assert parse_generated_candidate(raw) == "Title: Sigma F80 - Flat Kabuki TM"

    def test_trimmed_without_prefix(self):
        assert parse_generated_candidate("  wig set  ") == "wig set"

    def test_blank_generation_maps_to_empty(self):
        assert parse_generated_candidate("\n\n") == ""

    def test_leading_blank_lines_skipped(self):
        assert parse_generated_candidate("\n   \nTitle: X") == "Title: X"
