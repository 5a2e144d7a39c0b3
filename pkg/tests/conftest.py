"""Shared fixtures: toy catalogs, the wig-history example, fixture paths."""

import pytest

from seqrec.corpus import Catalog, Item

FIXTURE_DIR_NAME = "fixtures"

# Item history used throughout the prompt-rendering tests.
WIG_TITLES = [
    "63cm Long Zipper Beige+pink Wavy Cosplay Hair Wig Rw157",
    "MapofBeauty Long Wave Curly Hair Wig Full Wig for Women Long (Black)",
    "32\" 80cm Long Hair Heat Resistant Spiral Curly Cosplay Wig (Red Dark)",
]


def make_item(item_id: str, title: str) -> Item:
    return Item(id=item_id, title=title)


@pytest.fixture
def wig_items() -> list[Item]:
    return [make_item(f"W{i}", t) for i, t in enumerate(WIG_TITLES, start=1)]


@pytest.fixture
def toy_catalog() -> Catalog:
    """Three docs with hand-countable BM25 statistics."""
    return Catalog(
        [
            make_item("A1", "red fox"),
            make_item("A2", "red red wolf"),
            make_item("A3", "blue owl"),
        ]
    )


@pytest.fixture
def fixture_dir(request) -> str:
    return str(request.config.rootpath / "tests" / FIXTURE_DIR_NAME)
