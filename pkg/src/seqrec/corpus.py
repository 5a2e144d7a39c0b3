"""Corpus ingestion: raw review/metadata dumps to chronological user sequences.

Handles the loose record format of the 2014 Amazon dumps (single-quoted
object literals) as well as strict JSON lines, builds per-user
chronological sequences, validates k-core properties, produces
leave-last-out splits and dataset statistics, and assigns users to
length-based segments.
"""

from __future__ import annotations

import ast
import gzip
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

from .errors import CorpusFormatError, SplitError, StatsError

ItemId = str

CORPUS_MAGIC = "SEQREC1"

# Fraction of unparseable lines tolerated before ingestion aborts.
MAX_BAD_LINE_RATIO = 0.05

REVIEWER_FIELDS = ("reviewerID", "reviewer_id", "user_id")
ASIN_FIELDS = ("asin", "item_id")
TIME_FIELDS = ("unixReviewTime", "timestamp")
TITLE_FIELDS = ("title",)

SEGMENT_COLD = "cold_start"
SEGMENT_REGULAR = "regular"
SEGMENT_POWER = "power"
SEGMENTS = (SEGMENT_COLD, SEGMENT_REGULAR, SEGMENT_POWER)


@dataclass(frozen=True)
class Item:
    id: ItemId
    title: str
    extra_attributes: tuple[tuple[str, str], ...] = ()
    excluded: bool = False


@dataclass(frozen=True)
class Interaction:
    user: str
    item: ItemId
    timestamp: int


@dataclass
class UserSequence:
    user: str
    items: list[ItemId]

    @property
    def n(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class SplitExample:
    user: str
    history: tuple[ItemId, ...]
    target: ItemId
    split_role: str  # train | validation | test


@dataclass(frozen=True)
class SplitSet:
    train: list[SplitExample]
    validation: list[SplitExample]
    test: list[SplitExample]


@dataclass(frozen=True)
class SegmentThresholds:
    l: int
    h: int

    def __post_init__(self) -> None:
        if not (0 < self.l < self.h):
            raise ValueError(f"thresholds must satisfy 0 < l < h, got l={self.l} h={self.h}")


@dataclass(frozen=True)
class DatasetStats:
    num_users: int
    num_items: int
    num_interactions: int
    mean_seq_length: float


@dataclass
class ParseReport:
    records: int = 0
    errors: int = 0
    first_bad_line: int | None = None


@dataclass
class SequenceBuildReport:
    dropped_interactions: int = 0
    dropped_users: int = 0
    kept_interactions: int = 0


class Catalog:
    """Immutable item store; iteration order is ascending item id."""

    def __init__(self, items: Iterable[Item]):
        by_id: dict[ItemId, Item] = {}
        for item in items:
            if item.id not in by_id:
                by_id[item.id] = item
        self._items = by_id
        self._ordered_ids = sorted(by_id)

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item_id: ItemId) -> bool:
        return item_id in self._items

    def __getitem__(self, item_id: ItemId) -> Item:
        return self._items[item_id]

    def __iter__(self) -> Iterator[Item]:
        for item_id in self._ordered_ids:
            yield self._items[item_id]

    @property
    def ordered_ids(self) -> list[ItemId]:
        return list(self._ordered_ids)

    def get(self, item_id: ItemId) -> Item | None:
        return self._items.get(item_id)

    def usable(self, item_id: ItemId) -> bool:
        item = self._items.get(item_id)
        return item is not None and not item.excluded and bool(item.title)

    def restrict(self, item_ids: Iterable[ItemId]) -> "Catalog":
        keep = set(item_ids)
        return Catalog(item for item in self if item.id in keep)


def open_maybe_gzip(path: str | Path) -> IO[bytes]:
    """Open a dump file, transparently handling .gz suffixes."""
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _parse_record(line: str) -> dict:
    """Parse one dump line: strict JSON first, then the 2014 loose literal style."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        obj = ast.literal_eval(line)
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    return obj


def _first_field(obj: dict, names: tuple[str, ...]):
    for name in names:
        if name in obj:
            return obj[name]
    return None


def _decode_lines(stream: IO[bytes] | IO[str]) -> Iterator[tuple[int, str]]:
    text = stream if isinstance(stream, io.TextIOBase) else io.TextIOWrapper(stream, encoding="utf-8")
    for lineno, raw in enumerate(text, start=1):
        line = raw.strip()
        if line:
            yield lineno, line


def _check_error_rate(report: ParseReport, what: str) -> None:
    total = report.records + report.errors
    if total and report.errors / total > MAX_BAD_LINE_RATIO:
        raise CorpusFormatError(
            f"{what}: {report.errors} of {total} lines unparseable "
            f"(first bad line {report.first_bad_line})"
        )


def parse_reviews(
    stream: IO[bytes] | IO[str],
    reviewer_fields: tuple[str, ...] = REVIEWER_FIELDS,
    asin_fields: tuple[str, ...] = ASIN_FIELDS,
    time_fields: tuple[str, ...] = TIME_FIELDS,
) -> tuple[list[Interaction], ParseReport]:
    """Parse a one-record-per-line review dump into interactions, in file order.

    Unparseable lines are counted, not fatal, unless they exceed
    MAX_BAD_LINE_RATIO of the file.
    """
    interactions: list[Interaction] = []
    report = ParseReport()
    for lineno, line in _decode_lines(stream):
        try:
            obj = _parse_record(line)
            user = _first_field(obj, reviewer_fields)
            item = _first_field(obj, asin_fields)
            ts = _first_field(obj, time_fields)
            if user is None or item is None or ts is None:
                raise ValueError("missing reviewer/asin/timestamp field")
            ts = int(ts)
            if ts < 0:
                raise ValueError("negative timestamp")
            interactions.append(Interaction(user=str(user), item=str(item), timestamp=ts))
            report.records += 1
        except (ValueError, SyntaxError):
            report.errors += 1
            if report.first_bad_line is None:
                report.first_bad_line = lineno
    _check_error_rate(report, "reviews")
    return interactions, report


def parse_metadata(
    stream: IO[bytes] | IO[str],
    asin_fields: tuple[str, ...] = ASIN_FIELDS,
    title_fields: tuple[str, ...] = TITLE_FIELDS,
) -> tuple[list[Item], ParseReport]:
    """Parse an item metadata dump.

    Items without a usable title are kept but flagged excluded; duplicate
    ids keep the first occurrence.
    """
    items: list[Item] = []
    seen: set[ItemId] = set()
    report = ParseReport()
    for lineno, line in _decode_lines(stream):
        try:
            obj = _parse_record(line)
            item_id = _first_field(obj, asin_fields)
            if item_id is None:
                raise ValueError("missing asin field")
            item_id = str(item_id)
            if item_id in seen:
                report.records += 1
                continue
            seen.add(item_id)
            title = _first_field(obj, title_fields)
            title = str(title).strip() if title is not None else ""
            items.append(Item(id=item_id, title=title, excluded=not title))
            report.records += 1
        except (ValueError, SyntaxError):
            report.errors += 1
            if report.first_bad_line is None:
                report.first_bad_line = lineno
    _check_error_rate(report, "metadata")
    return items, report


def build_sequences(
    interactions: list[Interaction],
    catalog: Catalog,
    min_length: int = 3,
) -> tuple[list[UserSequence], SequenceBuildReport]:
    """Group interactions by user and sort chronologically (stable on ties).

    Interactions on excluded or unknown items are dropped, then users
    shorter than min_length are removed. Users are returned in first-
    appearance order of the input.
    """
    report = SequenceBuildReport()
    per_user: dict[str, list[tuple[int, int, ItemId]]] = {}
    order = 0
    for inter in interactions:
        if not catalog.usable(inter.item):
            report.dropped_interactions += 1
            continue
        per_user.setdefault(inter.user, []).append((inter.timestamp, order, inter.item))
        order += 1

    sequences: list[UserSequence] = []
    for user, entries in per_user.items():
        entries.sort(key=lambda e: (e[0], e[1]))
        if len(entries) < min_length:
            report.dropped_users += 1
            report.dropped_interactions += len(entries)
            continue
        report.kept_interactions += len(entries)
        sequences.append(UserSequence(user=user, items=[e[2] for e in entries]))
    return sequences, report


@dataclass
class KcoreReport:
    k: int
    under_k_users: list[str] = field(default_factory=list)
    under_k_items: list[ItemId] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.under_k_users and not self.under_k_items


def validate_kcore(sequences: list[UserSequence], k: int = 5) -> KcoreReport:
    """Report users with < k interactions and items with < k occurrences.

    Does not filter; the official dumps are already 5-core. Use
    kcore_refilter for the iterative fixpoint variant.
    """
    report = KcoreReport(k=k)
    item_counts: dict[ItemId, int] = {}
    for seq in sequences:
        if seq.n < k:
            report.under_k_users.append(seq.user)
        for item in seq.items:
            item_counts[item] = item_counts.get(item, 0) + 1
    report.under_k_items = sorted(i for i, c in item_counts.items() if c < k)
    return report


def kcore_refilter(sequences: list[UserSequence], k: int = 5) -> list[UserSequence]:
    """Alternately drop under-k users and items until a fixpoint is reached."""
    current = [UserSequence(s.user, list(s.items)) for s in sequences]
    while True:
        changed = False
        kept = []
        for seq in current:
            if seq.n >= k:
                kept.append(seq)
            else:
                changed = True
        current = kept
        item_counts: dict[ItemId, int] = {}
        for seq in current:
            for item in seq.items:
                item_counts[item] = item_counts.get(item, 0) + 1
        bad_items = {i for i, c in item_counts.items() if c < k}
        if bad_items:
            changed = True
            for seq in current:
                seq.items = [i for i in seq.items if i not in bad_items]
        if not changed:
            return current


def leave_last_out_split(sequences: list[UserSequence]) -> SplitSet:
    """Hold out each user's final item for test and the penultimate for validation.

    The train example for a user covers the first n-1 items: history
    i_{1:n-2}, target i_{n-1}.
    """
    train, validation, test = [], [], []
    for seq in sequences:
        if seq.n < 3:
            raise SplitError(f"user {seq.user} has only {seq.n} interactions, need >= 3")
        items = tuple(seq.items)
        train.append(SplitExample(seq.user, items[:-2], items[-2], "train"))
        validation.append(SplitExample(seq.user, items[:-2], items[-2], "validation"))
        test.append(SplitExample(seq.user, items[:-1], items[-1], "test"))
    return SplitSet(train=train, validation=validation, test=test)


def compute_stats(sequences: list[UserSequence], catalog: Catalog) -> DatasetStats:
    if not sequences:
        raise StatsError("no user sequences; cannot compute statistics")
    num_interactions = sum(seq.n for seq in sequences)
    return DatasetStats(
        num_users=len(sequences),
        num_items=len(catalog),
        num_interactions=num_interactions,
        mean_seq_length=num_interactions / len(sequences),
    )


def assign_segment(n: int, thresholds: SegmentThresholds) -> str:
    """Classify a user by full sequence length: n<=l cold, l<n<=h regular, n>h power."""
    if n <= thresholds.l:
        return SEGMENT_COLD
    if n <= thresholds.h:
        return SEGMENT_REGULAR
    return SEGMENT_POWER


def write_corpus(
    path: str | Path,
    dataset: str,
    catalog: Catalog,
    sequences: list[UserSequence],
    policy_counts: dict[str, int] | None = None,
) -> None:
    """Persist the ingested corpus so later stages never re-parse raw dumps.

    Line-delimited: magic header, one JSON meta line, item records sorted
    by id, then user records in ingestion order.
    """
    stats = compute_stats(sequences, catalog)
    meta = {
        "dataset": dataset,
        "num_users": stats.num_users,
        "num_items": stats.num_items,
        "num_interactions": stats.num_interactions,
        "policy": dict(sorted((policy_counts or {}).items())),
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(CORPUS_MAGIC + "\n")
        f.write(json.dumps(meta, sort_keys=True) + "\n")
        for item in catalog:
            rec = {"kind": "item", "id": item.id, "title": item.title}
            if item.extra_attributes:
                rec["attrs"] = [list(pair) for pair in item.extra_attributes]
            f.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
        for seq in sequences:
            rec = {"kind": "user", "user": seq.user, "items": seq.items}
            f.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")


def read_corpus(path: str | Path) -> tuple[dict, Catalog, list[UserSequence]]:
    """Load a corpus artifact written by write_corpus."""
    with open(path, "r", encoding="utf-8") as f:
        magic = f.readline().strip()
        if magic != CORPUS_MAGIC:
            raise CorpusFormatError(f"{path}: expected {CORPUS_MAGIC} header, got {magic!r}")
        meta = json.loads(f.readline())
        items: list[Item] = []
        sequences: list[UserSequence] = []
        for lineno, line in enumerate(f, start=3):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("kind") == "item":
                attrs = tuple(tuple(pair) for pair in rec.get("attrs", []))
                items.append(Item(id=rec["id"], title=rec["title"], extra_attributes=attrs))
            elif rec.get("kind") == "user":
                sequences.append(UserSequence(user=rec["user"], items=list(rec["items"])))
            else:
                raise CorpusFormatError(f"{path}:{lineno}: unknown record kind")
    return meta, Catalog(items), sequences
