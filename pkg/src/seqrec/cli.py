"""Command-line entry point: ingest | index | run | report.

A JSON config file supplies defaults; command-line flags override it.
Every command is idempotent for identical inputs, and artifacts carry no
timestamps so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import (
    Catalog,
    SegmentThresholds,
    build_sequences,
    compute_stats,
    leave_last_out_split,
    open_maybe_gzip,
    parse_metadata,
    parse_reviews,
    read_corpus,
    write_corpus,
)
from .dense import (
    DENSE_MAGIC,
    DEFAULT_DIM,
    DenseIndex,
    FileEmbeddingProvider,
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    build_dense_index,
)
from .errors import (
    ConfigError,
    CorpusFormatError,
    EvalError,
    SeqrecError,
    SplitError,
    StatsError,
    TransportError,
)
from .evaluate import format_report, load_outcomes, report_to_dict, segment_report
from .generate import (
    DEFAULT_BEAMS,
    DEFAULT_MAX_NEW_TOKENS,
    ExternalGenerator,
    LastItemGenerator,
    OracleGenerator,
)
from .lexical import DEFAULT_B, DEFAULT_K1, LEXICAL_MAGIC, LexicalIndex, build_lexical_index
from .pipeline import (
    DenseRetriever,
    ExperimentConfig,
    FUSION_RANK_INTERLEAVE,
    LexicalRetriever,
    run_experiment,
)
from .textify import DEFAULT_TOKEN_BUDGET, PromptTemplate

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PARSE = 3
EXIT_TRANSPORT = 4

# Upper segment threshold by dataset; lower is 5 everywhere.
DATASET_H = {"beauty": 14, "toys": 13, "sports": 13}
DEFAULT_L = 5
DEFAULT_H = 14


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    with open(p, "r", encoding="utf-8") as f:
        return json.load(f)


def _cfg(args: argparse.Namespace, config: dict, key: str, default=None):
    """Effective setting: CLI flag beats config file beats default."""
    value = getattr(args, key.replace(".", "_"), None)
    if value is not None:
        return value
    node = config
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def _require_path(value, what: str) -> Path:
    if not value:
        raise ConfigError(f"missing required path: {what}")
    path = Path(value)
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _template(args: argparse.Namespace, config: dict) -> PromptTemplate:
    defaults = PromptTemplate()
    return PromptTemplate(
        instruction_header=_cfg(args, config, "template.header", defaults.instruction_header),
        history_label=_cfg(args, config, "template.history_label", defaults.history_label),
        next_item_label=_cfg(args, config, "template.next_label", defaults.next_item_label),
        item_line_format=_cfg(args, config, "template.item_line", defaults.item_line_format),
    )


def _thresholds(args: argparse.Namespace, config: dict, dataset: str) -> SegmentThresholds:
    l = _cfg(args, config, "l", DEFAULT_L)
    h = _cfg(args, config, "h", DATASET_H.get(dataset.lower(), DEFAULT_H))
    return SegmentThresholds(int(l), int(h))


def cmd_ingest(args: argparse.Namespace, config: dict) -> int:
    reviews_path = _require_path(_cfg(args, config, "reviews"), "reviews file")
    metadata_path = _require_path(_cfg(args, config, "metadata"), "metadata file")
    dataset = _cfg(args, config, "dataset", "dataset")
    out = Path(_cfg(args, config, "out", f"{dataset}.corpus"))

    with open_maybe_gzip(metadata_path) as f:
        items, meta_report = parse_metadata(f)
    with open_maybe_gzip(reviews_path) as f:
        interactions, review_report = parse_reviews(f)

    catalog_all = Catalog(items)
    sequences, seq_report = build_sequences(interactions, catalog_all)
    used = {item for seq in sequences for item in seq.items}
    catalog = catalog_all.restrict(used)
    stats = compute_stats(sequences, catalog)

    policy = {
        "excluded_items_no_title": sum(1 for i in items if i.excluded),
        "review_parse_errors": review_report.errors,
        "metadata_parse_errors": meta_report.errors,
        "dropped_interactions": seq_report.dropped_interactions,
        "dropped_users": seq_report.dropped_users,
    }
    write_corpus(out, dataset, catalog, sequences, policy)
    print(
        f"{dataset}: users={stats.num_users:,} items={stats.num_items:,} "
        f"interactions={stats.num_interactions:,} mean_seq_length={stats.mean_seq_length:.2f}"
    )
    print(f"policy: {json.dumps(policy, sort_keys=True)}")
    print(f"wrote {out}")
    return EXIT_OK


def _make_provider(args: argparse.Namespace, config: dict):
    kind = _cfg(args, config, "provider", "mock")
    dim = int(_cfg(args, config, "dim", DEFAULT_DIM))
    if kind == "mock":
        return HashEmbeddingProvider(dim=dim)
    if kind == "file":
        table = _require_path(_cfg(args, config, "embedding_file"), "embedding file")
        return FileEmbeddingProvider(table)
    if kind == "http":
        url = _cfg(args, config, "sidecar_url")
        if not url:
            raise ConfigError("http provider requires --sidecar-url")
        name = _cfg(args, config, "provider_name", "e5-small-v2")
        return HttpEmbeddingProvider(url, name=name, dim=dim)
    raise ConfigError(f"unknown provider kind {kind!r}")


def cmd_index(args: argparse.Namespace, config: dict) -> int:
    corpus_path = _require_path(_cfg(args, config, "corpus"), "corpus file")
    kind = _cfg(args, config, "kind")
    if kind not in ("lexical", "dense"):
        raise ConfigError(f"index kind must be lexical or dense, got {kind!r}")
    meta, catalog, _sequences = read_corpus(corpus_path)
    out = Path(_cfg(args, config, "out", f"{meta['dataset']}.{kind}.idx"))
    template = _template(args, config)

    if kind == "lexical":
        k1 = float(_cfg(args, config, "k1", DEFAULT_K1))
        b = float(_cfg(args, config, "b", DEFAULT_B))
        index = build_lexical_index(catalog, k1=k1, b=b, template=template)
        index.save(out)
        print(f"lexical index: N={index.N:,} terms={len(index.terms):,} avgdl={index.avgdl:.2f}")
    else:
        provider = _make_provider(args, config)
        index = build_dense_index(catalog, provider, template=template)
        index.save(out)
        print(f"dense index: rows={len(index.doc_ids):,} dim={index.dim} provider={provider.name}")
    print(f"wrote {out}")
    return EXIT_OK


def _sniff_magic(path: Path) -> bytes:
    with open(path, "rb") as f:
        return f.read(7)


def cmd_run(args: argparse.Namespace, config: dict) -> int:
    corpus_path = _require_path(_cfg(args, config, "corpus"), "corpus file")
    index_path = _require_path(_cfg(args, config, "index"), "index file")
    retriever_kind = _cfg(args, config, "retriever", "lexical")
    generator_kind = _cfg(args, config, "generator", "lis")
    out_dir = Path(_cfg(args, config, "out_dir", "run-out"))

    magic = _sniff_magic(index_path)
    if retriever_kind == "lexical" and magic != LEXICAL_MAGIC:
        raise ConfigError(f"{index_path} is not a lexical index but --retriever lexical given")
    if retriever_kind == "dense" and magic != DENSE_MAGIC:
        raise ConfigError(f"{index_path} is not a dense index but --retriever dense given")

    meta, catalog, sequences = read_corpus(corpus_path)
    splits = leave_last_out_split(sequences)

    if retriever_kind == "lexical":
        retriever = LexicalRetriever(LexicalIndex.load(index_path))
    else:
        retriever = DenseRetriever(DenseIndex.load(index_path), _make_provider(args, config))

    beams = int(_cfg(args, config, "beams", DEFAULT_BEAMS))
    if generator_kind == "lis":
        generator = LastItemGenerator()
    elif generator_kind == "oracle":
        generator = OracleGenerator()
    elif generator_kind == "external":
        url = _cfg(args, config, "sidecar_url")
        if not url:
            raise ConfigError("external generator requires --sidecar-url")
        generator = ExternalGenerator(
            url=url,
            beams=beams,
            max_new_tokens=int(_cfg(args, config, "max_new_tokens", DEFAULT_MAX_NEW_TOKENS)),
        )
    else:
        raise ConfigError(f"unknown generator {generator_kind!r}")

    dataset = meta.get("dataset", "dataset")
    exp = ExperimentConfig(
        dataset=dataset,
        generator=generator_kind,
        retriever=retriever_kind,
        beams=beams,
        k=int(_cfg(args, config, "k", 5)),
        per_beam_depth=(
            int(_cfg(args, config, "per_beam_depth"))
            if _cfg(args, config, "per_beam_depth") is not None
            else None
        ),
        thresholds=_thresholds(args, config, dataset),
        exclude_history=bool(_cfg(args, config, "exclude_history", False)),
        fusion=_cfg(args, config, "fusion", FUSION_RANK_INTERLEAVE),
        seed=int(_cfg(args, config, "seed", 0)),
    )
    # External generation is network-bound; default to 8 in-flight users.
    default_workers = 8 if generator_kind == "external" else 1
    manifest = run_experiment(
        exp,
        catalog,
        splits.test,
        retriever,
        generator,
        out_dir,
        template=_template(args, config),
        budget=int(_cfg(args, config, "budget", DEFAULT_TOKEN_BUDGET)),
        workers=int(_cfg(args, config, "workers", default_workers)),
        progress_every=int(_cfg(args, config, "progress_every", 5000)),
    )
    print(
        f"run complete: users={manifest['users']:,} failures={manifest['failures']} "
        f"config_hash={manifest['config_hash']}"
    )
    print(f"wrote {out_dir / manifest['results_file']}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace, config: dict) -> int:
    results_path = _require_path(_cfg(args, config, "results"), "results file")
    corpus_path = _require_path(_cfg(args, config, "corpus"), "corpus file")
    meta, _catalog, sequences = read_corpus(corpus_path)
    seq_lengths = {seq.user: seq.n for seq in sequences}
    dataset = meta.get("dataset", "dataset")
    thresholds = _thresholds(args, config, dataset)
    k = int(_cfg(args, config, "k", 5))

    # Pick up run context (generator/retriever/config hash) when the
    # manifest sits next to the results file.
    run_context = {"dataset": dataset}
    manifest_path = results_path.parent / "manifest.json"
    config_hash = ""
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        config_hash = manifest.get("config_hash", "")
        run_config = manifest.get("config", {})
        run_context.update(
            generator=run_config.get("generator"), retriever=run_config.get("retriever")
        )

    outcomes = load_outcomes(results_path, seq_lengths)
    report = segment_report(outcomes, thresholds, k=k, config_hash=config_hash)
    print(format_report(report))
    out = _cfg(args, config, "out")
    if out:
        payload = {"run": run_context, **report_to_dict(report)}
        with open(out, "w", encoding="utf-8") as f:
            f.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
        print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqrec",
        description="Generate-then-retrieve sequential recommendation engine",
    )
    parser.add_argument("--config", help="JSON config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse raw dumps into a corpus artifact")
    p.add_argument("--reviews")
    p.add_argument("--metadata")
    p.add_argument("--dataset")
    p.add_argument("--out")

    p = sub.add_parser("index", help="build a lexical or dense index from a corpus")
    p.add_argument("--corpus")
    p.add_argument("--kind", choices=["lexical", "dense"])
    p.add_argument("--out")
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--provider", choices=["mock", "file", "http"])
    p.add_argument("--provider-name", dest="provider_name")
    p.add_argument("--dim", type=int)
    p.add_argument("--embedding-file", dest="embedding_file")
    p.add_argument("--sidecar-url", dest="sidecar_url")

    p = sub.add_parser("run", help="run an experiment over the test split")
    p.add_argument("--corpus")
    p.add_argument("--index")
    p.add_argument("--generator", choices=["lis", "oracle", "external"])
    p.add_argument("--retriever", choices=["lexical", "dense"])
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--k", type=int)
    p.add_argument("--beams", type=int)
    p.add_argument("--per-beam-depth", dest="per_beam_depth", type=int)
    p.add_argument("--exclude-history", dest="exclude_history", action="store_const", const=True)
    p.add_argument("--fusion", choices=["rank-interleave", "score-max"])
    p.add_argument("--provider", choices=["mock", "file", "http"])
    p.add_argument("--provider-name", dest="provider_name")
    p.add_argument("--dim", type=int)
    p.add_argument("--embedding-file", dest="embedding_file")
    p.add_argument("--sidecar-url", dest="sidecar_url")
    p.add_argument("--max-new-tokens", dest="max_new_tokens", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--progress-every", dest="progress_every", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--h", type=int)

    p = sub.add_parser("report", help="aggregate a results file into metrics")
    p.add_argument("--results")
    p.add_argument("--corpus")
    p.add_argument("--k", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--h", type=int)
    p.add_argument("--out")

    return parser


COMMANDS = {
    "ingest": cmd_ingest,
    "index": cmd_index,
    "run": cmd_run,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return COMMANDS[args.command](args, config)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CorpusFormatError, StatsError, SplitError, EvalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except SeqrecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
