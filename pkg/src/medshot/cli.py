"""Command-line interface for the few-shot prompting workbench.

Subcommands mirror the pipeline stages: ``ingest``, ``stats``,
``split``, ``embed``, ``index``, ``train-classifier``, ``run``,
``ablate-k`` and ``report``.  Every subcommand accepts ``--config``,
``--out`` and ``--seed``; failures exit non-zero with a stage-tagged
message on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from medshot import __version__
from medshot import classify as classify_mod
from medshot import corpus as corpus_mod
from medshot import embedding as embedding_mod
from medshot import search as search_mod
from medshot.corpus import CorpusError, SplitSpec
from medshot.embedding import DEFAULT_INSTRUCTION, EmbedderEndpoint, EmbeddingStore
from medshot.runner import (
    ConfigError,
    RunReport,
    StageError,
    StrategyRow,
    ablate_k,
    load_config,
    run,
    write_tables,
)
from medshot.metrics import MetricReport


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="experiment config (.toml or .json)")
    parser.add_argument("--out", type=Path, default=None, help="output directory override")
    parser.add_argument("--seed", type=int, default=None, help="seed override (unsigned 64-bit)")


def _fail(stage: str, message: str) -> int:
    print(f"error [{stage}]: {message}", file=sys.stderr)
    return 2


def _out_dir(args) -> Path:
    out = args.out if args.out is not None else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ── subcommand handlers ─────────────────────────────────────────────────────


def _cmd_ingest(args) -> int:
    try:
        if args.format == "medquad":
            corpus, skipped = corpus_mod.parse_medquad(args.inputs, source=args.source)
        else:
            if len(args.inputs) != 1:
                raise CorpusError("jsonl ingestion takes exactly one input file")
            corpus, skipped = corpus_mod.parse_jsonl(args.inputs[0], source=args.source)
        if args.cap is not None:
            corpus = corpus_mod.truncate_answers(corpus, args.cap)
        out_file = args.out_file or (_out_dir(args) / f"{args.source}.jsonl")
        corpus_mod.save_jsonl(corpus, out_file)
        if args.finetune_out:
            records = corpus_mod.build_finetune_records(corpus)
            corpus_mod.save_finetune_jsonl(records, args.finetune_out)
        print(f"ingested {len(corpus)} pairs ({skipped} skipped) -> {out_file}")
        return 0
    except (CorpusError, OSError) as exc:
        return _fail("ingest", str(exc))


def _cmd_stats(args) -> int:
    try:
        corpus, _ = corpus_mod.parse_jsonl(args.corpus, source=Path(args.corpus).stem)
        report = corpus_mod.stats(corpus).as_dict()
        text = json.dumps(report, indent=2, sort_keys=True)
        if args.out_file:
            Path(args.out_file).write_text(text + "\n", encoding="utf-8")
        print(text)
        return 0
    except (CorpusError, OSError) as exc:
        return _fail("stats", str(exc))


def _cmd_split(args) -> int:
    try:
        corpus, _ = corpus_mod.parse_jsonl(args.corpus, source=Path(args.corpus).stem)
        seed = args.seed if args.seed is not None else args.split_seed
        train, test = corpus_mod.split(corpus, SplitSpec(train_fraction=args.fraction, seed=seed))
        out = _out_dir(args)
        train_path = args.train_out or out / "train.jsonl"
        test_path = args.test_out or out / "test.jsonl"
        corpus_mod.save_jsonl(train, train_path)
        corpus_mod.save_jsonl(test, test_path)
        print(f"split {len(corpus)} pairs -> {len(train)} train / {len(test)} test")
        return 0
    except (CorpusError, OSError) as exc:
        return _fail("split", str(exc))


def _cmd_embed(args) -> int:
    try:
        corpus, _ = corpus_mod.parse_jsonl(args.corpus, source=Path(args.corpus).stem)
        if not corpus.pairs:
            return _fail("embed", f"{args.corpus}: corpus is empty")
        ids = [p.id for p in corpus.pairs]
        texts = [p.question for p in corpus.pairs]
        if args.base_url:
            endpoint = EmbedderEndpoint(
                base_url=args.base_url,
                timeout=args.timeout,
                max_batch=args.max_batch,
                retries=args.retries,
            )
            _dim, vectors = embedding_mod.embed_texts(endpoint, args.instruction, texts)
        else:
            vectors = [embedding_mod.mock_embed(t, args.mock_dim) for t in texts]
        store = EmbeddingStore.build(args.instruction, ids, vectors)
        out_file = args.store_out or (_out_dir(args) / "questions.store")
        embedding_mod.save_store(store, out_file)
        print(f"embedded {len(store)} questions (dim {store.dim}) -> {out_file}")
        return 0
    except (
        CorpusError,
        embedding_mod.EndpointError,
        embedding_mod.ProtocolError,
        ValueError,
        OSError,
    ) as exc:
        return _fail("embed", str(exc))


def _cmd_index(args) -> int:
    try:
        store = embedding_mod.load_store(args.store)
        corpus, _ = corpus_mod.parse_jsonl(args.corpus, source=Path(args.corpus).stem)
        index = search_mod.build_index(store, corpus)
        out = args.out if args.out is not None else Path("index")
        search_mod.save_index(index, out)
        n_typed = sum(len(b) for b in index.blocks.values())
        print(
            f"indexed {len(index.all_block)} vectors "
            f"({len(index.blocks)} type blocks, {n_typed} typed) -> {out}"
        )
        return 0
    except (CorpusError, embedding_mod.StoreFormatError, ValueError, OSError) as exc:
        return _fail("index", str(exc))


def _cmd_train_classifier(args) -> int:
    try:
        store = embedding_mod.load_store(args.store)
        corpus, _ = corpus_mod.parse_jsonl(args.corpus, source=Path(args.corpus).stem)
        pair_by_id = corpus.by_id()
        typed_ids = [
            pid for pid in store.ids if pid in pair_by_id and pair_by_id[pid].qtype is not None
        ]
        if not typed_ids:
            return _fail("train-classifier", "no typed pairs with stored vectors")
        row_of = {pid: i for i, pid in enumerate(store.ids)}
        typed_store = EmbeddingStore(
            store.instruction, typed_ids, store.matrix[[row_of[p] for p in typed_ids]]
        )
        model = classify_mod.train_centroids(typed_store, corpus)
        out_file = args.model_out or (_out_dir(args) / "centroids.store")
        classify_mod.save_model(model, out_file)
        accuracy, _ = classify_mod.eval_classifier(model, typed_store, corpus)
        print(
            f"trained {len(model.labels)} centroids "
            f"(train accuracy {accuracy:.3f}) -> {out_file}"
        )
        return 0
    except (CorpusError, embedding_mod.StoreFormatError, ValueError, OSError) as exc:
        return _fail("train-classifier", str(exc))


def _apply_overrides(config, args):
    updates = {}
    if args.out is not None:
        updates["out_dir"] = str(args.out)
    if args.seed is not None:
        if config.split is not None:
            updates["split"] = SplitSpec(
                train_fraction=config.split.train_fraction, seed=args.seed
            )
        updates["strategies"] = tuple(
            dataclasses.replace(s, seed=args.seed) if s.seed is not None else s
            for s in config.strategies
        )
    return dataclasses.replace(config, **updates) if updates else config


def _cmd_run(args) -> int:
    if args.config is None:
        return _fail("config", "run requires --config")
    try:
        config = _apply_overrides(load_config(args.config), args)
        report = run(config)
    except (ConfigError, CorpusError, OSError) as exc:
        return _fail("config", str(exc))
    except StageError as exc:
        return _fail(exc.stage, str(exc))
    for row in report.rows:
        m = row.metrics
        print(
            f"{row.label}: bleu1={m.bleu1:.4f} bleu4={m.bleu4:.4f} "
            f"rouge1={m.rouge1_f:.4f} rougeL={m.rougeL_f:.4f} "
            f"(n={m.n_pairs}, excluded={row.excluded})"
        )
    print(f"report digest {report.digest} -> {config.out_dir}")
    return 0


def _cmd_ablate_k(args) -> int:
    if args.config is None:
        return _fail("config", "ablate-k requires --config")
    try:
        k_values = [int(x) for x in args.k_values.split(",") if x.strip()]
        config = _apply_overrides(load_config(args.config), args)
        results = ablate_k(config, k_values)
    except (ConfigError, CorpusError, ValueError, OSError) as exc:
        return _fail("config", str(exc))
    except StageError as exc:
        return _fail(exc.stage, str(exc))
    for k, report in results:
        summary = ", ".join(
            f"{row.label}: rouge1={row.metrics.rouge1_f:.4f}" for row in report.rows
        )
        print(f"k={k}: {summary}")
    print(f"ablation tables -> {config.out_dir}")
    return 0


def _cmd_report(args) -> int:
    try:
        payload = json.loads(Path(args.report).read_text(encoding="utf-8"))
        rows = [
            StrategyRow(
                label=row["strategy"],
                metrics=MetricReport(
                    bleu1=row["metrics"]["bleu1"],
                    bleu4=row["metrics"]["bleu4"],
                    rouge1_f=row["metrics"]["rouge1_f"],
                    rougeL_f=row["metrics"]["rougeL_f"],
                    n_pairs=row["metrics"]["n_pairs"],
                    scale=row["metrics"]["scale"],
                ),
                excluded=row.get("excluded", 0),
            )
            for row in payload["rows"]
        ]
        report = RunReport(
            name=payload.get("name", "report"), scale=payload.get("scale", "unit"), rows=rows
        )
        suffix = "md" if args.format == "markdown" else "csv"
        out_file = args.out_file or (_out_dir(args) / f"report.{suffix}")
        write_tables(report, args.format, out_file)
        print(Path(out_file).read_text(encoding="utf-8"), end="")
        return 0
    except (KeyError, ValueError, OSError) as exc:
        return _fail("report", str(exc))


# ── parser wiring ───────────────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medshot",
        description="Few-shot prompting workbench for generative medical QA.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a raw corpus into normalised JSONL")
    _common_flags(p)
    p.add_argument("inputs", nargs="+", help="input file(s)")
    p.add_argument("--format", choices=("jsonl", "medquad"), default="jsonl")
    p.add_argument("--source", default="corpus", help="source tag for ids and provenance")
    p.add_argument("--cap", type=int, default=None, help="answer word cap")
    p.add_argument("--out-file", type=Path, default=None)
    p.add_argument("--finetune-out", type=Path, default=None, help="also write finetune records")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("stats", help="corpus statistics as JSON")
    _common_flags(p)
    p.add_argument("corpus")
    p.add_argument("--out-file", type=Path, default=None)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("split", help="deterministic train/test split")
    _common_flags(p)
    p.add_argument("corpus")
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--split-seed", type=int, default=0, help="seed when --seed is not given")
    p.add_argument("--train-out", type=Path, default=None)
    p.add_argument("--test-out", type=Path, default=None)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("embed", help="embed corpus questions into a store file")
    _common_flags(p)
    p.add_argument("corpus")
    p.add_argument("--base-url", default=None, help="embedder service; omit to use the mock")
    p.add_argument("--mock-dim", type=int, default=256)
    p.add_argument("--instruction", default=DEFAULT_INSTRUCTION)
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--max-batch", type=int, default=32)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--store-out", type=Path, default=None)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("index", help="build the type-partitioned vector index")
    _common_flags(p)
    p.add_argument("store")
    p.add_argument("corpus")
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("train-classifier", help="fit question-type centroids")
    _common_flags(p)
    p.add_argument("store")
    p.add_argument("corpus")
    p.add_argument("--model-out", type=Path, default=None)
    p.set_defaults(func=_cmd_train_classifier)

    p = sub.add_parser("run", help="run the full experiment pipeline")
    _common_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("ablate-k", help="run the experiment across several k values")
    _common_flags(p)
    p.add_argument("--k-values", required=True, help="comma-separated, e.g. 1,2,5")
    p.set_defaults(func=_cmd_ablate_k)

    p = sub.add_parser("report", help="render tables from a saved report.json")
    _common_flags(p)
    p.add_argument("report")
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    p.add_argument("--out-file", type=Path, default=None)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
