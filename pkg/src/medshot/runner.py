"""Experiment runner: config loading, the end-to-end pipeline, and reports.

A run ingests and truncates the configured corpora, forms the
train/test sides, embeds training and test questions, builds the
type-partitioned index (and the type classifier when a typewise strategy
is configured), assembles prompts and generates an answer per strategy
and test question, scores each strategy, and persists every artifact
under the output directory.  With mock backends a rerun of the same
config is byte-identical, digest included.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace as dc_replace
from pathlib import Path
from typing import Sequence

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from medshot import classify as classify_mod
from medshot import corpus as corpus_mod
from medshot import embedding as embedding_mod
from medshot import generate as generate_mod
from medshot import metrics as metrics_mod
from medshot import prompts as prompts_mod
from medshot import search as search_mod
from medshot.corpus import Corpus, CorpusError, SplitSpec
from medshot.embedding import DEFAULT_INSTRUCTION, EmbedderEndpoint, EmbeddingStore
from medshot.generate import (
    DEFAULT_MAX_TOKENS_LONG,
    DEFAULT_STOP,
    GenerationEndpoint,
    GenerationRequest,
)
from medshot.metrics import MetricReport, SCALES
from medshot.prompts import (
    KIND_NONE,
    KIND_STATIC,
    KIND_TYPEWISE,
    KIND_VANILLA,
    PromptStrategy,
    prompt_to_dict,
    render,
    select_static,
    select_typewise,
    select_vanilla,
)

TABLE_COLUMNS = ("Strategy", "Bleu1", "Bleu4", "Rouge-1", "Rouge-L")
CORPUS_FORMATS = ("jsonl", "medquad")


class ConfigError(Exception):
    """Invalid experiment configuration."""


class StageError(Exception):
    """Pipeline failure tagged with the stage (and question, if any)."""

    def __init__(self, stage: str, message: str, question_id: str | None = None) -> None:
        self.stage = stage
        self.question_id = question_id
        where = f"{stage}" if question_id is None else f"{stage}, question {question_id!r}"
        super().__init__(f"[{where}] {message}")


@dataclass(frozen=True)
class CorpusSource:
    """One input corpus: where it lives, its format, and its answer cap."""

    path: str
    format: str
    source: str
    word_cap: int

    def __post_init__(self) -> None:
        if self.format not in CORPUS_FORMATS:
            raise ConfigError(
                f"unknown corpus format {self.format!r}; expected one of {CORPUS_FORMATS}"
            )
        if self.word_cap < 1:
            raise ConfigError(f"word_cap must be positive, got {self.word_cap}")


@dataclass(frozen=True)
class EmbedderConfig:
    mode: str  # "mock" | "http"
    dim: int = 256
    base_url: str = ""
    timeout: float = 30.0
    max_batch: int = 32
    retries: int = 2
    instruction: str = DEFAULT_INSTRUCTION

    def __post_init__(self) -> None:
        if self.mode not in ("mock", "http"):
            raise ConfigError(f"embedder mode must be 'mock' or 'http', got {self.mode!r}")
        if self.mode == "http" and not self.base_url:
            raise ConfigError("http embedder requires base_url")


@dataclass(frozen=True)
class GeneratorConfig:
    mode: str  # "http" | "fixed" | "echo_last_example" | "echo_question"
    base_url: str = ""
    timeout: float = 60.0
    retries: int = 2
    fixed_text: str = ""
    max_tokens: int = DEFAULT_MAX_TOKENS_LONG
    temperature: float = 0.0
    stop: tuple[str, ...] = DEFAULT_STOP

    def __post_init__(self) -> None:
        modes = ("http",) + generate_mod.MOCK_MODES
        if self.mode not in modes:
            raise ConfigError(f"generator mode must be one of {modes}, got {self.mode!r}")
        if self.mode == "http" and not self.base_url:
            raise ConfigError("http generator requires base_url")
        if self.max_tokens < 1:
            raise ConfigError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.temperature < 0.0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything defining one experiment (minus where artifacts land)."""

    name: str
    corpora: tuple[CorpusSource, ...]
    strategies: tuple[PromptStrategy, ...]
    embedder: EmbedderConfig
    generator: GeneratorConfig
    split: SplitSpec | None = None
    test_corpus: CorpusSource | None = None
    self_exclude: bool = True
    concurrency: int = 1
    scale: str = "unit"
    out_dir: str = "runs/out"
    abort_on_error: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("experiment name must be non-empty")
        if not self.corpora:
            raise ConfigError("at least one corpus is required")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        if (self.split is None) == (self.test_corpus is None):
            raise ConfigError("exactly one of 'split' and 'test_corpus' must be configured")
        if self.concurrency < 1:
            raise ConfigError(f"concurrency must be >= 1, got {self.concurrency}")
        if self.scale not in SCALES:
            raise ConfigError(f"scale must be one of {SCALES}, got {self.scale!r}")


@dataclass
class StrategyRow:
    label: str
    metrics: MetricReport
    excluded: int = 0


@dataclass
class RunReport:
    name: str
    scale: str
    rows: list[StrategyRow]
    config_digest: str = ""
    corpus_fingerprints: dict = field(default_factory=dict)
    audits: dict = field(default_factory=dict)
    digest: str = ""

    def payload(self) -> dict:
        """Deterministic report content (everything but the digest itself)."""
        return {
            "name": self.name,
            "scale": self.scale,
            "config_digest": self.config_digest,
            "corpus_fingerprints": self.corpus_fingerprints,
            "rows": [
                {"strategy": r.label, "excluded": r.excluded, "metrics": r.metrics.as_dict()}
                for r in self.rows
            ],
            "audits": self.audits,
        }


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def corpus_fingerprint(corpus: Corpus) -> str:
    """Content hash of a corpus (pairs in order, plus the word cap)."""
    payload = {
        "word_cap": corpus.word_cap,
        "pairs": [
            {
                "id": p.id,
                "question": p.question,
                "answer": p.answer,
                "qtype": p.qtype,
                "source": p.source,
                "truncated": p.truncated,
            }
            for p in corpus.pairs
        ],
    }
    return _sha256(_canonical_json(payload))


# ── configuration loading ───────────────────────────────────────────────────


def _resolve(path_str: str, base: Path) -> str:
    path = Path(path_str)
    return str(path if path.is_absolute() else base / path)


def _corpus_source(obj: dict, base: Path, default_cap: int) -> CorpusSource:
    if "path" not in obj:
        raise ConfigError("corpus entry missing 'path'")
    path = _resolve(str(obj["path"]), base)
    return CorpusSource(
        path=path,
        format=str(obj.get("format", "jsonl")),
        source=str(obj.get("source") or Path(path).stem),
        word_cap=int(obj.get("word_cap", default_cap)),
    )


def _strategy(obj: dict, default_k: int) -> PromptStrategy:
    try:
        return PromptStrategy(
            kind=str(obj.get("kind", "")),
            k=int(obj.get("k", default_k)),
            seed=int(obj["seed"]) if obj.get("seed") is not None else None,
            order=str(obj.get("order", prompts_mod.ORDER_ASCENDING)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(data: dict, base: Path) -> ExperimentConfig:
    """Build a validated config from a parsed TOML/JSON document.

    Relative paths (corpora, test corpus, out_dir) resolve against
    ``base``, normally the config file's directory.  A top-level ``k``
    is the default for strategies that do not set their own.
    """
    if not isinstance(data, dict):
        raise ConfigError("config document must be a table/object")
    default_k = int(data.get("k", 2))
    default_cap = int(data.get("word_cap", DEFAULT_MAX_TOKENS_LONG))
    corpora = tuple(
        _corpus_source(obj, base, default_cap) for obj in data.get("corpora", [])
    )
    strategies = tuple(_strategy(obj, default_k) for obj in data.get("strategies", []))
    split_obj = data.get("split")
    try:
        split_spec = (
            SplitSpec(
                train_fraction=float(split_obj["train_fraction"]), seed=int(split_obj["seed"])
            )
            if split_obj is not None
            else None
        )
    except (KeyError, TypeError, CorpusError) as exc:
        raise ConfigError(f"invalid split spec: {exc}") from exc
    test_obj = data.get("test_corpus")
    test_corpus = _corpus_source(test_obj, base, default_cap) if test_obj is not None else None
    emb = data.get("embedder", {})
    gen = data.get("generator", {})
    try:
        embedder = EmbedderConfig(
            mode=str(emb.get("mode", "mock")),
            dim=int(emb.get("dim", 256)),
            base_url=str(emb.get("base_url", "")),
            timeout=float(emb.get("timeout", 30.0)),
            max_batch=int(emb.get("max_batch", 32)),
            retries=int(emb.get("retries", 2)),
            instruction=str(emb.get("instruction", DEFAULT_INSTRUCTION)),
        )
        generator = GeneratorConfig(
            mode=str(gen.get("mode", "fixed")),
            base_url=str(gen.get("base_url", "")),
            timeout=float(gen.get("timeout", 60.0)),
            retries=int(gen.get("retries", 2)),
            fixed_text=str(gen.get("fixed_text", "")),
            max_tokens=int(gen.get("max_tokens", DEFAULT_MAX_TOKENS_LONG)),
            temperature=float(gen.get("temperature", 0.0)),
            stop=tuple(gen.get("stop", list(DEFAULT_STOP))),
        )
        return ExperimentConfig(
            name=str(data.get("name", "experiment")),
            corpora=corpora,
            strategies=strategies,
            embedder=embedder,
            generator=generator,
            split=split_spec,
            test_corpus=test_corpus,
            self_exclude=bool(data.get("self_exclude", True)),
            concurrency=int(data.get("concurrency", 1)),
            scale=str(data.get("scale", "unit")),
            out_dir=_resolve(str(data.get("out_dir", "runs/out")), base),
            abort_on_error=bool(data.get("abort_on_error", False)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Load an experiment config from a TOML or JSON file."""
    path = Path(path)
    if path.suffix == ".toml":
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    elif path.suffix == ".json":
        with path.open("r", encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        raise ConfigError(f"config file must be .toml or .json, got {path.name!r}")
    return config_from_dict(data, path.parent)


def config_digest(config: ExperimentConfig) -> str:
    """Content hash of the experiment-defining parameters.

    The output directory, concurrency and abort flag are execution
    details and deliberately excluded, so the same experiment written to
    two locations shares a digest.
    """
    payload = {
        "name": config.name,
        "corpora": [
            {"path": c.path, "format": c.format, "source": c.source, "word_cap": c.word_cap}
            for c in config.corpora
        ],
        "strategies": [
            {"kind": s.kind, "k": s.k, "seed": s.seed, "order": s.order}
            for s in config.strategies
        ],
        "split": (
            {"train_fraction": config.split.train_fraction, "seed": config.split.seed}
            if config.split
            else None
        ),
        "test_corpus": (
            {
                "path": config.test_corpus.path,
                "format": config.test_corpus.format,
                "source": config.test_corpus.source,
                "word_cap": config.test_corpus.word_cap,
            }
            if config.test_corpus
            else None
        ),
        "embedder": {
            "mode": config.embedder.mode,
            "dim": config.embedder.dim,
            "base_url": config.embedder.base_url,
            "max_batch": config.embedder.max_batch,
            "instruction": config.embedder.instruction,
        },
        "generator": {
            "mode": config.generator.mode,
            "base_url": config.generator.base_url,
            "fixed_text": config.generator.fixed_text,
            "max_tokens": config.generator.max_tokens,
            "temperature": config.generator.temperature,
            "stop": list(config.generator.stop),
        },
        "self_exclude": config.self_exclude,
        "scale": config.scale,
    }
    return _sha256(_canonical_json(payload))


# ── pipeline ────────────────────────────────────────────────────────────────


def _ingest_source(spec: CorpusSource) -> Corpus:
    if spec.format == "medquad":
        corpus, _skipped = corpus_mod.parse_medquad([spec.path], source=spec.source)
    else:
        corpus, _skipped = corpus_mod.parse_jsonl(spec.path, source=spec.source)
    return corpus_mod.truncate_answers(corpus, spec.word_cap)


def _strategy_labels(strategies: Sequence[PromptStrategy]) -> list[str]:
    counts: dict[str, int] = {}
    labels = []
    for s in strategies:
        counts[s.kind] = counts.get(s.kind, 0) + 1
        labels.append(s.kind if counts[s.kind] == 1 else f"{s.kind}#{counts[s.kind]}")
    return labels


def _embed_questions(
    config: ExperimentConfig, corpus: Corpus, stage: str
) -> EmbeddingStore:
    emb = config.embedder
    texts = [p.question for p in corpus.pairs]
    ids = [p.id for p in corpus.pairs]
    try:
        if emb.mode == "mock":
            vectors = [embedding_mod.mock_embed(t, emb.dim) for t in texts]
        else:
            endpoint = EmbedderEndpoint(
                base_url=emb.base_url,
                timeout=emb.timeout,
                max_batch=emb.max_batch,
                retries=emb.retries,
            )
            _dim, vectors = embedding_mod.embed_texts(endpoint, emb.instruction, texts)
        return EmbeddingStore.build(emb.instruction, ids, vectors)
    except (embedding_mod.EndpointError, embedding_mod.ProtocolError, ValueError) as exc:
        raise StageError(stage, str(exc)) from exc


def run(config: ExperimentConfig) -> RunReport:
    """Execute the full experiment pipeline and return the report.

    Failures abort with a :class:`StageError` naming the stage; failures
    of individual questions are recorded in the audit trail and excluded
    from scoring unless ``abort_on_error`` is set.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fingerprints: dict[str, str] = {}

    # ingest + truncate each source
    ingested: list[Corpus] = []
    try:
        for spec in config.corpora:
            corpus = _ingest_source(spec)
            ingested.append(corpus)
            fingerprints[corpus.name] = corpus_fingerprint(corpus)
    except (CorpusError, OSError) as exc:
        raise StageError("ingest", str(exc)) from exc

    # merge
    try:
        pool = corpus_mod.merge(ingested) if len(ingested) > 1 else ingested[0]
    except CorpusError as exc:
        raise StageError("merge", str(exc)) from exc

    # form train/test
    try:
        if config.split is not None:
            train, test = corpus_mod.split(pool, config.split)
        else:
            train = pool
            test = _ingest_source(config.test_corpus)
            test = Corpus(name=f"{pool.name}-test", pairs=test.pairs, word_cap=test.word_cap)
    except (CorpusError, OSError) as exc:
        raise StageError("split", str(exc)) from exc
    if len(test) == 0:
        raise StageError("split", "test side is empty; adjust train_fraction or corpus size")
    if len(train) == 0:
        raise StageError("split", "train side is empty")
    corpus_mod.save_jsonl(train, out_dir / "corpora" / "train.jsonl")
    corpus_mod.save_jsonl(test, out_dir / "corpora" / "test.jsonl")
    fingerprints["train"] = corpus_fingerprint(train)
    fingerprints["test"] = corpus_fingerprint(test)

    # embed train and test questions
    train_store = _embed_questions(config, train, "embed")
    test_store = _embed_questions(config, test, "embed")
    embedding_mod.save_store(train_store, out_dir / "stores" / "train.store")
    embedding_mod.save_store(test_store, out_dir / "stores" / "test.store")

    # index
    try:
        index = search_mod.build_index(train_store, train)
        search_mod.save_index(index, out_dir / "index")
    except ValueError as exc:
        raise StageError("index", str(exc)) from exc

    # classifier, only when routing is needed
    model = None
    if any(s.kind == KIND_TYPEWISE for s in config.strategies):
        try:
            pair_by_id = train.by_id()
            row_of = {pid: i for i, pid in enumerate(train_store.ids)}
            typed_ids = [pid for pid in train_store.ids if pair_by_id[pid].qtype is not None]
            if not typed_ids:
                raise ValueError("no typed training pairs; cannot train the type classifier")
            typed_store = EmbeddingStore(
                train_store.instruction,
                typed_ids,
                train_store.matrix[[row_of[p] for p in typed_ids]],
            )
            model = classify_mod.train_centroids(typed_store, train)
            classify_mod.save_model(model, out_dir / "classifier" / "centroids.store")
        except ValueError as exc:
            raise StageError("train-classifier", str(exc)) from exc

    # per-strategy generation and scoring
    labels = _strategy_labels(config.strategies)
    rows: list[StrategyRow] = []
    audits: dict[str, list[dict]] = {}
    for strategy, label in zip(config.strategies, labels):
        static_examples = None
        if strategy.kind == KIND_STATIC:
            try:
                static_examples = select_static(train, strategy)
            except ValueError as exc:
                raise StageError("select", str(exc)) from exc

        def work(i: int) -> tuple[dict, dict | None]:
            pair = test.pairs[i]
            exclude = {pair.id} if config.self_exclude else set()
            audit: dict = {
                "question_id": pair.id,
                "strategy": label,
                "predicted_type": None,
                "typewise_fallback": False,
                "short": False,
                "retrieved": [],
                "prompt": None,
                "generated": None,
                "reference": pair.answer,
                "scores": None,
                "error": None,
            }
            response: dict | None = None
            try:
                if strategy.kind == KIND_NONE:
                    examples = []
                elif strategy.kind == KIND_STATIC:
                    examples = static_examples
                elif strategy.kind == KIND_VANILLA:
                    examples = select_vanilla(
                        index, train, test_store.vector(pair.id), strategy, exclude
                    )
                else:
                    selection = select_typewise(
                        index, model, train, test_store.vector(pair.id), strategy, exclude
                    )
                    examples = selection.examples
                    audit["predicted_type"] = selection.prediction.label
                    audit["typewise_fallback"] = selection.used_fallback
                audit["retrieved"] = [
                    {"id": e.id, "score": e.score} for e in examples
                ]
                if strategy.kind in (KIND_VANILLA, KIND_TYPEWISE):
                    audit["short"] = len(examples) < strategy.k
                prompt = render(examples, pair.question, strategy.order)
                audit["prompt"] = prompt_to_dict(prompt, audit["predicted_type"])
                gen = config.generator
                if gen.mode == "http":
                    request = GenerationRequest(
                        prompt=prompt.rendered,
                        max_tokens=gen.max_tokens,
                        temperature=gen.temperature,
                        stop=gen.stop,
                    )
                    result = generate_mod.generate(
                        GenerationEndpoint(
                            base_url=gen.base_url, timeout=gen.timeout, retries=gen.retries
                        ),
                        request,
                    )
                else:
                    result = generate_mod.mock_generate(gen.mode, prompt, gen.fixed_text)
                response = {
                    "question_id": pair.id,
                    "strategy": label,
                    "backend": result.backend,
                    "attempt": result.attempt,
                    "latency_s": result.latency_s,
                    "prompt_sha256": _sha256(prompt.rendered.encode("utf-8")),
                    "text": result.text,
                    "error": None,
                }
                audit["generated"] = result.text
                audit["scores"] = metrics_mod.score_pair(result.text, pair.answer)
            except Exception as exc:  # per-question failure policy
                if config.abort_on_error:
                    raise StageError("generate", str(exc), question_id=pair.id) from exc
                audit["error"] = str(exc)
                if isinstance(exc, generate_mod.BackendError):
                    response = {
                        "question_id": pair.id,
                        "strategy": label,
                        "backend": config.generator.base_url or config.generator.mode,
                        "attempt": None,
                        "latency_s": None,
                        "prompt_sha256": None,
                        "text": None,
                        "error": str(exc),
                    }
            return audit, response

        if config.concurrency > 1:
            with ThreadPoolExecutor(max_workers=config.concurrency) as pool_exec:
                results = list(pool_exec.map(work, range(len(test))))
        else:
            results = [work(i) for i in range(len(test))]

        audit_records = [a for a, _ in results]
        audits[label] = audit_records
        _write_jsonl(
            out_dir / "prompts" / f"{label}.jsonl",
            [a["prompt"] for a in audit_records if a["prompt"] is not None],
        )
        _write_jsonl(
            out_dir / "responses" / f"{label}.jsonl",
            [r for _, r in results if r is not None],
        )

        successes = [
            (a["generated"], a["reference"]) for a in audit_records if a["error"] is None
        ]
        if not successes:
            raise StageError("score", f"strategy {label!r}: every generation failed")
        try:
            metrics = metrics_mod.score_run(successes, scale=config.scale)
        except ValueError as exc:
            raise StageError("score", str(exc)) from exc
        rows.append(
            StrategyRow(label=label, metrics=metrics, excluded=len(test) - len(successes))
        )

    # report
    report = RunReport(
        name=config.name,
        scale=config.scale,
        rows=rows,
        config_digest=config_digest(config),
        corpus_fingerprints=fingerprints,
        audits=audits,
    )
    report.digest = _sha256(_canonical_json(report.payload()))
    try:
        payload = report.payload()
        payload["digest"] = report.digest
        (out_dir / "report.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        write_tables(report, "markdown", out_dir / "tables" / "report.md")
        write_tables(report, "csv", out_dir / "tables" / "report.csv")
    except OSError as exc:
        raise StageError("report", str(exc)) from exc
    return report


def _write_jsonl(path: Path, records: Sequence[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


# ── tables ──────────────────────────────────────────────────────────────────


def _scaled(value: float, scale: str) -> float:
    return value * 100.0 if scale == "percent" else value


def _row_cells(row: StrategyRow, scale: str) -> list[str]:
    m = row.metrics
    return [
        row.label,
        f"{_scaled(m.bleu1, scale):.3f}",
        f"{_scaled(m.bleu4, scale):.3f}",
        f"{_scaled(m.rouge1_f, scale):.3f}",
        f"{_scaled(m.rougeL_f, scale):.3f}",
    ]


def format_table_markdown(report: RunReport) -> str:
    lines = [
        "| " + " | ".join(TABLE_COLUMNS) + " |",
        "| " + " | ".join(["---"] * len(TABLE_COLUMNS)) + " |",
    ]
    for row in report.rows:
        lines.append("| " + " | ".join(_row_cells(row, report.scale)) + " |")
    return "\n".join(lines) + "\n"


def format_table_csv(report: RunReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(TABLE_COLUMNS)
    for row in report.rows:
        writer.writerow(_row_cells(row, report.scale))
    return buf.getvalue()


def write_tables(report: RunReport, fmt: str, path: str | Path) -> Path:
    """Render the per-strategy results table to markdown or CSV.

    Columns are exactly ``Strategy | Bleu1 | Bleu4 | Rouge-1 | Rouge-L``
    with three decimals; values are multiplied by 100 at render time
    when the report scale is ``percent``.  CSV output follows RFC 4180
    quoting.
    """
    if fmt == "markdown":
        content = format_table_markdown(report)
    elif fmt == "csv":
        content = format_table_csv(report)
    else:
        raise ValueError(f"unknown table format {fmt!r}; expected 'markdown' or 'csv'")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8", newline="")
    return path


def ablate_k(config: ExperimentConfig, k_values: Sequence[int]) -> list[tuple[int, RunReport]]:
    """Run the experiment once per k and write a combined comparison table.

    Each k gets its own output subdirectory (``k{value}``); the combined
    table under the base output directory carries one row per (k,
    strategy), labelled ``k={value} {strategy}``.
    """
    if not k_values:
        raise ValueError("ablate_k requires at least one k value")
    if any(k < 1 for k in k_values):
        raise ValueError(f"k values must be >= 1, got {list(k_values)}")
    base_out = Path(config.out_dir)
    results: list[tuple[int, RunReport]] = []
    combined: list[StrategyRow] = []
    for k in k_values:
        strategies_k = tuple(dc_replace(s, k=k) for s in config.strategies)
        cfg_k = dc_replace(config, strategies=strategies_k, out_dir=str(base_out / f"k{k}"))
        report = run(cfg_k)
        results.append((k, report))
        combined.extend(
            StrategyRow(label=f"k={k} {row.label}", metrics=row.metrics, excluded=row.excluded)
            for row in report.rows
        )
    combined_report = RunReport(name=f"{config.name}-ablation", scale=config.scale, rows=combined)
    write_tables(combined_report, "markdown", base_out / "ablation.md")
    write_tables(combined_report, "csv", base_out / "ablation.csv")
    return results
