"""medshot: a few-shot prompting workbench for generative medical QA.

The package covers the full experiment loop: corpus ingestion and
truncation, question embedding (HTTP service or deterministic mock),
exact cosine nearest-neighbour retrieval partitioned by question type,
nearest-centroid question-type routing, prompt assembly for static and
retrieval-based strategies, a generation gateway with offline mocks, and
self-contained BLEU/ROUGE scoring with reproducible run reports.
"""

__version__ = "0.1.0"

from medshot.corpus import (
    Corpus,
    CorpusError,
    FinetuneRecord,
    QAPair,
    SplitSpec,
    merge,
    parse_jsonl,
    parse_medquad,
    split,
    stats,
    truncate_answers,
)
from medshot.embedding import (
    DEFAULT_INSTRUCTION,
    EmbedderEndpoint,
    EmbeddingStore,
    load_store,
    mock_embed,
    save_store,
)
from medshot.search import Neighbor, TypePartitionedIndex, build_index, cosine, query_topk
from medshot.classify import CentroidModel, TypePrediction, predict_type, train_centroids
from medshot.prompts import (
    AssembledPrompt,
    PromptExample,
    PromptStrategy,
    render,
    select_static,
    select_typewise,
    select_vanilla,
)
# the completion function itself stays at medshot.generate.generate so the
# submodule attribute is not shadowed by a same-named function
from medshot.generate import (
    GenerationEndpoint,
    GenerationRequest,
    GenerationResult,
    mock_generate,
)
from medshot.metrics import MetricReport, bleu_corpus, rouge_l, rouge_n, score_run, tokenize_eval
from medshot.runner import ExperimentConfig, RunReport, ablate_k, load_config, run, write_tables
