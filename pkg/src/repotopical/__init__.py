"""Repository-level code embeddings with masked attention pooling, plus the
TF3D term-frequency baseline and its evaluation harness."""

from .analyzer import CallEdge, FunctionInfo, ScriptRecord, analyze_repository, analyze_script
from .corpus import (
    RepoManifestEntry,
    TopicVocabulary,
    build_label_matrix,
    crawl_topic,
    levenshtein_ratio,
    normalize_topics,
    split_corpus,
)
from .embedder import (
    EmbeddingStore,
    HashingEmbedder,
    PcaReducer,
    RepoTensor,
    assemble_repo_tensor,
    fit_pca,
    hash_embed,
    load_embeddings,
    save_embeddings,
)
from .errors import RepotopicalError, ValidationError
from .graphkit import PAD, DependencyGraph, ScriptSample, sample_scripts, supported_caps
from .metrics import EvalReport, lrap, micro_f1, optimize_thresholds
from .model import (
    LinearHeadClassifier,
    ModelParams,
    TopicalClassifier,
    TrainConfig,
    aggregate_vectors,
    classify,
    encode_sequence,
    gru_cell,
    load_checkpoint,
    masked_attention,
    save_checkpoint,
    train,
)
from .pipeline import PipelineConfig, run_pipeline
from .serializer import TokenSequence, serialize_code, serialize_dep, serialize_doc
from .tf3d import (
    ClarityMatrix,
    RepoTermProfile,
    TermVocab,
    TF3DTagger,
    embed_repo,
    extract_term_counts,
    fit_clarity,
    forest_fit,
    forest_predict,
    repo_profile,
)

__version__ = "0.1.0"

__all__ = [
    "CallEdge",
    "ClarityMatrix",
    "DependencyGraph",
    "EmbeddingStore",
    "EvalReport",
    "FunctionInfo",
    "HashingEmbedder",
    "LinearHeadClassifier",
    "ModelParams",
    "PAD",
    "PcaReducer",
    "PipelineConfig",
    "RepoManifestEntry",
    "RepoTensor",
    "RepoTermProfile",
    "RepotopicalError",
    "ScriptRecord",
    "ScriptSample",
    "TF3DTagger",
    "TermVocab",
    "TokenSequence",
    "TopicVocabulary",
    "TopicalClassifier",
    "TrainConfig",
    "ValidationError",
    "aggregate_vectors",
    "analyze_repository",
    "analyze_script",
    "assemble_repo_tensor",
    "build_label_matrix",
    "classify",
    "crawl_topic",
    "embed_repo",
    "encode_sequence",
    "extract_term_counts",
    "fit_clarity",
    "fit_pca",
    "forest_fit",
    "forest_predict",
    "gru_cell",
    "hash_embed",
    "levenshtein_ratio",
    "load_checkpoint",
    "load_embeddings",
    "lrap",
    "masked_attention",
    "micro_f1",
    "normalize_topics",
    "optimize_thresholds",
    "repo_profile",
    "run_pipeline",
    "sample_scripts",
    "save_checkpoint",
    "save_embeddings",
    "serialize_code",
    "serialize_dep",
    "serialize_doc",
    "split_corpus",
    "supported_caps",
    "train",
]
