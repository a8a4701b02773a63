"""End-to-end orchestration with content-hash stage caching.

Every stage writes its artifact in the module-owned wire format and records
a fingerprint of its inputs; a stage reruns only when that fingerprint
changes, so repeating a run with the same config is pure cache hits and
reproduces the report bit-identically.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analyzer, corpus, graphkit, metrics, model, serializer
from .embedder import (
    EmbeddingStore,
    HashingEmbedder,
    PcaReducer,
    RepoTensor,
    assemble_repo_tensor,
    load_embeddings,
    save_embeddings,
)
from .errors import ValidationError
from .graphkit import DependencyGraph
from .model import TrainConfig
from .tensorfile import read_tensor_file, write_tensor_file

STAGE_VERSIONS = {
    "labels": 1,
    "splits": 1,
    "analysis": 1,
    "samples": 1,
    "tokens": 1,
    "embeddings": 1,
    "pca": 1,
    "tensors": 1,
    "train": 1,
    "report": 1,
}

STAGES = tuple(STAGE_VERSIONS)


@dataclass
class PipelineConfig:
    manifest: str
    out_dir: str
    top_k: int = 5
    n: int = 5
    sample_seed: int = 7
    split_seed: int = 0
    train_fraction: float = 0.7
    provider: str = "hash"  # hash | file
    embeddings_file: str | None = None
    dim: int = 768
    hash_seed: int = 0
    k: int = 64
    domains: tuple[str, ...] = tuple(serializer.DOMAINS)
    train: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> "PipelineConfig":
        if not Path(self.manifest).is_file():
            raise ValidationError(f"manifest not found: {self.manifest}")
        if self.provider not in ("hash", "file"):
            raise ValidationError("provider must be 'hash' or 'file'")
        if self.provider == "file":
            if not self.embeddings_file or not Path(self.embeddings_file).is_file():
                raise ValidationError(
                    f"embeddings file not found: {self.embeddings_file}"
                )
        for domain in self.domains:
            if domain not in serializer.DOMAINS:
                raise ValidationError(f"unknown domain {domain!r}")
        if not self.domains:
            raise ValidationError("at least one domain required")
        self.train.validate()
        return self

    def to_dict(self) -> dict:
        out = {
            "manifest": self.manifest,
            "out_dir": self.out_dir,
            "top_k": self.top_k,
            "n": self.n,
            "sample_seed": self.sample_seed,
            "split_seed": self.split_seed,
            "train_fraction": self.train_fraction,
            "provider": self.provider,
            "embeddings_file": self.embeddings_file,
            "dim": self.dim,
            "hash_seed": self.hash_seed,
            "k": self.k,
            "domains": list(self.domains),
            "train": self.train.to_dict(),
        }
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        if not isinstance(obj, dict):
            raise ValidationError(f"pipeline config must be an object, got {type(obj).__name__}")
        obj = dict(obj)
        train = TrainConfig.from_dict(obj.pop("train", {}))
        obj["domains"] = tuple(obj.get("domains", serializer.DOMAINS))
        known = {f for f in cls.__dataclass_fields__ if f != "train"}
        try:
            return cls(train=train, **{k: v for k, v in obj.items() if k in known})
        except TypeError as exc:
            raise ValidationError(f"bad pipeline config: {exc}") from exc

    def config_hash(self) -> str:
        # out_dir is a pure output location; it cannot affect results.
        fields = {k: v for k, v in self.to_dict().items() if k != "out_dir"}
        return _digest(fields)


@dataclass
class PipelineResult:
    report: dict
    stages: dict[str, str]  # stage -> "hit" | "miss"
    out_dir: str


def _digest(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _repo_digest(root) -> str:
    entries = []
    for file in analyzer.discover_sources(root):
        entries.append((file.relative_to(root).as_posix(), _file_digest(file)))
    return _digest(entries)


def safe_name(repo_id: str) -> str:
    return repo_id.replace("/", "__")


class _Cache:
    def __init__(self, out_dir: Path):
        self.path = out_dir / "cache.json"
        self.state = {}
        if self.path.is_file():
            try:
                self.state = json.loads(self.path.read_text("utf-8"))
            except json.JSONDecodeError:
                self.state = {}

    def fresh(self, stage: str, key: str, outputs: list[Path]) -> bool:
        return self.state.get(stage) == key and all(p.exists() for p in outputs)

    def record(self, stage: str, key: str) -> None:
        self.state[stage] = key
        self.path.write_text(json.dumps(self.state, indent=2, sort_keys=True), "utf-8")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True), "utf-8")


def _read_json(path: Path):
    return json.loads(path.read_text("utf-8"))


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Execute crawl-independent stages: labels, splits, analysis, sampling,
    tokens, embeddings, PCA, tensors, training, and the final report."""
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = _Cache(out)
    status: dict[str, str] = {}

    entries = corpus.read_manifest(config.manifest)
    by_id = {e.repo_id: e for e in entries}

    # ---- labels ----
    labels_path = out / "labels.json"
    labels_key = _digest(
        {
            "v": STAGE_VERSIONS["labels"],
            "manifest": _file_digest(config.manifest),
            "top_k": config.top_k,
        }
    )
    if cache.fresh("labels", labels_key, [labels_path]):
        status["labels"] = "hit"
    else:
        vocab = corpus.build_label_matrix(entries, config.top_k)
        _write_json(
            labels_path,
            {
                "topics": vocab.topics,
                "repo_ids": vocab.repo_ids,
                "matrix": vocab.label_matrix.tolist(),
            },
        )
        cache.record("labels", labels_key)
        status["labels"] = "miss"
    labels_obj = _read_json(labels_path)
    topics = labels_obj["topics"]
    repo_ids = labels_obj["repo_ids"]
    label_matrix = np.asarray(labels_obj["matrix"], dtype=np.int64)

    for repo_id in repo_ids:
        local = by_id[repo_id].local_path
        if not local or not Path(local).is_dir():
            raise ValidationError(f"repository checkout missing for {repo_id}: {local!r}")

    # ---- splits ----
    splits_path = out / "splits.json"
    splits_key = _digest(
        {
            "v": STAGE_VERSIONS["splits"],
            "labels": labels_key,
            "seed": config.split_seed,
            "fraction": config.train_fraction,
        }
    )
    if cache.fresh("splits", splits_key, [splits_path]):
        status["splits"] = "hit"
    else:
        vocab = corpus.TopicVocabulary(topics, label_matrix, repo_ids)
        train_idx, val_idx, test_idx = corpus.split_corpus(
            vocab, config.train_fraction, config.split_seed
        )
        _write_json(splits_path, {"train": train_idx, "val": val_idx, "test": test_idx})
        cache.record("splits", splits_key)
        status["splits"] = "miss"
    splits = _read_json(splits_path)

    # ---- analysis ----
    analysis_dir = out / "analysis"
    repo_digests = {rid: _repo_digest(by_id[rid].local_path) for rid in repo_ids}
    analysis_key = _digest(
        {"v": STAGE_VERSIONS["analysis"], "repos": sorted(repo_digests.items())}
    )
    analysis_paths = [analysis_dir / f"{safe_name(rid)}.json" for rid in repo_ids]
    if cache.fresh("analysis", analysis_key, analysis_paths):
        status["analysis"] = "hit"
    else:
        analysis_dir.mkdir(parents=True, exist_ok=True)
        for rid in repo_ids:
            records, edges = analyzer.analyze_repository(by_id[rid].local_path)
            analyzer.write_analysis(records, edges, analysis_dir / f"{safe_name(rid)}.json")
        cache.record("analysis", analysis_key)
        status["analysis"] = "miss"

    # ---- samples ----
    samples_path = out / "samples.json"
    samples_key = _digest(
        {
            "v": STAGE_VERSIONS["samples"],
            "analysis": analysis_key,
            "n": config.n,
            "seed": config.sample_seed,
        }
    )
    if cache.fresh("samples", samples_key, [samples_path]):
        status["samples"] = "hit"
    else:
        samples = {}
        for rid in repo_ids:
            records, edges = analyzer.read_analysis(analysis_dir / f"{safe_name(rid)}.json")
            graph = DependencyGraph.build(records, edges)
            samples[rid] = graphkit.sample_scripts(graph, config.n, config.sample_seed).paths
        _write_json(samples_path, samples)
        cache.record("samples", samples_key)
        status["samples"] = "miss"
    samples = _read_json(samples_path)

    # ---- tokens ----
    tokens_dir = out / "tokens"
    tokens_key = _digest({"v": STAGE_VERSIONS["tokens"], "analysis": analysis_key})
    token_paths = [tokens_dir / f"{safe_name(rid)}.jsonl" for rid in repo_ids]
    if cache.fresh("tokens", tokens_key, token_paths):
        status["tokens"] = "hit"
    else:
        tokens_dir.mkdir(parents=True, exist_ok=True)
        for rid in repo_ids:
            records, edges = analyzer.read_analysis(analysis_dir / f"{safe_name(rid)}.json")
            root = Path(by_id[rid].local_path)
            rows = []
            for record in records:
                source = (root / record.path).read_bytes().decode("utf-8", errors="replace")
                for seq in serializer.serialize_script(record, edges, source).values():
                    rows.append((record.path, seq))
            serializer.write_token_file(rows, tokens_dir / f"{safe_name(rid)}.jsonl")
        cache.record("tokens", tokens_key)
        status["tokens"] = "miss"

    # ---- embeddings ----
    emb_dir = out / "emb"
    if config.provider == "hash":
        emb_inputs = {"provider": "hash", "dim": config.dim, "seed": config.hash_seed}
    else:
        emb_inputs = {"provider": "file", "source": _file_digest(config.embeddings_file)}
    emb_key = _digest(
        {"v": STAGE_VERSIONS["embeddings"], "tokens": tokens_key, **emb_inputs}
    )
    emb_paths = [emb_dir / f"{safe_name(rid)}.jsonl" for rid in repo_ids]
    if cache.fresh("embeddings", emb_key, emb_paths):
        status["embeddings"] = "hit"
    else:
        emb_dir.mkdir(parents=True, exist_ok=True)
        if config.provider == "hash":
            hasher = HashingEmbedder(width=config.dim, seed=config.hash_seed)
            for rid in repo_ids:
                rows = serializer.read_token_file(tokens_dir / f"{safe_name(rid)}.jsonl")
                store = EmbeddingStore(config.dim)
                for path, seq in rows:
                    store.add(path, seq.domain, hasher.embed(seq))
                save_embeddings(store, emb_dir / f"{safe_name(rid)}.jsonl")
        else:
            global_store = load_embeddings(config.embeddings_file)
            for rid in repo_ids:
                rows = serializer.read_token_file(tokens_dir / f"{safe_name(rid)}.jsonl")
                store = EmbeddingStore(global_store.dim)
                for path, seq in rows:
                    store.add(path, seq.domain, global_store.get(f"{rid}/{path}", seq.domain))
                save_embeddings(store, emb_dir / f"{safe_name(rid)}.jsonl")
        cache.record("embeddings", emb_key)
        status["embeddings"] = "miss"

    # ---- pca ----
    pca_path = out / "pca.bin"
    pca_key = _digest(
        {
            "v": STAGE_VERSIONS["pca"],
            "emb": emb_key,
            "samples": samples_key,
            "splits": splits_key,
            "k": config.k,
            "domains": list(config.domains),
            "reduction": config.train.reduction,
        }
    )
    needs_pca = config.train.reduction == "pca"
    if cache.fresh("pca", pca_key, [pca_path] if needs_pca else []):
        status["pca"] = "hit"
    else:
        if needs_pca:
            train_ids = [repo_ids[i] for i in splits["train"]]
            per_domain: dict[str, list[np.ndarray]] = {d: [] for d in config.domains}
            for rid in train_ids:
                store = load_embeddings(emb_dir / f"{safe_name(rid)}.jsonl")
                for path in samples[rid]:
                    if path == graphkit.PAD:
                        continue
                    for domain in config.domains:
                        per_domain[domain].append(store.get(path, domain))
            reducers = {}
            for domain in config.domains:
                reducers[domain] = PcaReducer(k=config.k).fit(np.stack(per_domain[domain]))
            save_pca(reducers, pca_path)
        cache.record("pca", pca_key)
        status["pca"] = "miss"
    reducers = load_pca(pca_path) if needs_pca else None

    # ---- tensors ----
    tensors_dir = out / "tensors"
    tensors_key = _digest(
        {
            "v": STAGE_VERSIONS["tensors"],
            "emb": emb_key,
            "samples": samples_key,
            "pca": pca_key,
            "labels": labels_key,
            "domains": list(config.domains),
        }
    )
    tensor_paths = [tensors_dir / f"{safe_name(rid)}.json" for rid in repo_ids]
    if cache.fresh("tensors", tensors_key, tensor_paths):
        status["tensors"] = "hit"
    else:
        tensors_dir.mkdir(parents=True, exist_ok=True)
        for row, rid in enumerate(repo_ids):
            store = load_embeddings(emb_dir / f"{safe_name(rid)}.jsonl")
            sample = graphkit.ScriptSample(paths=list(samples[rid]), n=config.n)
            tensor = assemble_repo_tensor(
                sample,
                store,
                reducers,
                domains=config.domains,
                labels=label_matrix[row],
                repo_id=rid,
            )
            _write_json(tensors_dir / f"{safe_name(rid)}.json", tensor.to_dict())
        cache.record("tensors", tensors_key)
        status["tensors"] = "miss"

    # ---- train ----
    model_path = out / "model.tpcl"
    trainlog_path = out / "trainlog.json"
    train_key = _digest(
        {
            "v": STAGE_VERSIONS["train"],
            "tensors": tensors_key,
            "splits": splits_key,
            "train": config.train.to_dict(),
        }
    )
    if cache.fresh("train", train_key, [model_path, trainlog_path]):
        status["train"] = "hit"
    else:
        dataset = load_tensors(tensors_dir, repo_ids)
        train_set = [dataset[i] for i in splits["train"]]
        params, log = model.train(train_set, config.train)
        model.save_checkpoint(params, model_path)
        _write_json(trainlog_path, {"epoch_losses": log.epoch_losses, "seed": log.seed})
        cache.record("train", train_key)
        status["train"] = "miss"

    # ---- report ----
    report_path = out / "report.json"
    report_key = _digest(
        {"v": STAGE_VERSIONS["report"], "train": train_key, "config": config.to_dict()}
    )
    if cache.fresh("report", report_key, [report_path]):
        status["report"] = "hit"
    else:
        dataset = load_tensors(tensors_dir, repo_ids)
        params = model.load_checkpoint(model_path)
        report = evaluate_model(params, dataset, label_matrix, splits, config)
        _write_json(report_path, report)
        cache.record("report", report_key)
        status["report"] = "miss"

    return PipelineResult(
        report=_read_json(report_path), stages=status, out_dir=str(out)
    )


def load_tensors(tensors_dir: Path, repo_ids: list[str]) -> list[RepoTensor]:
    return [
        RepoTensor.from_dict(_read_json(Path(tensors_dir) / f"{safe_name(rid)}.json"))
        for rid in repo_ids
    ]


def evaluate_model(params, dataset, label_matrix, splits, config: PipelineConfig) -> dict:
    val_set = [dataset[i] for i in splits["val"]]
    test_set = [dataset[i] for i in splits["test"]]
    y_val = label_matrix[splits["val"]]
    y_test = label_matrix[splits["test"]]
    f_val = model.predict_scores(params, val_set)
    f_test = model.predict_scores(params, test_set)
    report = metrics.evaluate_scores(
        y_val,
        f_val,
        y_test,
        f_test,
        config=config.to_dict(),
        split_sizes={k: len(v) for k, v in splits.items()},
    ).to_dict()
    report["config_hash"] = config.config_hash()
    report["stage_versions"] = STAGE_VERSIONS
    return report


def save_pca(reducers: dict[str, PcaReducer], path) -> None:
    tensors = {}
    meta = {"kind": "pca", "domains": sorted(reducers), "k": {}}
    for domain, reducer in reducers.items():
        tensors[f"{domain}.mean"] = reducer.mean_
        tensors[f"{domain}.components"] = reducer.components_
        tensors[f"{domain}.explained_variance"] = reducer.explained_variance_
        meta["k"][domain] = reducer.k
    write_tensor_file(path, meta, tensors)


def load_pca(path) -> dict[str, PcaReducer]:
    meta, tensors = read_tensor_file(path)
    if meta.get("kind") != "pca":
        raise ValidationError(f"{path}: not a PCA reducer file")
    reducers = {}
    for domain in meta["domains"]:
        reducer = PcaReducer(k=int(meta["k"][domain]))
        reducer.mean_ = tensors[f"{domain}.mean"].astype(np.float64)
        reducer.components_ = tensors[f"{domain}.components"].astype(np.float64)
        reducer.explained_variance_ = tensors[f"{domain}.explained_variance"].astype(np.float64)
        reducers[domain] = reducer
    return reducers
