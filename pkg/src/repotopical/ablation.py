"""Ablation harness: component removal, sampled-script caps, encoder
variants, and PCA-versus-linear reduction, each run over several seeds and
reported as mean plus/minus standard deviation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analyzer, corpus, graphkit, model, serializer
from .embedder import EmbeddingStore, HashingEmbedder, PcaReducer, assemble_repo_tensor
from .errors import ValidationError
from .graphkit import DependencyGraph
from .metrics import EvalReport, evaluate_scores
from .pipeline import PipelineConfig

DEFAULT_SEEDS = (0, 1, 2)

METRIC_FIELDS = ("lrap", "micro_f1", "precision", "recall")


@dataclass
class AblationPoint:
    label: str
    domains: tuple[str, ...]
    n: int
    encoder_kind: str
    reduction: str

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "domains": list(self.domains),
            "n": self.n,
            "encoder_kind": self.encoder_kind,
            "reduction": self.reduction,
        }


def standard_grids(config: PipelineConfig) -> dict[str, list[AblationPoint]]:
    """The four appendix-style grids, anchored at the base config."""
    base = dict(
        domains=tuple(config.domains),
        n=config.n,
        encoder_kind=config.train.encoder_kind,
        reduction=config.train.reduction,
    )

    def point(label, **overrides):
        return AblationPoint(label=label, **{**base, **overrides})

    removal = [point("none")]
    for domain in config.domains:
        rest = tuple(d for d in config.domains if d != domain)
        removal.append(point(f"no-{domain}", domains=rest))

    return {
        "components": removal,
        "script_cap": [point(f"n={n}", n=n) for n in graphkit.supported_caps()],
        "encoder": [point(kind, encoder_kind=kind) for kind in model.ENCODER_KINDS],
        "reduction": [point(kind, reduction=kind) for kind in model.REDUCTION_KINDS],
    }


@dataclass
class PreparedCorpus:
    """Everything that is invariant across grid points: analyses, labels,
    splits and raw script embeddings."""

    repo_ids: list[str]
    topics: list[str]
    label_matrix: np.ndarray
    splits: dict[str, list[int]]
    graphs: dict[str, DependencyGraph]
    stores: dict[str, EmbeddingStore]
    config: PipelineConfig


def prepare_corpus(config: PipelineConfig) -> PreparedCorpus:
    config.validate()
    entries = corpus.read_manifest(config.manifest)
    vocab = corpus.build_label_matrix(entries, config.top_k)
    train_idx, val_idx, test_idx = corpus.split_corpus(
        vocab, config.train_fraction, config.split_seed
    )
    by_id = {e.repo_id: e for e in entries}

    graphs: dict[str, DependencyGraph] = {}
    stores: dict[str, EmbeddingStore] = {}
    hasher = HashingEmbedder(width=config.dim, seed=config.hash_seed)
    for rid in vocab.repo_ids:
        local = by_id[rid].local_path
        if not local or not Path(local).is_dir():
            raise ValidationError(f"repository checkout missing for {rid}: {local!r}")
        records, edges = analyzer.analyze_repository(local)
        graphs[rid] = DependencyGraph.build(records, edges)
        store = EmbeddingStore(config.dim)
        root = Path(local)
        for record in records:
            source = (root / record.path).read_bytes().decode("utf-8", errors="replace")
            for seq in serializer.serialize_script(record, edges, source).values():
                store.add(record.path, seq.domain, hasher.embed(seq))
        stores[rid] = store

    return PreparedCorpus(
        repo_ids=vocab.repo_ids,
        topics=vocab.topics,
        label_matrix=vocab.label_matrix,
        splits={"train": train_idx, "val": val_idx, "test": test_idx},
        graphs=graphs,
        stores=stores,
        config=config,
    )


def run_point(prep: PreparedCorpus, point: AblationPoint, seed: int) -> EvalReport:
    """Train and evaluate one grid configuration with one seed."""
    config = prep.config
    samples = {
        rid: graphkit.sample_scripts(prep.graphs[rid], point.n, config.sample_seed)
        for rid in prep.repo_ids
    }

    reducers = None
    if point.reduction == "pca":
        train_ids = [prep.repo_ids[i] for i in prep.splits["train"]]
        reducers = {}
        for domain in point.domains:
            rows = [
                prep.stores[rid].get(path, domain)
                for rid in train_ids
                for path in samples[rid].real_paths()
            ]
            reducers[domain] = PcaReducer(k=config.k).fit(np.stack(rows))

    dataset = [
        assemble_repo_tensor(
            samples[rid],
            prep.stores[rid],
            reducers,
            domains=point.domains,
            labels=prep.label_matrix[row],
            repo_id=rid,
        )
        for row, rid in enumerate(prep.repo_ids)
    ]

    train_config = model.TrainConfig.from_dict(
        {
            **config.train.to_dict(),
            "encoder_kind": point.encoder_kind,
            "reduction": point.reduction,
            "seed": seed,
            "n_domains": len(point.domains),
        }
    )
    train_set = [dataset[i] for i in prep.splits["train"]]
    params, _ = model.train(train_set, train_config)

    val_set = [dataset[i] for i in prep.splits["val"]]
    test_set = [dataset[i] for i in prep.splits["test"]]
    return evaluate_scores(
        prep.label_matrix[prep.splits["val"]],
        model.predict_scores(params, val_set),
        prep.label_matrix[prep.splits["test"]],
        model.predict_scores(params, test_set),
        config={**point.to_dict(), "seed": seed},
        split_sizes={k: len(v) for k, v in prep.splits.items()},
    )


def run_grid(
    prep: PreparedCorpus, points: list[AblationPoint], seeds=DEFAULT_SEEDS
) -> list[dict]:
    """One table row per point: per-metric mean and standard deviation over
    the seeds. Any failing run aborts with the config named."""
    rows = []
    for point in points:
        reports = []
        for seed in seeds:
            try:
                reports.append(run_point(prep, point, seed))
            except Exception as exc:
                raise ValidationError(
                    f"ablation run failed for {point.label!r} (seed {seed}): {exc}"
                ) from exc
        row = {"label": point.label, "config": point.to_dict(), "seeds": list(seeds)}
        for metric in METRIC_FIELDS:
            values = np.array([getattr(r, metric) for r in reports], dtype=np.float64)
            row[f"{metric}_mean"] = float(values.mean())
            row[f"{metric}_sd"] = float(values.std(ddof=1)) if len(values) > 1 else 0.0
            row[f"{metric}_values"] = [float(v) for v in values]
        rows.append(row)
    return rows


def run_ablation(
    config: PipelineConfig,
    grids: dict[str, list[AblationPoint]] | None = None,
    seeds=DEFAULT_SEEDS,
    prep: PreparedCorpus | None = None,
) -> dict:
    if prep is None:
        prep = prepare_corpus(config)
    if grids is None:
        grids = standard_grids(config)
    return {
        "seeds": list(seeds),
        "grids": {name: {"rows": run_grid(prep, points, seeds)} for name, points in grids.items()},
    }


def write_ablation_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
