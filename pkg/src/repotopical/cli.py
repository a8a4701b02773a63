"""Command-line entry points. Exit codes: 0 success, 2 validation error,
1 runtime error."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import ablation as ablation_mod
from . import analyzer, corpus, graphkit, metrics, model, pipeline, serializer, tf3d
from .embedder import (
    EmbeddingStore,
    HashingEmbedder,
    PcaReducer,
    RepoTensor,
    load_embeddings,
    save_embeddings,
)
from .errors import RepotopicalError, ValidationError


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except RepotopicalError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    return 0


def _load_json(path):
    """Read a JSON file, mapping parse problems onto validation errors."""
    try:
        return json.loads(Path(path).read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: not readable as JSON: {exc}") from exc


@click.group()
def cli():
    """Repository-level embeddings and topic auto-tagging toolkit."""


@cli.command()
@click.option("--topic", required=True, help="Topic to search for.")
@click.option("--max", "max_repos", type=int, default=100, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--api-base", default="https://api.github.com", show_default=True)
@click.option("--token", envvar="GITHUB_TOKEN", default=None, help="API token.")
@click.option("--featured-topics", type=click.Path(exists=True), default=None)
@click.option("--threshold", type=float, default=corpus.DEFAULT_FUZZY_THRESHOLD, show_default=True)
def crawl(topic, max_repos, out, api_base, token, featured_topics, threshold):
    """Fetch repositories for a topic and write a normalized manifest."""
    featured = corpus.load_featured_topics(featured_topics)
    entries = corpus.crawl_topic(api_base, topic, max_repos, auth_token=token)
    for entry in entries:
        entry.featured_topics = corpus.normalize_topics(entry.raw_topics, featured, threshold)
    corpus.write_manifest(entries, out)
    click.echo(f"wrote {len(entries)} entries to {out}")


@cli.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--top-k", type=int, required=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def labels(manifest, top_k, out):
    """Build the topic vocabulary and binary label matrix."""
    entries = corpus.read_manifest(manifest)
    vocab = corpus.build_label_matrix(entries, top_k)
    payload = {
        "topics": vocab.topics,
        "repo_ids": vocab.repo_ids,
        "matrix": vocab.label_matrix.tolist(),
    }
    Path(out).write_text(json.dumps(payload, sort_keys=True), "utf-8")
    click.echo(f"{len(vocab.topics)} topics over {len(vocab.repo_ids)} repositories -> {out}")


@cli.command()
@click.option("--repo", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def analyze(repo, out):
    """Statically analyze every Python script under a repository root."""
    records, edges = analyzer.analyze_repository(repo)
    analyzer.write_analysis(records, edges, out)
    bad = sum(1 for r in records if not r.parse_ok)
    click.echo(f"{len(records)} scripts ({bad} unparsable), {len(edges)} edges -> {out}")


@cli.command()
@click.option("--analysis", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def sample(analysis, n, seed, out):
    """Sample scripts along call-graph paths, padded to length n."""
    records, edges = analyzer.read_analysis(analysis)
    graph = graphkit.DependencyGraph.build(records, edges)
    result = graphkit.sample_scripts(graph, n, seed)
    payload = json.dumps(result.paths)
    if out:
        Path(out).write_text(payload + "\n", "utf-8")
    else:
        click.echo(payload)


@cli.command()
@click.option("--analysis", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--repo", default=".", type=click.Path(exists=True, file_okay=False), show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def serialize(analysis, repo, out):
    """Emit the code/doc/dep token sequences for every analyzed script."""
    records, edges = analyzer.read_analysis(analysis)
    root = Path(repo)
    rows = []
    for record in records:
        source_path = root / record.path
        if not source_path.is_file():
            raise ValidationError(f"source file missing: {source_path}")
        source = source_path.read_bytes().decode("utf-8", errors="replace")
        for seq in serializer.serialize_script(record, edges, source).values():
            rows.append((record.path, seq))
    serializer.write_token_file(rows, out)
    click.echo(f"{len(rows)} sequences -> {out}")


@cli.command()
@click.option("--tokens", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--provider", type=click.Choice(["hash", "file"]), default="hash", show_default=True)
@click.option("--dim", type=int, default=768, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--file", "source_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def embed(tokens, provider, dim, seed, source_file, out):
    """Turn token sequences into script embeddings."""
    rows = serializer.read_token_file(tokens)
    if provider == "hash":
        hasher = HashingEmbedder(width=dim, seed=seed)
        store = EmbeddingStore(dim)
        for path, seq in rows:
            store.add(path, seq.domain, hasher.embed(seq))
    else:
        if not source_file:
            raise ValidationError("--provider file requires --file")
        external = load_embeddings(source_file)
        store = EmbeddingStore(external.dim)
        for path, seq in rows:
            store.add(path, seq.domain, external.get(path, seq.domain))
    save_embeddings(store, out)
    click.echo(f"{len(store)} embeddings (dim {store.dim}) -> {out}")


@cli.command()
@click.option("--emb", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, default=64, show_default=True)
@click.option("--split", type=click.Path(exists=True, dir_okay=False), default=None,
              help='JSON {"paths": [...]} restricting the fit to these scripts.')
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def pca(emb, k, split, out):
    """Fit per-domain PCA reducers on an embedding file."""
    store = load_embeddings(emb)
    allowed = None
    if split:
        obj = _load_json(split)
        allowed = set(obj.get("paths", []))
    reducers = {}
    for domain in serializer.DOMAINS:
        rows = [
            vec
            for (path, d), vec in sorted(store.items())
            if d == domain and (allowed is None or path in allowed)
        ]
        if not rows:
            continue
        reducers[domain] = PcaReducer(k=k).fit(np.stack(rows))
    if not reducers:
        raise ValidationError("no vectors matched the split restriction")
    pipeline.save_pca(reducers, out)
    click.echo(f"fitted {sorted(reducers)} (k={k}) -> {out}")


@cli.command()
@click.option("--tensors", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def train(tensors, config_path, seed, out):
    """Train the attention tagger on a directory of labeled repo tensors."""
    cfg = model.TrainConfig()
    if config_path:
        cfg = model.TrainConfig.from_dict(_load_json(config_path))
    if seed is not None:
        cfg.seed = seed
    dataset = [
        RepoTensor.from_dict(_load_json(p)) for p in sorted(Path(tensors).glob("*.json"))
    ]
    params, log = model.train(dataset, cfg)
    model.save_checkpoint(params, out)
    click.echo(
        f"trained {cfg.encoder_kind} for {cfg.epochs} epochs "
        f"(final loss {log.epoch_losses[-1]:.4f}) -> {out}"
        if log.epoch_losses
        else f"saved untrained params -> {out}"
    )


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--tensor", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def infer(model_path, tensor, out):
    """Per-topic scores for one repository tensor."""
    params = model.load_checkpoint(model_path)
    repo = RepoTensor.from_dict(_load_json(tensor))
    scores = model.predict_scores(params, [repo])[0]
    payload = json.dumps({"repo_id": repo.repo_id, "scores": [float(s) for s in scores]})
    if out:
        Path(out).write_text(payload + "\n", "utf-8")
    else:
        click.echo(payload)


@cli.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--tensors", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--splits", "splits_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def eval_cmd(model_path, tensors, labels_path, splits_path, out):
    """Threshold on the validation split, report metrics on test."""
    params = model.load_checkpoint(model_path)
    labels_obj = _load_json(labels_path)
    splits = _load_json(splits_path)
    label_matrix = np.asarray(labels_obj["matrix"], dtype=np.int64)
    dataset = pipeline.load_tensors(Path(tensors), labels_obj["repo_ids"])
    val = [dataset[i] for i in splits["val"]]
    test = [dataset[i] for i in splits["test"]]
    report = metrics.evaluate_scores(
        label_matrix[splits["val"]],
        model.predict_scores(params, val),
        label_matrix[splits["test"]],
        model.predict_scores(params, test),
        split_sizes={k: len(v) for k, v in splits.items()},
    )
    Path(out).write_text(report.to_json(sort_keys=True) + "\n", "utf-8")
    click.echo(f"micro-F1 {report.micro_f1:.3f}, LRAP {report.lrap:.3f} -> {out}")


@cli.command("tf3d")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--analysis-dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Reuse per-repo analysis files instead of re-analyzing.")
@click.option("--splits", "splits_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--eval", "do_eval", is_flag=True, help="Also emit <out>.report.json.")
def tf3d_cmd(manifest, labels_path, analysis_dir, splits_path, seed, out, do_eval):
    """Fit the TF3D baseline; optionally evaluate with the shared report."""
    entries = corpus.read_manifest(manifest)
    by_id = {e.repo_id: e for e in entries}
    labels_obj = _load_json(labels_path)
    repo_ids = labels_obj["repo_ids"]
    label_matrix = np.asarray(labels_obj["matrix"], dtype=np.int64)

    counts = []
    for rid in repo_ids:
        local = by_id[rid].local_path
        if analysis_dir:
            records, _ = analyzer.read_analysis(
                Path(analysis_dir) / f"{pipeline.safe_name(rid)}.json"
            )
        else:
            records, _ = analyzer.analyze_repository(local)
        per_script = []
        for record in records:
            source = (Path(local) / record.path).read_bytes().decode("utf-8", errors="replace")
            per_script.append(tf3d.extract_term_counts(record, source))
        counts.append(tf3d.merge_counts(per_script))

    if splits_path:
        splits = _load_json(splits_path)
    else:
        vocab = corpus.TopicVocabulary(labels_obj["topics"], label_matrix, repo_ids)
        train_idx, val_idx, test_idx = corpus.split_corpus(vocab, seed=seed)
        splits = {"train": train_idx, "val": val_idx, "test": test_idx}

    train_counts = [counts[i] for i in splits["train"]]
    tagger = tf3d.TF3DTagger(seed=seed).fit(
        train_counts, label_matrix[splits["train"]], topics=labels_obj["topics"]
    )
    tagger.save(out)
    click.echo(f"tf3d model -> {out}")

    if do_eval:
        report = metrics.evaluate_scores(
            label_matrix[splits["val"]],
            tagger.predict_proba([counts[i] for i in splits["val"]]),
            label_matrix[splits["test"]],
            tagger.predict_proba([counts[i] for i in splits["test"]]),
            config={"model": "tf3d", "seed": seed},
            split_sizes={k: len(v) for k, v in splits.items()},
        )
        report_path = f"{out}.report.json"
        Path(report_path).write_text(report.to_json(sort_keys=True) + "\n", "utf-8")
        click.echo(
            f"tf3d micro-F1 {report.micro_f1:.3f}, LRAP {report.lrap:.3f} -> {report_path}"
        )


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seeds", default="0,1,2", show_default=True)
@click.option("--grid", "grid_name", default=None,
              help="Run one named grid (components, script_cap, encoder, reduction).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def ablate(config_path, seeds, grid_name, out):
    """Run the ablation grids and emit the mean +- sd table."""
    config = pipeline.PipelineConfig.from_dict(_load_json(config_path))
    seed_list = tuple(int(s) for s in seeds.split(",") if s.strip())
    grids = ablation_mod.standard_grids(config)
    if grid_name:
        if grid_name not in grids:
            raise ValidationError(f"unknown grid {grid_name!r}; have {sorted(grids)}")
        grids = {grid_name: grids[grid_name]}
    report = ablation_mod.run_ablation(config, grids=grids, seeds=seed_list)
    ablation_mod.write_ablation_report(report, out)
    click.echo(f"{sum(len(g['rows']) for g in report['grids'].values())} rows -> {out}")


@cli.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--tensors", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--labels", "labels_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--dims", type=click.Choice(["2", "3"]), default="2", show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def project(model_path, tensors, labels_path, dims, out):
    """CSV of low-dimensional PCA projections of repository vectors."""
    params = model.load_checkpoint(model_path)
    tensor_paths = sorted(Path(tensors).glob("*.json"))
    dataset = [RepoTensor.from_dict(_load_json(p)) for p in tensor_paths]
    pooled = model.pooled_vectors(params, dataset)
    reducer = PcaReducer(k=int(dims)).fit(pooled)
    projected = reducer.transform(pooled)
    topics = None
    if labels_path:
        topics = _load_json(labels_path)["topics"]
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repo_id", "topics"] + [f"dim{i}" for i in range(int(dims))])
        for tensor, row in zip(dataset, projected):
            names = ""
            if tensor.labels is not None:
                if topics:
                    names = "|".join(t for t, v in zip(topics, tensor.labels) if v)
                else:
                    names = "|".join(str(i) for i, v in enumerate(tensor.labels) if v)
            writer.writerow([tensor.repo_id, names] + [f"{v:.6f}" for v in row])
    click.echo(f"{len(dataset)} projections -> {out}")


@cli.command("pipeline")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", default=None, help="Overrides the config out_dir.")
def pipeline_cmd(config_path, out_dir):
    """Run the full pipeline with content-hash stage caching."""
    config = pipeline.PipelineConfig.from_dict(_load_json(config_path))
    if out_dir:
        config.out_dir = out_dir
    result = pipeline.run_pipeline(config)
    hits = sum(1 for v in result.stages.values() if v == "hit")
    click.echo(
        json.dumps(
            {
                "out_dir": result.out_dir,
                "stages": result.stages,
                "cache_hits": hits,
                "micro_f1": result.report["micro_f1"],
                "lrap": result.report["lrap"],
            },
            sort_keys=True,
        )
    )


if __name__ == "__main__":
    main()
