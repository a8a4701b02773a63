import json
from pathlib import Path

import numpy as np
import pytest

from repotopical.embedder import EmbeddingStore, load_embeddings, save_embeddings
from repotopical.errors import ValidationError
from repotopical.model import TrainConfig
from repotopical.pipeline import PipelineConfig, run_pipeline, safe_name
from repotopical.synth import SynthConfig, generate_corpus


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth50")
    generate_corpus(root, SynthConfig(n_repos=50, seed=3))
    return root


def small_config(corpus_dir, out_dir, **overrides):
    train = overrides.pop("train", TrainConfig(epochs=4, batch_size=8, seed=0))
    base = dict(
        manifest=str(corpus_dir / "manifest.jsonl"),
        out_dir=str(out_dir),
        top_k=5,
        n=5,
        dim=128,
        k=16,
        train=train,
    )
    base.update(overrides)
    return PipelineConfig(**base)


class TestRunPipeline:
    def test_end_to_end_populates_report(self, corpus_dir, tmp_path):
        result = run_pipeline(small_config(corpus_dir, tmp_path / "out"))
        report = result.report
        for key in ("lrap", "micro_f1", "precision", "recall", "per_topic_thresholds",
                    "config", "config_hash", "split_sizes", "stage_versions"):
            assert key in report
        assert 0.0 <= report["micro_f1"] <= 1.0
        assert report["split_sizes"]["train"] > 0
        assert set(result.stages.values()) == {"miss"}

    def test_second_run_all_cache_hits_identical_report(self, corpus_dir, tmp_path):
        config = small_config(corpus_dir, tmp_path / "out")
        first = run_pipeline(config)
        report_bytes = (tmp_path / "out" / "report.json").read_bytes()
        second = run_pipeline(small_config(corpus_dir, tmp_path / "out"))
        assert set(second.stages.values()) == {"hit"}
        assert (tmp_path / "out" / "report.json").read_bytes() == report_bytes
        assert second.report == first.report

    def test_missing_manifest_fails_before_work(self, tmp_path):
        config = PipelineConfig(
            manifest=str(tmp_path / "missing.jsonl"), out_dir=str(tmp_path / "out")
        )
        with pytest.raises(ValidationError, match="missing.jsonl"):
            run_pipeline(config)
        assert not (tmp_path / "out").exists()

    def test_bit_identical_reports_across_fresh_runs(self, corpus_dir, tmp_path):
        import shutil

        run_pipeline(small_config(corpus_dir, tmp_path / "out"))
        first = (tmp_path / "out/report.json").read_bytes()
        shutil.rmtree(tmp_path / "out")
        run_pipeline(small_config(corpus_dir, tmp_path / "out"))
        assert (tmp_path / "out/report.json").read_bytes() == first

    def test_config_hash_ignores_output_location(self, corpus_dir, tmp_path):
        a = small_config(corpus_dir, tmp_path / "a")
        b = small_config(corpus_dir, tmp_path / "b")
        assert a.config_hash() == b.config_hash()

    def test_source_change_invalidates_downstream_stages(self, corpus_dir, tmp_path):
        config = small_config(corpus_dir, tmp_path / "out")
        run_pipeline(config)
        victim = next((corpus_dir / "repos").glob("*/main.py"))
        victim.write_text(victim.read_text() + "\n# touched\n")
        try:
            result = run_pipeline(small_config(corpus_dir, tmp_path / "out"))
        finally:
            victim.write_text(victim.read_text().replace("\n# touched\n", ""))
        assert result.stages["labels"] == "hit"
        assert result.stages["splits"] == "hit"
        for stage in ("analysis", "samples", "tokens", "embeddings", "pca", "tensors", "train", "report"):
            assert result.stages[stage] == "miss"

    def test_train_config_change_reruns_training_only(self, corpus_dir, tmp_path):
        run_pipeline(small_config(corpus_dir, tmp_path / "out"))
        changed = small_config(
            corpus_dir, tmp_path / "out", train=TrainConfig(epochs=5, batch_size=8, seed=0)
        )
        result = run_pipeline(changed)
        for stage in ("labels", "splits", "analysis", "samples", "tokens", "embeddings", "pca", "tensors"):
            assert result.stages[stage] == "hit"
        assert result.stages["train"] == "miss"
        assert result.stages["report"] == "miss"

    def test_file_provider_reproduces_hash_provider(self, corpus_dir, tmp_path):
        hash_config = small_config(corpus_dir, tmp_path / "hash_out")
        hash_result = run_pipeline(hash_config)

        labels_obj = json.loads((tmp_path / "hash_out/labels.json").read_text())
        merged = EmbeddingStore(128)
        for rid in labels_obj["repo_ids"]:
            per_repo = load_embeddings(tmp_path / "hash_out/emb" / f"{safe_name(rid)}.jsonl")
            for (path, domain), vec in per_repo.items():
                merged.add(f"{rid}/{path}", domain, vec)
        emb_file = tmp_path / "exported.jsonl"
        save_embeddings(merged, emb_file)

        file_config = small_config(
            corpus_dir, tmp_path / "file_out",
            provider="file", embeddings_file=str(emb_file), dim=128,
        )
        file_result = run_pipeline(file_config)
        assert file_result.report["micro_f1"] == hash_result.report["micro_f1"]
        assert file_result.report["lrap"] == hash_result.report["lrap"]

    def test_linear_reduction_mode(self, corpus_dir, tmp_path):
        config = small_config(
            corpus_dir, tmp_path / "out_linear",
            train=TrainConfig(epochs=2, batch_size=8, seed=0, reduction="linear"),
        )
        result = run_pipeline(config)
        assert 0.0 <= result.report["micro_f1"] <= 1.0
        assert not (tmp_path / "out_linear" / "pca.bin").exists()

    def test_config_round_trip(self, corpus_dir, tmp_path):
        config = small_config(corpus_dir, tmp_path / "out")
        clone = PipelineConfig.from_dict(config.to_dict())
        assert clone.to_dict() == config.to_dict()
        assert clone.config_hash() == config.config_hash()
