"""Acceptance suite: one test per release criterion, each printing a
pass/fail line (run with ``pytest tests/test_acceptance.py -s`` to see them
inline). Tolerances are pinned here and nowhere else.
"""

import json
import random
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from repotopical import analyzer, metrics, model, tf3d
from repotopical.ablation import prepare_corpus, run_ablation
from repotopical.corpus import levenshtein_ratio, normalize_topics
from repotopical.embedder import RepoTensor, fit_pca
from repotopical.model import (
    LinearHeadClassifier,
    TrainConfig,
    aggregate_vectors,
    batch_loss,
    init_params,
    masked_attention,
)
from repotopical.pipeline import PipelineConfig, load_tensors, run_pipeline
from repotopical.synth import SynthConfig, generate_corpus

FIXTURES = Path(__file__).parent / "fixtures"


def report_line(name, ok, detail=""):
    print(f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip(), flush=True)
    assert ok, f"{name} failed: {detail}"


# --------------------------------------------------------------------------
# Shared synthetic corpus (200 repositories, 5 topic-disjoint vocabularies)

ACCEPTANCE_TRAIN = TrainConfig(
    learning_rate=0.002, epochs=50, batch_size=8, seed=0, encoder_kind="bigru"
)


@pytest.fixture(scope="module")
def corpus_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance_corpus")
    generate_corpus(root, SynthConfig(n_repos=200, n_topics=5, seed=7))
    return root


def acceptance_config(corpus_root, out_dir, train=ACCEPTANCE_TRAIN):
    return PipelineConfig(
        manifest=str(corpus_root / "manifest.jsonl"),
        out_dir=str(out_dir),
        top_k=5,
        n=5,
        dim=256,
        k=32,
        train=train,
    )


@pytest.fixture(scope="module")
def pipeline_run(corpus_root, tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance_out") / "run"
    started = time.perf_counter()
    result = run_pipeline(acceptance_config(corpus_root, out))
    elapsed = time.perf_counter() - started
    return result, elapsed, out


# --------------------------------------------------------------------------


class TestGradientOracle:
    def test_full_loss_gradients_match_finite_differences(self):
        started = time.perf_counter()
        rng = np.random.default_rng(1)
        config = TrainConfig(hidden_size=4, encoder_kind="bigru", seed=0)
        params = init_params(8, 2, config, seed=123)

        tensors = []
        for pad in (1, 0, 2):
            x = rng.normal(size=(3, 8))
            mask = np.ones(3, dtype=bool)
            if pad:
                x[-pad:] = 0.0
                mask[-pad:] = False
            tensors.append((x, mask))
        x = np.stack([t[0] for t in tensors])
        mask = np.stack([t[1] for t in tensors])
        labels = np.array([[1, 0], [0, 1], [1, 1]])

        params.zero_grad()
        batch_loss(params, x, mask, labels).backward()
        worst = 0.0
        checked = 0
        for name, tensor in params.tensors.items():
            analytic = tensor.grad
            values = tensor.value
            numeric = np.zeros_like(analytic)
            for i in range(values.size):
                orig = values.ravel()[i]
                values.ravel()[i] = orig + 1e-5
                up = float(batch_loss(params, x, mask, labels).value)
                values.ravel()[i] = orig - 1e-5
                down = float(batch_loss(params, x, mask, labels).value)
                values.ravel()[i] = orig
                numeric.ravel()[i] = (up - down) / 2e-5
            rel = np.abs(analytic - numeric) / np.maximum(
                1e-6, np.abs(analytic) + np.abs(numeric)
            )
            worst = max(worst, float(rel.max()))
            checked += values.size
        elapsed = time.perf_counter() - started
        report_line(
            "gradient-oracle",
            worst < 1e-4 and elapsed < 10.0,
            f"(worst rel err {worst:.2e} over {checked} params, {elapsed:.1f}s)",
        )


def brute_force_lrap(y, f):
    y = np.asarray(y)
    f = np.asarray(f, dtype=float)
    total = 0.0
    for i in range(y.shape[0]):
        true_js = [j for j in range(y.shape[1]) if y[i, j] == 1]
        acc = 0.0
        for j in true_js:
            hits = len([k for k in range(y.shape[1]) if y[i, k] == 1 and f[i, k] >= f[i, j]])
            rank = len([k for k in range(y.shape[1]) if f[i, k] >= f[i, j]])
            acc += hits / rank
        total += acc / len(true_js)
    return total / y.shape[0]


class TestLrapOracle:
    def test_thousand_random_cases_and_worked_example(self):
        worked = metrics.lrap([[1, 0, 1]], [[0.8, 0.5, 0.3]])
        ok_worked = abs(worked - 5.0 / 6.0) < 1e-12

        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(1000):
            samples = int(rng.integers(1, 17))
            labels = int(rng.integers(2, 9))
            y = (rng.random((samples, labels)) > 0.6).astype(int)
            for row in y:
                if not row.any():
                    row[rng.integers(labels)] = 1
            f = np.round(rng.random((samples, labels)), 2)
            worst = max(worst, abs(metrics.lrap(y, f) - brute_force_lrap(y, f)))
        report_line(
            "lrap-oracle",
            ok_worked and worst < 1e-12,
            f"(worked case {worked:.6f}, worst |diff| {worst:.2e})",
        )


class TestMaskingExactness:
    def test_pad_weights_zero_and_output_bit_stable(self):
        rng = np.random.default_rng(3)
        trials = 100
        for trial in range(trials):
            n = int(rng.integers(2, 9))
            n_pad = int(rng.integers(1, n))
            mask = np.ones(n, dtype=bool)
            mask[n - n_pad :] = False
            d = int(rng.integers(2, 12))
            y = rng.normal(size=(n, d))
            h_n = rng.normal(size=d)
            base, weights = masked_attention(y, h_n, mask, return_weights=True)
            assert np.all(weights[~mask] == 0.0)
            perturbed = y.copy()
            scale = rng.choice([1.0, 1e8, -1e12, 1e300])
            perturbed[~mask] = scale * rng.normal(size=(n_pad, d))
            out = masked_attention(perturbed, h_n, mask)
            assert np.array_equal(out, base), f"trial {trial}: output changed"
        report_line("masking-exactness", True, f"({trials} randomized trials)")


class TestSyntheticEndToEnd:
    def test_attention_beats_thresholds_and_mean_baseline(self, corpus_root, pipeline_run):
        result, elapsed, out = pipeline_run
        f1 = result.report["micro_f1"]
        lrap_score = result.report["lrap"]

        labels_obj = json.loads((out / "labels.json").read_text())
        splits = json.loads((out / "splits.json").read_text())
        label_matrix = np.asarray(labels_obj["matrix"])
        dataset = load_tensors(out / "tensors", labels_obj["repo_ids"])
        pooled = np.stack(
            [aggregate_vectors(list(t.x[t.mask]), "mean") for t in dataset]
        )
        head = LinearHeadClassifier(
            learning_rate=0.002, epochs=50, batch_size=8, seed=0
        ).fit(pooled[splits["train"]], label_matrix[splits["train"]])
        baseline = metrics.evaluate_scores(
            label_matrix[splits["val"]], head.predict_proba(pooled[splits["val"]]),
            label_matrix[splits["test"]], head.predict_proba(pooled[splits["test"]]),
        )
        ok = (
            f1 >= 0.90
            and lrap_score >= 0.95
            and elapsed < 120.0
            and baseline.micro_f1 < f1
        )
        report_line(
            "synthetic-end-to-end",
            ok,
            f"(attention F1 {f1:.3f} LRAP {lrap_score:.3f} in {elapsed:.1f}s; "
            f"mean baseline F1 {baseline.micro_f1:.3f})",
        )


class TestTf3dEndToEnd:
    def test_tf3d_on_synthetic_corpus(self, corpus_root, pipeline_run):
        _, _, out = pipeline_run
        labels_obj = json.loads((out / "labels.json").read_text())
        splits = json.loads((out / "splits.json").read_text())
        label_matrix = np.asarray(labels_obj["matrix"])
        manifest = {
            e.repo_id: e
            for e in __import__("repotopical.corpus", fromlist=["read_manifest"]).read_manifest(
                corpus_root / "manifest.jsonl"
            )
        }
        counts = []
        for rid in labels_obj["repo_ids"]:
            local = Path(manifest[rid].local_path)
            records, _ = analyzer.analyze_repository(local)
            per_script = [
                tf3d.extract_term_counts(
                    record, (local / record.path).read_text(encoding="utf-8")
                )
                for record in records
            ]
            counts.append(tf3d.merge_counts(per_script))
        tagger = tf3d.TF3DTagger(seed=0).fit(
            [counts[i] for i in splits["train"]],
            label_matrix[splits["train"]],
            topics=labels_obj["topics"],
        )
        rep = metrics.evaluate_scores(
            label_matrix[splits["val"]],
            tagger.predict_proba([counts[i] for i in splits["val"]]),
            label_matrix[splits["test"]],
            tagger.predict_proba([counts[i] for i in splits["test"]]),
        )
        report_line(
            "tf3d-end-to-end", rep.micro_f1 >= 0.80, f"(micro-F1 {rep.micro_f1:.3f})"
        )

    def test_clarity_and_embedding_match_direct_formula_on_toy_corpus(self):
        # Four repositories, two topics, tiny vocabulary: every quantity is
        # recomputed with explicit loops straight from the formulas.
        from collections import Counter

        vocab = tf3d.TermVocab(
            terms={
                "code_ast": ["call", "def"],
                "docstring": ["alpha", "beta", "gamma"],
                "dependency": ["numpy", "os"],
            }
        )
        raw_counts = [
            {"code_ast": Counter({"call": 2, "def": 1}),
             "docstring": Counter({"alpha": 3}),
             "dependency": Counter({"numpy": 2})},
            {"code_ast": Counter({"call": 1}),
             "docstring": Counter({"alpha": 1, "beta": 1}),
             "dependency": Counter({"numpy": 1, "os": 1})},
            {"code_ast": Counter({"def": 2}),
             "docstring": Counter({"beta": 2, "gamma": 2}),
             "dependency": Counter({"os": 3})},
            {"code_ast": Counter({"def": 1, "call": 1}),
             "docstring": Counter({"gamma": 1}),
             "dependency": Counter({"os": 1})},
        ]
        labels = np.array([[1, 0], [1, 0], [0, 1], [0, 1]])
        eps = 1e-6
        profiles = [tf3d.repo_profile(c, vocab, eps) for c in raw_counts]
        clarity = tf3d.fit_clarity(profiles, labels, epsilon=eps)

        worst = 0.0
        for domain in tf3d.TF3D_DOMAINS:
            S = np.stack([p.S[domain] for p in profiles])
            for t in range(2):
                members = labels[:, t] == 1
                expected = np.log(S[members]).mean(axis=0) / np.log(S[~members]).mean(axis=0)
                worst = max(worst, float(np.max(np.abs(clarity.C[domain][t] - expected))))
        for profile in profiles:
            E = tf3d.embed_repo(profile, clarity)
            for d_index, domain in enumerate(tf3d.TF3D_DOMAINS):
                for t in range(2):
                    s, c = profile.S[domain], clarity.C[domain][t]
                    expected = (s @ c) / (np.linalg.norm(s) * np.linalg.norm(c))
                    worst = max(worst, abs(E[d_index, t] - expected))
        report_line("tf3d-toy-oracle", worst < 1e-12, f"(worst |diff| {worst:.2e})")


class TestParserGoldenCorpus:
    def test_golden_files_byte_identical(self, tmp_path):
        out = tmp_path / "analysis.json"
        records, edges = analyzer.analyze_repository(FIXTURES / "golden_repo")
        analyzer.write_analysis(records, edges, out)
        n_files = len(records)
        identical = out.read_bytes() == (FIXTURES / "golden_analysis.json").read_bytes()
        report_line(
            "parser-golden-corpus",
            n_files >= 20 and identical,
            f"({n_files} fixture files, byte-identical={identical})",
        )

    @pytest.mark.filterwarnings("ignore::DeprecationWarning", "ignore::SyntaxWarning")
    def test_fuzz_thousand_files_zero_crashes(self):
        rng = random.Random(4242)
        seeds = [
            p.read_text(encoding="utf-8")
            for p in sorted((FIXTURES / "golden_repo").rglob("*.py"))
        ]
        crashes = 0
        invalid = 0
        for i in range(1000):
            source = seeds[rng.randrange(len(seeds))]
            for _ in range(rng.randint(1, 3)):
                pos = rng.randrange(max(1, len(source)))
                op = rng.randrange(3)
                if op == 0:
                    source = source[:pos]
                elif op == 1:
                    source = source[:pos] + rng.choice("()[]{}:,'\"\x00\\") + source[pos:]
                else:
                    source = source[:pos] + source[pos + 1 :]
            try:
                record = analyzer.analyze_script(source, f"fuzz_{i}.py")
                if not record.parse_ok:
                    invalid += 1
            except Exception:  # pragma: no cover - the criterion under test
                crashes += 1
        report_line(
            "parser-fuzz", crashes == 0, f"(0 crashes target, got {crashes}; {invalid} invalid)"
        )


FUZZY_FIXTURE = [
    # (raw topic, expected featured topic or None)
    ("machinelearning", "machine-learning"),
    ("Machine-Learning", "machine-learning"),
    ("machine_learning", "machine-learning"),
    ("machine learning", "machine-learning"),
    ("machine-learnin", "machine-learning"),
    ("deep-learning", "deep-learning"),
    ("deeplearning", "deep-learning"),
    ("Deep_Learning", "deep-learning"),
    ("django", "django"),
    ("Django", "django"),
    ("djangoo", None),  # 85.71: short names need near-exact matches
    ("reinforcement-learning", "reinforcement-learning"),
    ("reinforcementlearning", "reinforcement-learning"),
    ("tensor-flow", "tensorflow"),
    ("TensorFlow", "tensorflow"),
    ("ethereum", "ethereum"),
    ("etherium", None),  # 87.50
    ("computervision", "computer-vision"),
    ("computer-vision", "computer-vision"),
    ("natural-language-processing", "natural-language-processing"),
    ("naturallanguageprocessing", "natural-language-processing"),
    ("crypto-currency", "cryptocurrency"),
    ("hacktober-fest", "hacktoberfest"),
    ("kubernetes", "kubernetes"),
    ("kubernets", "kubernetes"),
    ("covid19", None),  # 87.50
    ("bitcoin-wallet", None),
    ("my-cool-project", None),
    ("ml", None),
    ("web3-dapp-tooling", None),
]


class TestFuzzyNormalization:
    def test_thirty_pair_fixture(self):
        from repotopical.corpus import load_featured_topics

        featured = load_featured_topics()
        ratio = levenshtein_ratio("machinelearning", "machine-learning")
        ok_ratio = abs(ratio - 93.75) < 1e-9

        failures = []
        for raw, expected in FUZZY_FIXTURE:
            mapped = normalize_topics([raw], featured, 90.0)
            got = mapped[0] if mapped else None
            if got != expected:
                failures.append((raw, expected, got))
        report_line(
            "fuzzy-normalization",
            ok_ratio and not failures,
            f"(ratio {ratio}, {len(FUZZY_FIXTURE)} pairs, failures={failures})",
        )


class TestPcaOracle:
    def test_random_data_against_eigendecomposition(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(200, 20)) @ np.diag(np.linspace(2.5, 0.3, 20))
        reducer = fit_pca(X, k=20)

        Xc = X - X.mean(axis=0)
        values, _ = np.linalg.eigh(Xc.T @ Xc / (X.shape[0] - 1))
        values = np.sort(values)[::-1]
        variance_err = float(np.max(np.abs(reducer.explained_variance_ - values)))

        gram = reducer.components_ @ reducer.components_.T
        ortho_err = float(np.max(np.abs(gram - np.eye(20))))
        report_line(
            "pca-oracle",
            variance_err < 1e-8 and ortho_err < 1e-8,
            f"(variance err {variance_err:.2e}, orthonormality err {ortho_err:.2e})",
        )


class TestAblationHarness:
    def test_four_grids_three_seeds(self, corpus_root, tmp_path):
        started = time.perf_counter()
        config = acceptance_config(
            corpus_root,
            tmp_path / "ablation_out",
            train=TrainConfig(learning_rate=0.002, epochs=12, batch_size=8, seed=0),
        )
        prep = prepare_corpus(config)
        report = run_ablation(config, seeds=(0, 1, 2), prep=prep)
        elapsed = time.perf_counter() - started

        grids = report["grids"]
        shape_ok = (
            len(grids["components"]["rows"]) == 4
            and len(grids["script_cap"]["rows"]) == 4
            and len(grids["encoder"]["rows"]) == 3
            and len(grids["reduction"]["rows"]) == 2
        )
        stats_ok = all(
            "micro_f1_mean" in row and "micro_f1_sd" in row and len(row["micro_f1_values"]) == 3
            for grid in grids.values()
            for row in grid["rows"]
        )
        report_line(
            "ablation-harness",
            shape_ok and stats_ok and elapsed < 1800.0,
            f"(13 configs x 3 seeds in {elapsed:.0f}s)",
        )


class TestPipelineDeterminism:
    def test_repeat_run_bit_identical(self, corpus_root, pipeline_run):
        _, _, out = pipeline_run
        first = (out / "report.json").read_bytes()
        shutil.rmtree(out)  # force a full recompute of the same config
        run_pipeline(acceptance_config(corpus_root, out))
        second = (out / "report.json").read_bytes()
        report_line(
            "pipeline-determinism",
            first == second,
            f"({len(first)} byte report reproduced bit-identically)",
        )
