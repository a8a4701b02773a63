"""Cross-component contract: the exporter's output must pass the primary
loader's validation. Skipped when the exporter has not been built, so the
primary suite stands alone.
"""

import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from repotopical.embedder import load_embeddings

FRONTEND = Path(__file__).parent.parent / "frontend"
EXPORTER = FRONTEND / "dist" / "cli.js"

requires_exporter = pytest.mark.skipif(
    shutil.which("node") is None or not EXPORTER.is_file(),
    reason="exporter not built (cd frontend && npm install && npm run build)",
)


def write_fixture_tokens(path: Path) -> None:
    scripts = {
        "trainer.py": ["model", "train", "epoch", "loss", "gradient"],
        "evaluator.py": ["model", "eval", "epoch", "metric", "gradient"],
        "scraper.py": ["http", "fetch", "url", "parse", "html"],
        "db.py": ["sql", "query", "connection", "cursor", "commit"],
        "viz.py": ["plot", "axis", "figure", "legend", "render"],
    }
    lines = []
    for script, words in scripts.items():
        lines.append(json.dumps({"path": script, "domain": "code", "tokens": ["[CLS]"] + words}))
        lines.append(
            json.dumps(
                {"path": script, "domain": "doc",
                 "tokens": ["[CLS]"] + words[:3] + ["[SEP]"] + words}
            )
        )
        lines.append(
            json.dumps(
                {"path": script, "domain": "dep",
                 "tokens": ["[CLS]", words[0], "[C]", words[1], "[SEP]"]}
            )
        )
    path.write_text("\n".join(lines) + "\n")


def run_exporter(tokens: Path, out: Path) -> None:
    subprocess.run(
        ["node", str(EXPORTER), "--tokens", str(tokens), "--out", str(out),
         "--backend", "hash"],
        check=True,
        capture_output=True,
        text=True,
    )


@requires_exporter
class TestExporterContract:
    def test_output_passes_primary_loader(self, tmp_path):
        tokens = tmp_path / "tokens.jsonl"
        write_fixture_tokens(tokens)
        out = tmp_path / "emb.jsonl"
        run_exporter(tokens, out)

        store = load_embeddings(out)
        assert store.dim == 768
        assert len(store) == 15
        for (_, _), vec in store.items():
            assert np.all(np.isfinite(vec))

    def test_identical_inputs_identical_vectors_across_runs(self, tmp_path):
        tokens = tmp_path / "tokens.jsonl"
        write_fixture_tokens(tokens)
        first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run_exporter(tokens, first)
        run_exporter(tokens, second)
        assert first.read_bytes() == second.read_bytes()

    def test_semantic_smoke_logged_not_gated(self, tmp_path, capsys):
        tokens = tmp_path / "tokens.jsonl"
        write_fixture_tokens(tokens)
        out = tmp_path / "emb.jsonl"
        run_exporter(tokens, out)
        store = load_embeddings(out)

        def cosine(a, b):
            return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))

        related = cosine(
            store.get("trainer.py", "code"), store.get("evaluator.py", "code")
        )
        unrelated = cosine(store.get("trainer.py", "code"), store.get("db.py", "code"))
        print(
            f"[ACCEPTANCE] exporter-contract smoke: related {related:.3f} vs "
            f"unrelated {unrelated:.3f} (higher={related > unrelated})"
        )
