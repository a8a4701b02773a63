"""Synthetic repository corpus with topic-disjoint vocabularies.

Each generated repository is a small on-disk Python project whose scripts,
docstrings and imports draw from per-topic word pools. Topic signal is
concentrated in dedicated scripts; most repositories also carry an
"archive" script that mimics a different topic's signal but is marked with
archive vocabulary. Attention pooling can learn to suppress the marked
script, while mean pooling mixes the decoy topic into the repository vector
at full strength, so the two strategies separate measurably.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import RepoManifestEntry, write_manifest

TOPIC_STEMS = ("orbit", "lattice", "saffron", "timber", "quartz", "ember", "dune", "frost")

_COMMON_WORDS = [
    "load", "save", "parse", "merge", "split", "cache", "flush", "retry",
    "config", "value", "result", "status", "buffer", "record", "handle",
    "update", "create", "delete", "index", "queue", "batch", "stream",
    "filter", "reduce", "collect", "emit", "wrap", "apply", "resolve",
    "format", "encode", "decode", "check", "verify", "clean", "setup",
]

_MARKER_WORDS = ["legacy", "archive", "deprecated", "snapshot", "frozen", "obsolete"]

_COMMON_IMPORTS = ["os", "sys", "json", "time", "math", "logging", "pathlib"]


@dataclass
class SynthConfig:
    n_repos: int = 200
    n_topics: int = 5
    seed: int = 7
    words_per_topic: int = 24
    noise_scripts: int = 3
    dual_topic_fraction: float = 0.25
    decoy_fraction: float = 0.75


def topic_names(n_topics: int) -> list[str]:
    if n_topics > len(TOPIC_STEMS):
        return [f"topic{i}" for i in range(n_topics)]
    return list(TOPIC_STEMS[:n_topics])


def _topic_words(topic: str, count: int) -> list[str]:
    return [f"{topic}{i:02d}" for i in range(count)]


def _sentence(words: list[str], rng: random.Random, lo: int = 4, hi: int = 8) -> str:
    return " ".join(rng.choices(words, k=rng.randint(lo, hi)))


def _noise_script(rng: random.Random) -> str:
    imports = rng.sample(_COMMON_IMPORTS, k=rng.randint(2, 4))
    lines = [f"import {imp}" for imp in imports]
    lines.append("")
    for name in rng.sample(_COMMON_WORDS, k=rng.randint(2, 4)):
        partner = rng.choice(_COMMON_WORDS)
        lines.append(f"def {name}_{partner}(data):")
        lines.append(f'    """{_sentence(_COMMON_WORDS, rng)}"""')
        lines.append(f"    {rng.choice(imports)}.{rng.choice(_COMMON_WORDS)}(data)")
        lines.append("    return data")
        lines.append("")
    return "\n".join(lines)


def _topic_body(words: list[str], lib: str, rng: random.Random) -> tuple[list[str], str]:
    """Function block whose names, docstrings and calls all live in one
    topic's vocabulary. Returns (lines, entry function name)."""
    lines = []
    picks = rng.sample(words, k=min(4, len(words)))
    entry = picks[0]
    lines.append(f"def {entry}(payload):")
    lines.append(f'    """{_sentence(words, rng)}"""')
    for w in picks[1:]:
        lines.append(f"    {lib}.{w}(payload)")
    lines.append("    return payload")
    lines.append("")
    for w in rng.sample(words, k=min(3, len(words))):
        lines.append(f"def {w}_{rng.choice(words)}(item):")
        lines.append(f'    """{_sentence(words, rng)}"""')
        lines.append(f"    {lib}.{rng.choice(words)}(item)")
        lines.append("    return item")
        lines.append("")
    return lines, entry


def _signal_script(topic: str, words: list[str], rng: random.Random) -> tuple[str, str]:
    lib = f"{topic}lib"
    body, entry = _topic_body(words, lib, rng)
    return "\n".join([f"import {lib}", ""] + body), entry


def _archive_script(decoy_topic: str, words: list[str], rng: random.Random) -> tuple[str, str]:
    """A full signal script of another topic, marked as archived in every
    domain: marker imports, marker function names, marker docstrings."""
    lib = f"{decoy_topic}lib"
    lines = [f"import {lib}", "import archivelib", ""]
    picks = rng.sample(words, k=min(4, len(words)))
    entry = f"{rng.choice(_MARKER_WORDS)}_{picks[0]}"
    lines.append(f"def {entry}(payload):")
    lines.append(f'    """{_sentence(_MARKER_WORDS, rng, 2, 4)} {_sentence(words, rng)}"""')
    for w in picks[1:]:
        lines.append(f"    {lib}.{w}(payload)")
    lines.append(f"    archivelib.{rng.choice(_MARKER_WORDS)}(payload)")
    lines.append("    return payload")
    lines.append("")
    for w in rng.sample(words, k=min(2, len(words))):
        lines.append(f"def {rng.choice(_MARKER_WORDS)}_{w}(item):")
        lines.append(f'    """{_sentence(_MARKER_WORDS, rng, 2, 3)} {_sentence(words, rng, 3, 5)}"""')
        lines.append(f"    {lib}.{rng.choice(words)}(item)")
        lines.append("    return item")
        lines.append("")
    return "\n".join(lines), entry


def generate_repo(
    repo_dir: Path,
    topics: list[str],
    vocab: dict[str, list[str]],
    all_topics: list[str],
    rng: random.Random,
    config: SynthConfig,
) -> None:
    repo_dir.mkdir(parents=True, exist_ok=True)
    entries: dict[str, str] = {}

    for topic in topics:
        source, entry = _signal_script(topic, vocab[topic], rng)
        (repo_dir / f"sig_{topic}.py").write_text(source, encoding="utf-8")
        entries[f"sig_{topic}"] = entry
        # A second signal script that main never calls: it stays out of the
        # call-path sample but still feeds whole-repo term statistics.
        extra_source, _ = _signal_script(topic, vocab[topic], rng)
        (repo_dir / f"extra_{topic}.py").write_text(extra_source, encoding="utf-8")

    if rng.random() < config.decoy_fraction:
        decoy = rng.choice([t for t in all_topics if t not in topics])
        source, entry = _archive_script(decoy, vocab[decoy], rng)
        (repo_dir / "arch_old.py").write_text(source, encoding="utf-8")
        entries["arch_old"] = entry

    for i in range(config.noise_scripts):
        (repo_dir / f"util_{i}.py").write_text(_noise_script(rng), encoding="utf-8")

    # main.py heads the sampling path and fans out to every called script.
    called = sorted(entries) + [f"util_{i}" for i in range(config.noise_scripts)]
    main_lines = [f"import {name}" for name in called]
    main_lines.append("")
    main_lines.append("def run(payload):")
    main_lines.append(f'    """{_sentence(_COMMON_WORDS, rng)}"""')
    for name in sorted(entries):
        main_lines.append(f"    {name}.{entries[name]}(payload)")
    for i in range(config.noise_scripts):
        helper = _first_function(repo_dir / f"util_{i}.py")
        main_lines.append(f"    util_{i}.{helper}(payload)")
    main_lines.append("    return payload")
    main_lines.append("")
    (repo_dir / "main.py").write_text("\n".join(main_lines), encoding="utf-8")


def _first_function(path: Path) -> str | None:
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("def "):
            return line[4:].split("(")[0]
    return None


def generate_corpus(root, config: SynthConfig | None = None) -> list[RepoManifestEntry]:
    """Write the corpus under ``root``: one directory per repository plus
    ``manifest.jsonl`` and ``featured_topics.txt``. Returns the manifest."""
    config = config or SynthConfig()
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(config.seed)
    topics = topic_names(config.n_topics)
    vocab = {t: _topic_words(t, config.words_per_topic) for t in topics}

    entries = []
    for i in range(config.n_repos):
        primary = topics[i % len(topics)]
        assigned = [primary]
        if rng.random() < config.dual_topic_fraction:
            assigned.append(rng.choice([t for t in topics if t != primary]))
        repo_name = f"synth/repo{i:04d}"
        repo_dir = root / "repos" / repo_name.replace("/", "__")
        generate_repo(repo_dir, assigned, vocab, topics, rng, config)
        entries.append(
            RepoManifestEntry(
                repo_id=repo_name,
                local_path=str(repo_dir),
                raw_topics=list(assigned),
                featured_topics=list(assigned),
            )
        )

    write_manifest(entries, root / "manifest.jsonl")
    (root / "featured_topics.txt").write_text("\n".join(topics) + "\n", encoding="utf-8")
    return entries
