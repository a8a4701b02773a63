"""Corpus acquisition and labelling: crawler client, topic normalization,
label matrices, and train/validation/test splits.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import requests

from .errors import FatalCrawlError, RetriableCrawlError, ValidationError

DEFAULT_FUZZY_THRESHOLD = 90.0
_SEPARATORS = "-_ \t\r\n"


@dataclass
class RepoManifestEntry:
    """One crawled repository: identity, checkout location and topic labels."""

    repo_id: str
    local_path: str = ""
    raw_topics: list[str] = field(default_factory=list)
    featured_topics: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "repo_id": self.repo_id,
                "local_path": self.local_path,
                "raw_topics": self.raw_topics,
                "featured_topics": self.featured_topics,
            }
        )


@dataclass
class TopicVocabulary:
    """Ordered topic names plus the binary repo-by-topic label matrix."""

    topics: list[str]
    label_matrix: np.ndarray
    repo_ids: list[str]

    @property
    def n_topics(self) -> int:
        return len(self.topics)


def _strip_key(s: str) -> str:
    """Comparison key: case folded, separators trimmed at both ends only."""
    return s.casefold().strip(_SEPARATORS)


def levenshtein_distance(a: str, b: str) -> int:
    """Plain edit distance (insert/delete/substitute, all cost 1)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def levenshtein_ratio(a: str, b: str) -> float:
    """Fuzzy-match score in [0, 100]: 100 * (1 - d / max(|a|, |b|)).

    Inputs are case folded and stripped of leading/trailing separators before
    the distance is computed; internal separators still count as edits, so
    "machine-learning" vs "machinelearning" scores 93.75, not 100.
    """
    ka, kb = _strip_key(a), _strip_key(b)
    longest = max(len(ka), len(kb))
    if longest == 0:
        return 100.0
    return 100.0 * (1.0 - levenshtein_distance(ka, kb) / longest)


def normalize_topics(
    raw: list[str],
    featured: list[str],
    threshold: float = DEFAULT_FUZZY_THRESHOLD,
) -> list[str]:
    """Map user topics onto the featured-topic list by best fuzzy match.

    A raw topic maps to the featured topic with the highest ratio when that
    ratio reaches ``threshold``; otherwise it is dropped. The result is
    deduplicated keeping first-occurrence order.
    """
    if not featured:
        raise ValidationError("featured topic list must not be empty")
    out: list[str] = []
    for topic in raw:
        best_topic, best_score = None, -1.0
        for cand in featured:
            score = levenshtein_ratio(topic, cand)
            if score > best_score:
                best_topic, best_score = cand, score
        if best_score >= threshold and best_topic is not None and best_topic not in out:
            out.append(best_topic)
    return out


def load_featured_topics(path=None) -> list[str]:
    """Read the canonical featured-topic list (one topic per line).

    Falls back to the list shipped with the package when ``path`` is None.
    """
    if path is None:
        text = resources.files("repotopical").joinpath("data/featured_topics.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    topics = [line.strip() for line in text.splitlines()]
    return [t for t in topics if t and not t.startswith("#")]


def build_label_matrix(manifest: list[RepoManifestEntry], top_k: int) -> TopicVocabulary:
    """Select the ``top_k`` most frequent featured topics and build labels.

    Topics are ordered by frequency (descending) with lexicographic
    tie-breaks; repositories carrying none of the selected topics are
    excluded, so every retained row has at least one positive.
    """
    if top_k < 1:
        raise ValidationError("top_k must be >= 1")
    counts: dict[str, int] = {}
    for entry in manifest:
        for topic in set(entry.featured_topics):
            counts[topic] = counts.get(topic, 0) + 1
    if len(counts) < top_k:
        raise ValidationError(
            f"only {len(counts)} distinct featured topics available, need {top_k}"
        )
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    topics = [name for name, _ in ranked[:top_k]]
    topic_index = {t: i for i, t in enumerate(topics)}

    rows, repo_ids = [], []
    for entry in manifest:
        row = np.zeros(top_k, dtype=np.int64)
        for topic in entry.featured_topics:
            if topic in topic_index:
                row[topic_index[topic]] = 1
        if row.any():
            rows.append(row)
            repo_ids.append(entry.repo_id)
    if not rows:
        raise ValidationError("no repository carries any of the selected topics")
    return TopicVocabulary(topics=topics, label_matrix=np.stack(rows), repo_ids=repo_ids)


def split_corpus(
    vocab: TopicVocabulary,
    train_fraction: float = 0.7,
    seed: int = 0,
) -> tuple[list[int], list[int], list[int]]:
    """Deterministic (train, validation, test) row-index partition.

    The non-test portion is ``train_fraction`` of the rows; validation is
    carved as the last 20% of that portion (at least one row).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError("train_fraction must be in (0, 1)")
    n = vocab.label_matrix.shape[0]
    order = np.random.default_rng(seed).permutation(n)
    n_pool = int(np.floor(n * train_fraction))
    pool, test = order[:n_pool], order[n_pool:]
    n_val = max(1, int(np.floor(0.2 * n_pool)))
    train, val = pool[: n_pool - n_val], pool[n_pool - n_val :]
    if len(train) == 0 or len(val) == 0 or len(test) == 0:
        raise ValidationError(
            f"empty split for {n} repositories at fraction {train_fraction}: "
            f"train={len(train)}, val={len(val)}, test={len(test)}"
        )
    return sorted(int(i) for i in train), sorted(int(i) for i in val), sorted(int(i) for i in test)


def write_manifest(entries: list[RepoManifestEntry], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(entry.to_json() + "\n")


def read_manifest(path) -> list[RepoManifestEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                entries.append(
                    RepoManifestEntry(
                        repo_id=obj["repo_id"],
                        local_path=obj.get("local_path", ""),
                        raw_topics=list(obj.get("raw_topics", [])),
                        featured_topics=list(obj.get("featured_topics", [])),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad manifest line: {exc}") from exc
    seen = set()
    for entry in entries:
        if not entry.repo_id:
            raise ValidationError("manifest contains an empty repo_id")
        if entry.repo_id in seen:
            raise ValidationError(f"duplicate repo_id in manifest: {entry.repo_id}")
        seen.add(entry.repo_id)
    return entries


def crawl_topic(
    api_base: str,
    topic: str,
    max_repos: int,
    auth_token: str | None = None,
    session=None,
    sleeper=time.sleep,
    max_retries: int = 3,
) -> list[RepoManifestEntry]:
    """Fetch up to ``max_repos`` repositories tagged with ``topic``.

    Talks to a GitHub-style ``/search/repositories`` endpoint and honours
    rate limiting: a 403/429 answer triggers a sleep (``Retry-After`` when
    present) and a retry. ``session`` only needs a ``get`` method, which the
    tests exploit with a recorded fake.
    """
    if max_repos < 1:
        raise ValidationError("max_repos must be >= 1")
    own_session = session is None
    if own_session:
        session = requests.Session()
    headers = {"Accept": "application/vnd.github+json"}
    if auth_token:
        headers["Authorization"] = f"Bearer {auth_token}"

    entries: list[RepoManifestEntry] = []
    page = 1
    try:
        while len(entries) < max_repos:
            per_page = min(100, max_repos - len(entries))
            url = f"{api_base.rstrip('/')}/search/repositories"
            params = {"q": f"topic:{topic}", "per_page": per_page, "page": page}
            resp = _get_with_retry(session, url, params, headers, sleeper, max_retries)
            items = resp.json().get("items", [])
            if not items:
                break
            for item in items:
                entries.append(
                    RepoManifestEntry(
                        repo_id=item["full_name"],
                        raw_topics=list(item.get("topics", [])),
                    )
                )
                if len(entries) >= max_repos:
                    break
            page += 1
    finally:
        if own_session:
            session.close()
    return entries


def _get_with_retry(session, url, params, headers, sleeper, max_retries):
    attempts = 0
    while True:
        try:
            resp = session.get(url, params=params, headers=headers, timeout=30)
        except requests.RequestException as exc:
            attempts += 1
            if attempts > max_retries:
                raise RetriableCrawlError(f"network failure fetching {url}: {exc}") from exc
            sleeper(2.0 * attempts)
            continue
        if resp.status_code == 200:
            return resp
        if resp.status_code in (401,):
            raise FatalCrawlError(f"authentication failed ({resp.status_code}) for {url}")
        if resp.status_code in (403, 429):
            attempts += 1
            if attempts > max_retries:
                raise RetriableCrawlError(f"rate limited too many times fetching {url}")
            sleeper(float(resp.headers.get("Retry-After", 2.0 * attempts)))
            continue
        attempts += 1
        if attempts > max_retries:
            raise RetriableCrawlError(f"HTTP {resp.status_code} fetching {url}")
        sleeper(2.0 * attempts)
