"""TF3D statistical baseline: per-domain term probabilities, the log-ratio
clarity matrix, cosine embedding, and a from-scratch random-forest regressor
for multi-label tagging.
"""

from __future__ import annotations

import ast
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .analyzer import ScriptRecord, module_name_for_path
from .errors import ValidationError
from .serializer import split_name, word_tokens
from .validation import as_binary_matrix, check_fitted

TF3D_DOMAINS = ("code_ast", "docstring", "dependency")
DEFAULT_EPSILON = 1e-6
DEFAULT_TOP_TERMS = 5000

# Fixed syntax-kind list for the code_ast domain.
_AST_KINDS = {
    ast.FunctionDef: "def",
    ast.AsyncFunctionDef: "def",
    ast.ClassDef: "class",
    ast.Call: "call",
    ast.For: "for",
    ast.AsyncFor: "for",
    ast.While: "while",
    ast.If: "if",
    ast.Assign: "assign",
    ast.AugAssign: "assign",
    ast.AnnAssign: "assign",
    ast.Return: "return",
    ast.Try: "try",
    ast.With: "with",
    ast.AsyncWith: "with",
    ast.Raise: "raise",
    ast.Lambda: "lambda",
    ast.ListComp: "comprehension",
    ast.SetComp: "comprehension",
    ast.DictComp: "comprehension",
    ast.GeneratorExp: "comprehension",
    ast.Compare: "compare",
    ast.BoolOp: "boolop",
    ast.Yield: "yield",
    ast.YieldFrom: "yield",
    ast.Await: "await",
    ast.Assert: "assert",
}

_DEF_NODES = (ast.FunctionDef, ast.AsyncFunctionDef)


def _function_ast_counts(fn_node: ast.AST) -> Counter:
    """Syntax-kind counts inside one function, nested defs excluded (they
    are counted on their own)."""
    counts: Counter = Counter({"def": 1})
    stack = [child for child in ast.iter_child_nodes(fn_node)]
    while stack:
        node = stack.pop()
        if isinstance(node, _DEF_NODES):
            continue
        kind = _AST_KINDS.get(type(node))
        if kind is not None:
            counts[kind] += 1
        stack.extend(ast.iter_child_nodes(node))
    return counts


def extract_term_counts(record: ScriptRecord, source: str) -> dict[str, Counter]:
    """Per-domain term counts for one script.

    code_ast: syntax-node kinds per function; docstring: docstring words
    plus split function names; dependency: segments of imported names.
    """
    counts = {domain: Counter() for domain in TF3D_DOMAINS}
    if not record.parse_ok:
        return counts

    try:
        tree = ast.parse(source)
    except Exception:
        return counts
    stack = list(ast.iter_child_nodes(tree))
    while stack:
        node = stack.pop()
        if isinstance(node, _DEF_NODES):
            counts["code_ast"].update(_function_ast_counts(node))
        stack.extend(ast.iter_child_nodes(node))

    module = module_name_for_path(record.path)
    for fn in record.functions:
        local = fn.qualified_name
        if module and local.startswith(module + "."):
            local = local[len(module) + 1 :]
        counts["docstring"].update(split_name(local))
        if fn.docstring:
            counts["docstring"].update(word_tokens(fn.docstring))

    for imp in record.imports:
        counts["dependency"].update(split_name(imp))
    return counts


def merge_counts(per_script: list[dict[str, Counter]]) -> dict[str, Counter]:
    merged = {domain: Counter() for domain in TF3D_DOMAINS}
    for counts in per_script:
        for domain in TF3D_DOMAINS:
            merged[domain].update(counts.get(domain, ()))
    return merged


@dataclass
class TermVocab:
    """Ordered per-domain term lists, built from the training split only."""

    terms: dict[str, list[str]]

    @classmethod
    def fit(cls, repo_counts: list[dict[str, Counter]], top_terms: int = DEFAULT_TOP_TERMS) -> "TermVocab":
        terms: dict[str, list[str]] = {}
        for domain in TF3D_DOMAINS:
            totals: Counter = Counter()
            for counts in repo_counts:
                totals.update(counts.get(domain, ()))
            ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
            terms[domain] = [t for t, _ in ranked[:top_terms]]
        if all(not v for v in terms.values()):
            raise ValidationError("no terms found in any domain")
        return cls(terms=terms)


@dataclass
class RepoTermProfile:
    """Smoothed probability vector per domain; each row sums to 1."""

    S: dict[str, np.ndarray]


def repo_profile(
    counts: dict[str, Counter], vocab: TermVocab, epsilon: float = DEFAULT_EPSILON
) -> RepoTermProfile:
    if epsilon <= 0:
        raise ValidationError("epsilon must be > 0")
    S = {}
    for domain in TF3D_DOMAINS:
        terms = vocab.terms[domain]
        if not terms:
            S[domain] = np.zeros(0)
            continue
        raw = np.array([counts.get(domain, {}).get(t, 0) for t in terms], dtype=np.float64)
        raw += epsilon
        S[domain] = raw / raw.sum()
    return RepoTermProfile(S=S)


@dataclass
class ClarityMatrix:
    """Per (domain, topic) term vector: mean log-probability over in-topic
    repositories divided elementwise by the mean over out-of-topic ones."""

    C: dict[str, np.ndarray]  # domain -> (n_topics, vocab_len)
    epsilon: float
    topics: list[str] = field(default_factory=list)


def fit_clarity(
    profiles: list[RepoTermProfile],
    labels,
    topics: list[str] | None = None,
    epsilon: float = DEFAULT_EPSILON,
) -> ClarityMatrix:
    y = as_binary_matrix(labels, "labels")
    if y.shape[0] != len(profiles):
        raise ValidationError("one label row per profile required")
    n_topics = y.shape[1]
    C: dict[str, np.ndarray] = {}
    for domain in TF3D_DOMAINS:
        logs = np.log(np.stack([p.S[domain] for p in profiles]))
        rows = []
        for t in range(n_topics):
            members = y[:, t] == 1
            if not members.any() or members.all():
                name = topics[t] if topics else str(t)
                raise ValidationError(
                    f"topic {name!r} needs at least one member and one non-member"
                )
            rows.append(logs[members].mean(axis=0) / logs[~members].mean(axis=0))
        C[domain] = np.stack(rows)
    return ClarityMatrix(C=C, epsilon=epsilon, topics=list(topics or []))


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValidationError("cosine of a zero vector")
    return float(a @ b / (na * nb))


def embed_repo(profile: RepoTermProfile, clarity: ClarityMatrix) -> np.ndarray:
    """Cosine similarity of the repo profile against every clarity vector;
    a (3, n_topics) matrix, flattened row-major for the classifier."""
    rows = []
    for domain in TF3D_DOMAINS:
        S = profile.S[domain]
        rows.append([_cosine(S, clarity.C[domain][t]) for t in range(clarity.C[domain].shape[0])])
    return np.asarray(rows, dtype=np.float64)


# Random forest -------------------------------------------------------------


@dataclass
class ForestConfig:
    trees: int = 100
    max_depth: int | None = 12
    min_leaf: int = 2
    feature_frac: str | float = "sqrt"
    seed: int = 0
    bootstrap: bool = True


def _n_split_features(n_features: int, frac) -> int:
    if frac == "sqrt":
        return max(1, int(round(np.sqrt(n_features))))
    if frac == "all":
        return n_features
    return max(1, int(round(float(frac) * n_features)))


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value=None, feature=None, threshold=None, left=None, right=None):
        self.value = value
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right

    def to_dict(self) -> dict:
        if self.value is not None:
            return {"value": [float(v) for v in self.value]}
        return {
            "feature": int(self.feature),
            "threshold": float(self.threshold),
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "_Node":
        if "value" in obj:
            return cls(value=np.asarray(obj["value"], dtype=np.float64))
        return cls(
            feature=obj["feature"],
            threshold=obj["threshold"],
            left=cls.from_dict(obj["left"]),
            right=cls.from_dict(obj["right"]),
        )


def _best_split(X, Y, idx, features, min_leaf):
    """Exact variance-reduction split search; returns (sse, feature,
    threshold) or None when nothing satisfies min_leaf."""
    best = None
    for f in features:
        values = X[idx, f]
        order = np.argsort(values, kind="stable")
        sv, sy = values[order], Y[idx][order]
        cum = np.cumsum(sy, axis=0)
        cum2 = np.cumsum(sy * sy, axis=0)
        total, total2 = cum[-1], cum2[-1]
        m = len(idx)
        for cut in range(min_leaf, m - min_leaf + 1):
            if cut < m and sv[cut - 1] == sv[cut]:
                continue  # cannot split between equal values
            if cut == m:
                continue
            left_n, right_n = cut, m - cut
            left_sum, left_sum2 = cum[cut - 1], cum2[cut - 1]
            right_sum, right_sum2 = total - left_sum, total2 - left_sum2
            sse = float(
                (left_sum2 - left_sum**2 / left_n).sum()
                + (right_sum2 - right_sum**2 / right_n).sum()
            )
            if best is None or sse < best[0] - 1e-12:
                threshold = (sv[cut - 1] + sv[cut]) / 2.0
                best = (sse, f, float(threshold))
    return best


def _grow(X, Y, idx, depth, cfg: ForestConfig, rng: np.random.Generator) -> _Node:
    if (
        len(idx) < 2 * cfg.min_leaf
        or (cfg.max_depth is not None and depth >= cfg.max_depth)
        or np.all(Y[idx] == Y[idx[0]])
    ):
        return _Node(value=Y[idx].mean(axis=0))
    n_features = X.shape[1]
    k = _n_split_features(n_features, cfg.feature_frac)
    features = np.sort(rng.choice(n_features, size=k, replace=False))
    best = _best_split(X, Y, idx, features, cfg.min_leaf)
    if best is None:
        return _Node(value=Y[idx].mean(axis=0))
    _, feature, threshold = best
    left_mask = X[idx, feature] <= threshold
    left_idx, right_idx = idx[left_mask], idx[~left_mask]
    if len(left_idx) < cfg.min_leaf or len(right_idx) < cfg.min_leaf:
        return _Node(value=Y[idx].mean(axis=0))
    return _Node(
        feature=feature,
        threshold=threshold,
        left=_grow(X, Y, left_idx, depth + 1, cfg, rng),
        right=_grow(X, Y, right_idx, depth + 1, cfg, rng),
    )


def _tree_predict(node: _Node, row: np.ndarray) -> np.ndarray:
    while node.value is None:
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.value


@dataclass
class Forest:
    trees: list[_Node]
    n_outputs: int
    config: ForestConfig

    def to_dict(self) -> dict:
        return {
            "n_outputs": self.n_outputs,
            "config": {
                "trees": self.config.trees,
                "max_depth": self.config.max_depth,
                "min_leaf": self.config.min_leaf,
                "feature_frac": self.config.feature_frac,
                "seed": self.config.seed,
                "bootstrap": self.config.bootstrap,
            },
            "trees_": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Forest":
        cfg = ForestConfig(**obj["config"])
        return cls(
            trees=[_Node.from_dict(t) for t in obj["trees_"]],
            n_outputs=obj["n_outputs"],
            config=cfg,
        )


def forest_fit(features, labels, config: ForestConfig | None = None) -> Forest:
    """Bootstrap-aggregated variance-reduction regression trees with
    per-label averaging across trees."""
    cfg = config or ForestConfig()
    X = np.asarray(features, dtype=np.float64)
    Y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValidationError("features and labels must be 2-D with equal rows")
    if X.shape[0] < 2:
        raise ValidationError("need at least 2 training rows")
    trees = []
    for t in range(cfg.trees):
        rng = np.random.default_rng((cfg.seed, t))
        if cfg.bootstrap:
            idx = rng.integers(0, X.shape[0], size=X.shape[0])
        else:
            idx = np.arange(X.shape[0])
        trees.append(_grow(X, Y, idx, 0, cfg, rng))
    return Forest(trees=trees, n_outputs=Y.shape[1], config=cfg)


def forest_predict(forest: Forest, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError("features must be 2-D")
    out = np.zeros((X.shape[0], forest.n_outputs))
    for i, row in enumerate(X):
        acc = np.zeros(forest.n_outputs)
        for tree in forest.trees:
            acc += _tree_predict(tree, row)
        out[i] = acc / len(forest.trees)
    return out


# Estimator facade -----------------------------------------------------------


class TF3DTagger(BaseEstimator):
    """End-to-end TF3D: vocabulary, profiles, clarity, cosine embedding and
    the forest, fitted on training counts only."""

    def __init__(
        self,
        top_terms: int = DEFAULT_TOP_TERMS,
        epsilon: float = DEFAULT_EPSILON,
        trees: int = 100,
        max_depth: int | None = 12,
        min_leaf: int = 2,
        feature_frac="sqrt",
        seed: int = 0,
        bootstrap: bool = True,
    ):
        self.top_terms = top_terms
        self.epsilon = epsilon
        self.trees = trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_frac = feature_frac
        self.seed = seed
        self.bootstrap = bootstrap
        self.vocab_ = None
        self.clarity_ = None
        self.forest_ = None

    def _embed_all(self, repo_counts) -> np.ndarray:
        rows = []
        for counts in repo_counts:
            profile = repo_profile(counts, self.vocab_, self.epsilon)
            rows.append(embed_repo(profile, self.clarity_).ravel())
        return np.stack(rows)

    def fit(self, repo_counts: list[dict[str, Counter]], y, topics: list[str] | None = None):
        y = as_binary_matrix(y, "y")
        self.vocab_ = TermVocab.fit(repo_counts, self.top_terms)
        profiles = [repo_profile(c, self.vocab_, self.epsilon) for c in repo_counts]
        self.clarity_ = fit_clarity(profiles, y, topics=topics, epsilon=self.epsilon)
        features = self._embed_all(repo_counts)
        self.forest_ = forest_fit(
            features,
            y.astype(np.float64),
            ForestConfig(
                trees=self.trees,
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                feature_frac=self.feature_frac,
                seed=self.seed,
                bootstrap=self.bootstrap,
            ),
        )
        return self

    def predict_proba(self, repo_counts) -> np.ndarray:
        check_fitted(self, "forest_")
        scores = forest_predict(self.forest_, self._embed_all(repo_counts))
        return np.clip(scores, 0.0, 1.0)

    def to_dict(self) -> dict:
        check_fitted(self, "forest_")
        return {
            "top_terms": self.top_terms,
            "epsilon": self.epsilon,
            "vocab": self.vocab_.terms,
            "topics": self.clarity_.topics,
            "clarity": {d: self.clarity_.C[d].tolist() for d in TF3D_DOMAINS},
            "forest": self.forest_.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TF3DTagger":
        try:
            tagger = cls(top_terms=obj["top_terms"], epsilon=obj["epsilon"])
            tagger.vocab_ = TermVocab(terms={d: list(obj["vocab"][d]) for d in TF3D_DOMAINS})
            tagger.clarity_ = ClarityMatrix(
                C={d: np.asarray(obj["clarity"][d], dtype=np.float64) for d in TF3D_DOMAINS},
                epsilon=obj["epsilon"],
                topics=list(obj.get("topics", [])),
            )
            tagger.forest_ = Forest.from_dict(obj["forest"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed tf3d model payload: {exc}") from exc
        return tagger

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TF3DTagger":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
