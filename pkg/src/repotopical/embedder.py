"""Script embedding providers, per-domain PCA reduction, and assembly of the
padded repository tensors consumed by the model.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ValidationError
from .graphkit import PAD, ScriptSample
from .serializer import DOMAINS, TokenSequence
from .validation import as_float_matrix, check_fitted

DEFAULT_DIM = 768
DEFAULT_REDUCED_DIM = 64

WIRE_FORMAT = "topical-emb"
WIRE_VERSION = 1


@dataclass
class ScriptEmbedding:
    path: str
    domain: str
    vector: np.ndarray


class HashingEmbedder(BaseEstimator, TransformerMixin):
    """Signed feature hashing of token sequences into a fixed-width vector.

    Bag-of-tokens by design: each token contributes +-1 at a hashed index
    and the result is L2 normalized. Deterministic for (tokens, width,
    seed); no fitting involved.
    """

    def __init__(self, width: int = DEFAULT_DIM, seed: int = 0):
        self.width = width
        self.seed = seed
        self._cache: dict[str, tuple[int, float]] = {}

    def fit(self, X=None, y=None):
        return self

    def _slot(self, token: str) -> tuple[int, float]:
        slot = self._cache.get(token)
        if slot is None:
            digest = hashlib.blake2b(
                f"{self.seed}|{token}".encode("utf-8"), digest_size=8
            ).digest()
            value = int.from_bytes(digest, "little")
            slot = ((value >> 1) % self.width, 1.0 if value & 1 else -1.0)
            self._cache[token] = slot
        return slot

    def embed(self, seq: TokenSequence) -> np.ndarray:
        if self.width < 1:
            raise ValidationError("hash width must be >= 1")
        vec = np.zeros(self.width, dtype=np.float64)
        for token in seq.tokens:
            index, sign = self._slot(token)
            vec[index] += sign
        norm = np.linalg.norm(vec)
        if norm > 0.0:
            vec /= norm
        return vec

    def transform(self, X: list[tuple[str, TokenSequence]]) -> list[ScriptEmbedding]:
        return [
            ScriptEmbedding(path=path, domain=seq.domain, vector=self.embed(seq))
            for path, seq in X
        ]


def hash_embed(seq: TokenSequence, width: int, seed: int = 0) -> np.ndarray:
    return HashingEmbedder(width=width, seed=seed).embed(seq)


class EmbeddingStore:
    """Embeddings keyed by (path, domain), all of one width."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValidationError("embedding dim must be >= 1")
        self.dim = dim
        self._data: dict[tuple[str, str], np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._data)

    def add(self, path: str, domain: str, vector, where: str = "") -> None:
        vec = np.asarray(vector, dtype=np.float64)
        suffix = f" ({where})" if where else ""
        if vec.ndim != 1 or vec.shape[0] != self.dim:
            raise ValidationError(
                f"vector for ({path}, {domain}) has width {vec.shape}, expected {self.dim}{suffix}"
            )
        if not np.all(np.isfinite(vec)):
            raise ValidationError(f"non-finite vector for ({path}, {domain}){suffix}")
        key = (path, domain)
        if key in self._data:
            raise ValidationError(f"duplicate embedding key ({path}, {domain}){suffix}")
        self._data[key] = vec

    def get(self, path: str, domain: str) -> np.ndarray:
        try:
            return self._data[(path, domain)]
        except KeyError:
            raise ValidationError(f"missing embedding for ({path}, {domain})") from None

    def has(self, path: str, domain: str) -> bool:
        return (path, domain) in self._data

    def items(self):
        return self._data.items()

    def matrix(self, domain: str, paths: list[str] | None = None) -> np.ndarray:
        """Stack vectors of one domain, optionally restricted to ``paths``."""
        if paths is None:
            rows = [v for (p, d), v in sorted(self._data.items()) if d == domain]
        else:
            rows = [self.get(p, domain) for p in paths]
        if not rows:
            raise ValidationError(f"no embeddings stored for domain {domain!r}")
        return np.stack(rows)


def save_embeddings(store: EmbeddingStore, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps({"format": WIRE_FORMAT, "version": WIRE_VERSION, "dim": store.dim})
            + "\n"
        )
        for (script_path, domain), vec in sorted(store.items()):
            fh.write(
                json.dumps(
                    {"path": script_path, "domain": domain, "vector": [float(x) for x in vec]}
                )
                + "\n"
            )


def load_embeddings(path) -> EmbeddingStore:
    """Read the embedding wire format, validating width uniformity,
    finiteness and key uniqueness. Errors carry the offending line number."""
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:1: bad header: {exc}") from exc
        if not isinstance(header, dict) or header.get("format") != WIRE_FORMAT:
            raise ValidationError(f"{path}:1: not a {WIRE_FORMAT} file")
        if header.get("version") != WIRE_VERSION:
            raise ValidationError(f"{path}:1: unsupported version {header.get('version')}")
        dim = header.get("dim")
        if not isinstance(dim, int) or dim < 1:
            raise ValidationError(f"{path}:1: bad dim {dim!r}")
        store = EmbeddingStore(dim)
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                script_path, domain, vector = obj["path"], obj["domain"], obj["vector"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{path}:{lineno}: malformed record: {exc}") from exc
            if domain not in DOMAINS:
                raise ValidationError(f"{path}:{lineno}: unknown domain {domain!r}")
            store.add(script_path, domain, vector, where=f"{path}:{lineno}")
    return store


class PcaReducer(BaseEstimator, TransformerMixin):
    """Principal component reduction fitted by singular value decomposition.

    Components are orthonormal rows ordered by non-increasing explained
    variance, each flipped so its largest-magnitude entry is positive.
    """

    def __init__(self, k: int = DEFAULT_REDUCED_DIM):
        self.k = k
        self.mean_ = None
        self.components_ = None
        self.explained_variance_ = None

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        m, d = X.shape
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if self.k > d:
            raise ValidationError(f"k={self.k} exceeds input width {d}")
        if m < self.k:
            raise ValidationError(f"need at least k={self.k} vectors, got {m}")
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        tol = s[0] * max(m, d) * np.finfo(np.float64).eps if s.size else 0.0
        rank = int(np.sum(s > tol))
        if self.k > rank:
            raise ValidationError(
                f"k={self.k} exceeds data rank; achievable rank is {rank}"
            )
        components = vt[: self.k].copy()
        for row in components:
            pivot = np.argmax(np.abs(row))
            if row[pivot] < 0:
                row *= -1.0
        self.components_ = components
        self.explained_variance_ = (s[: self.k] ** 2) / (m - 1) if m > 1 else s[: self.k] ** 2
        return self

    def transform(self, X) -> np.ndarray:
        check_fitted(self, "components_")
        arr = np.asarray(X, dtype=np.float64)
        return (arr - self.mean_) @ self.components_.T

    def inverse_transform(self, Z) -> np.ndarray:
        check_fitted(self, "components_")
        return np.asarray(Z, dtype=np.float64) @ self.components_ + self.mean_


def fit_pca(vectors, k: int) -> PcaReducer:
    return PcaReducer(k=k).fit(np.asarray(vectors, dtype=np.float64))


@dataclass
class RepoTensor:
    """Fixed-length sequence of fused per-script embeddings plus mask."""

    x: np.ndarray  # (n, width), PAD rows exactly zero
    mask: np.ndarray  # (n,) bool, True = real script
    labels: np.ndarray | None = None
    repo_id: str = ""
    paths: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def width(self) -> int:
        return self.x.shape[1]

    def to_dict(self) -> dict:
        out = {
            "repo_id": self.repo_id,
            "paths": self.paths,
            "mask": [bool(m) for m in self.mask],
            "x": [[float(v) for v in row] for row in self.x],
        }
        if self.labels is not None:
            out["labels"] = [int(v) for v in self.labels]
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "RepoTensor":
        try:
            labels = obj.get("labels")
            return cls(
                x=np.asarray(obj["x"], dtype=np.float64),
                mask=np.asarray(obj["mask"], dtype=bool),
                labels=None if labels is None else np.asarray(labels, dtype=np.int64),
                repo_id=obj.get("repo_id", ""),
                paths=list(obj.get("paths", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed repo tensor payload: {exc}") from exc


def assemble_repo_tensor(
    sample: ScriptSample,
    store: EmbeddingStore,
    reducers: dict[str, PcaReducer] | None,
    domains: tuple[str, ...] = DOMAINS,
    labels=None,
    repo_id: str = "",
) -> RepoTensor:
    """Fuse per-domain script embeddings into the padded (n, width) tensor.

    With ``reducers`` each domain is PCA-reduced before concatenation; with
    ``reducers=None`` the raw vectors are concatenated (the trainable linear
    reduction then lives inside the model). PAD rows are exactly zero.
    """
    if not domains:
        raise ValidationError("at least one domain required")
    widths = []
    for domain in domains:
        if reducers is not None:
            reducer = reducers.get(domain)
            if reducer is None:
                raise ValidationError(f"no reducer fitted for domain {domain!r}")
            check_fitted(reducer, "components_")
            widths.append(reducer.k)
        else:
            widths.append(store.dim)
    width = int(sum(widths))

    rows = np.zeros((sample.n, width), dtype=np.float64)
    mask = np.zeros(sample.n, dtype=bool)
    for i, path in enumerate(sample.paths):
        if path == PAD:
            continue
        pieces = []
        for domain in domains:
            vec = store.get(path, domain)
            if reducers is not None:
                vec = reducers[domain].transform(vec)
            pieces.append(np.asarray(vec, dtype=np.float64).ravel())
        rows[i] = np.concatenate(pieces)
        mask[i] = True
    if not mask.any():
        raise ValidationError("repository tensor has no real scripts")
    return RepoTensor(
        x=rows,
        mask=mask,
        labels=None if labels is None else np.asarray(labels, dtype=np.int64),
        repo_id=repo_id,
        paths=list(sample.paths),
    )


def write_repo_tensor(tensor: RepoTensor, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tensor.to_dict(), fh)
        fh.write("\n")


def read_repo_tensor(path) -> RepoTensor:
    with open(path, encoding="utf-8") as fh:
        return RepoTensor.from_dict(json.load(fh))
