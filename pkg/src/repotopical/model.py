"""The attention tagging head: bidirectional recurrent encoder (GRU default,
LSTM and MLP variants), masked scaled-dot-product attention pooling, and a
linear+sigmoid multi-label classifier, trained end-to-end with decoupled
weight-decay Adam on the built-in gradient tape.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import autodiff as ad
from .autodiff import Tensor, sigmoid_values
from .embedder import RepoTensor
from .errors import RepotopicalError, ValidationError
from .tensorfile import read_tensor_file, write_tensor_file
from .validation import check_fitted

DEFAULT_HIDDEN = 48  # per direction; both directions give the 192 -> 96 mapping
ENCODER_KINDS = ("bigru", "bilstm", "mlp")
REDUCTION_KINDS = ("pca", "linear")

# Finite stand-in for the -inf mask term; exp() of it underflows to exact 0.
MASK_FILL = -1e9


@dataclass
class TrainConfig:
    learning_rate: float = 0.002
    weight_decay: float = 0.01
    batch_size: int = 16
    epochs: int = 50
    seed: int = 0
    encoder_kind: str = "bigru"
    reduction: str = "pca"
    hidden_size: int = DEFAULT_HIDDEN
    reduced_dim: int = 64  # per-domain width produced by the linear reducers
    n_domains: int = 3

    def validate(self) -> "TrainConfig":
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.encoder_kind not in ENCODER_KINDS:
            raise ValidationError(f"encoder_kind must be one of {ENCODER_KINDS}")
        if self.reduction not in REDUCTION_KINDS:
            raise ValidationError(f"reduction must be one of {REDUCTION_KINDS}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        if not isinstance(obj, dict):
            raise ValidationError(f"train config must be an object, got {type(obj).__name__}")
        known = {f for f in cls.__dataclass_fields__}
        try:
            return cls(**{k: v for k, v in obj.items() if k in known}).validate()
        except TypeError as exc:
            raise ValidationError(f"bad train config: {exc}") from exc


@dataclass
class TrainLog:
    epoch_losses: list[float] = field(default_factory=list)
    seed: int = 0


class ModelParams:
    """All trainable tensors plus the AdamW moment buffers."""

    def __init__(self, tensors: dict[str, Tensor], meta: dict):
        self.tensors = tensors
        self.meta = meta
        self.step = 0
        self.adam_m = {n: np.zeros_like(t.value) for n, t in tensors.items()}
        self.adam_v = {n: np.zeros_like(t.value) for n, t in tensors.items()}

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def zero_grad(self) -> None:
        for tensor in self.tensors.values():
            tensor.zero_grad()

    def adamw_step(
        self,
        lr: float,
        weight_decay: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.step += 1
        bias1 = 1.0 - beta1**self.step
        bias2 = 1.0 - beta2**self.step
        for name, tensor in self.tensors.items():
            g = tensor.grad
            if g is None:
                continue
            m, v = self.adam_m[name], self.adam_v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            update = (m / bias1) / (np.sqrt(v / bias2) + eps)
            # Decoupled weight decay: shrink weights outside the Adam update.
            tensor.value -= lr * (update + weight_decay * tensor.value)
            if not np.all(np.isfinite(tensor.value)):
                raise RepotopicalError(f"parameter {name!r} became non-finite")

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: tensor.value.copy() for name, tensor in self.tensors.items()}


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in, fan_out = shape[0], shape[-1]
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def mlp_hidden_width(input_dim: int, hidden_size: int) -> int:
    """Width that gives the MLP roughly the GRU encoder's parameter count."""
    out = 2 * hidden_size
    gru_total = 6 * (input_dim * hidden_size + hidden_size * hidden_size + hidden_size)
    return max(4, round((gru_total - out) / (input_dim + out + 1)))


def init_params(
    input_dim: int,
    n_topics: int,
    config: TrainConfig,
    seed: int | None = None,
) -> ModelParams:
    """Freshly initialized parameters for the configured architecture.

    ``input_dim`` is the width of the rows actually stored in the repo
    tensors: the fused reduced width in PCA mode, the fused raw width in
    linear mode (the trainable per-domain reducers then live here).
    """
    config.validate()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    tensors: dict[str, Tensor] = {}
    meta = {
        "input_dim": int(input_dim),
        "n_topics": int(n_topics),
        "hidden_size": int(config.hidden_size),
        "encoder_kind": config.encoder_kind,
        "reduction": config.reduction,
        "n_domains": int(config.n_domains),
        "reduced_dim": int(config.reduced_dim),
    }

    encoder_input = input_dim
    if config.reduction == "linear":
        if input_dim % config.n_domains != 0:
            raise ValidationError(
                f"input width {input_dim} not divisible into {config.n_domains} domains"
            )
        raw_dim = input_dim // config.n_domains
        meta["raw_dim"] = raw_dim
        # Bias-free so all-zero PAD rows stay exactly zero after reduction.
        for i in range(config.n_domains):
            tensors[f"reduce.{i}"] = Tensor(_glorot(rng, (raw_dim, config.reduced_dim)))
        encoder_input = config.n_domains * config.reduced_dim
    meta["encoder_input"] = encoder_input

    hidden = config.hidden_size
    if config.encoder_kind == "bigru":
        for direction in ("fwd", "bwd"):
            for gate in ("z", "r", "h"):
                tensors[f"{direction}.W_{gate}"] = Tensor(_glorot(rng, (encoder_input, hidden)))
                tensors[f"{direction}.U_{gate}"] = Tensor(_glorot(rng, (hidden, hidden)))
                tensors[f"{direction}.b_{gate}"] = Tensor(np.zeros(hidden))
    elif config.encoder_kind == "bilstm":
        for direction in ("fwd", "bwd"):
            for gate in ("i", "f", "g", "o"):
                tensors[f"{direction}.W_{gate}"] = Tensor(_glorot(rng, (encoder_input, hidden)))
                tensors[f"{direction}.U_{gate}"] = Tensor(_glorot(rng, (hidden, hidden)))
                tensors[f"{direction}.b_{gate}"] = Tensor(np.zeros(hidden))
    else:  # mlp
        width = mlp_hidden_width(encoder_input, hidden)
        meta["mlp_hidden"] = width
        tensors["mlp.W1"] = Tensor(_glorot(rng, (encoder_input, width)))
        tensors["mlp.b1"] = Tensor(np.zeros(width))
        tensors["mlp.W2"] = Tensor(_glorot(rng, (width, 2 * hidden)))
        tensors["mlp.b2"] = Tensor(np.zeros(2 * hidden))

    att_dim = 2 * hidden
    meta["attention_dim"] = att_dim
    tensors["cls.W"] = Tensor(_glorot(rng, (att_dim, n_topics)))
    tensors["cls.b"] = Tensor(np.zeros(n_topics))
    return ModelParams(tensors, meta)


def _gru_step(params: ModelParams, prefix: str, x: Tensor, h: Tensor) -> Tensor:
    z = ad.sigmoid(
        ad.add(
            ad.add(ad.matmul(x, params[f"{prefix}.W_z"]), ad.matmul(h, params[f"{prefix}.U_z"])),
            params[f"{prefix}.b_z"],
        )
    )
    r = ad.sigmoid(
        ad.add(
            ad.add(ad.matmul(x, params[f"{prefix}.W_r"]), ad.matmul(h, params[f"{prefix}.U_r"])),
            params[f"{prefix}.b_r"],
        )
    )
    candidate = ad.tanh(
        ad.add(
            ad.add(
                ad.matmul(x, params[f"{prefix}.W_h"]),
                ad.matmul(ad.mul(r, h), params[f"{prefix}.U_h"]),
            ),
            params[f"{prefix}.b_h"],
        )
    )
    keep = ad.add_const(ad.scale(z, -1.0), 1.0)  # 1 - z
    return ad.add(ad.mul(keep, h), ad.mul(z, candidate))


def _lstm_step(
    params: ModelParams, prefix: str, x: Tensor, h: Tensor, c: Tensor
) -> tuple[Tensor, Tensor]:
    def gate(name, activation):
        return activation(
            ad.add(
                ad.add(
                    ad.matmul(x, params[f"{prefix}.W_{name}"]),
                    ad.matmul(h, params[f"{prefix}.U_{name}"]),
                ),
                params[f"{prefix}.b_{name}"],
            )
        )

    i = gate("i", ad.sigmoid)
    f = gate("f", ad.sigmoid)
    g = gate("g", ad.tanh)
    o = gate("o", ad.sigmoid)
    c_next = ad.add(ad.mul(f, c), ad.mul(i, g))
    return ad.mul(o, ad.tanh(c_next)), c_next


def _mlp_step(params: ModelParams, x: Tensor) -> Tensor:
    hidden = ad.tanh(ad.add(ad.matmul(x, params["mlp.W1"]), params["mlp.b1"]))
    return ad.tanh(ad.add(ad.matmul(hidden, params["mlp.W2"]), params["mlp.b2"]))


def _reduce_linear(params: ModelParams, x: Tensor) -> Tensor:
    raw = params.meta["raw_dim"]
    pieces = [
        ad.matmul(ad.slice_cols(x, i * raw, (i + 1) * raw), params[f"reduce.{i}"])
        for i in range(params.meta["n_domains"])
    ]
    return ad.concat(pieces, axis=-1)


def _encode_tape(
    params: ModelParams, xs: list[Tensor], mask: np.ndarray
) -> tuple[list[Tensor], Tensor]:
    """Per-position encodings y_t and the sequence summary h_n.

    The recurrent variants consume PAD rows like any other input (only the
    attention masks them out); the MLP variant has no recurrence, so h_n is
    taken at the last real position of each row.
    """
    kind = params.meta["encoder_kind"]
    n = len(xs)
    batch_shape = xs[0].value.shape[:-1]
    hidden = params.meta["hidden_size"]
    zeros = np.zeros(batch_shape + (hidden,))

    if kind == "bigru":
        forward, h = [], ad.constant(zeros)
        for t in range(n):
            h = _gru_step(params, "fwd", xs[t], h)
            forward.append(h)
        backward: list[Tensor | None] = [None] * n
        h = ad.constant(zeros)
        for t in reversed(range(n)):
            h = _gru_step(params, "bwd", xs[t], h)
            backward[t] = h
        ys = [ad.concat([forward[t], backward[t]], axis=-1) for t in range(n)]
        return ys, ad.concat([forward[-1], backward[0]], axis=-1)

    if kind == "bilstm":
        forward, h, c = [], ad.constant(zeros), ad.constant(zeros)
        for t in range(n):
            h, c = _lstm_step(params, "fwd", xs[t], h, c)
            forward.append(h)
        backward = [None] * n
        h, c = ad.constant(zeros), ad.constant(zeros)
        for t in reversed(range(n)):
            h, c = _lstm_step(params, "bwd", xs[t], h, c)
            backward[t] = h
        ys = [ad.concat([forward[t], backward[t]], axis=-1) for t in range(n)]
        return ys, ad.concat([forward[-1], backward[0]], axis=-1)

    ys = [_mlp_step(params, x) for x in xs]
    last_real = np.array([int(np.max(np.nonzero(row)[0])) for row in mask])
    return ys, ad.gather_time(ys, last_real)


def _attention_tape(
    ys: list[Tensor], h_n: Tensor, mask: np.ndarray
) -> tuple[Tensor, Tensor]:
    """Masked scaled dot-product attention with h_n as query and the
    per-position encodings as keys and values. Returns (pooled, weights)."""
    d_k = ys[0].value.shape[-1]
    cols = [ad.reduce_sum(ad.mul(h_n, y_t), axis=-1) for y_t in ys]
    scores = ad.scale(ad.stack_cols(cols), 1.0 / math.sqrt(d_k))
    scores = ad.masked_fill(scores, mask, MASK_FILL)
    weights = ad.softmax(scores, axis=-1)
    pooled = None
    for t, y_t in enumerate(ys):
        w_t = ad.slice_cols(weights, t, t + 1)
        term = ad.mul(w_t, y_t)
        pooled = term if pooled is None else ad.add(pooled, term)
    return pooled, weights


def _classifier_tape(params: ModelParams, pooled: Tensor) -> Tensor:
    return ad.add(ad.matmul(pooled, params["cls.W"]), params["cls.b"])


def _forward_pooled(params: ModelParams, x: np.ndarray, mask: np.ndarray) -> Tensor:
    x = np.asarray(x, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if x.ndim != 3:
        raise ValidationError(f"expected batch of shape (B, n, width), got {x.shape}")
    if not mask.any(axis=1).all():
        raise ValidationError("every repository needs at least one real script")
    xs = [ad.constant(x[:, t, :]) for t in range(x.shape[1])]
    if params.meta["reduction"] == "linear":
        xs = [_reduce_linear(params, x_t) for x_t in xs]
    ys, h_n = _encode_tape(params, xs, mask)
    pooled, _ = _attention_tape(ys, h_n, mask)
    return pooled


def forward_logits(params: ModelParams, x: np.ndarray, mask: np.ndarray) -> Tensor:
    """Tape from a batch (B, n, width) with mask (B, n) to logits (B, n_T)."""
    return _classifier_tape(params, _forward_pooled(params, x, mask))


def pooled_vectors(params: ModelParams, dataset: list[RepoTensor]) -> np.ndarray:
    """Attention-pooled repository vectors (the classifier's input)."""
    x = np.stack([t.x for t in dataset])
    mask = np.stack([np.asarray(t.mask, dtype=bool) for t in dataset])
    return _forward_pooled(params, x, mask).value


def batch_loss(params: ModelParams, x: np.ndarray, mask: np.ndarray, labels: np.ndarray) -> Tensor:
    """Mean over examples of the per-topic-summed binary cross-entropy."""
    logits = forward_logits(params, x, mask)
    per_label = ad.bce_with_logits(logits, np.asarray(labels, dtype=np.float64))
    per_example = ad.reduce_sum(per_label, axis=-1)
    return ad.reduce_mean(per_example)


# Spec-level single-example operations ------------------------------------

def gru_cell(x_t, h_prev, params: ModelParams, direction: str = "fwd") -> np.ndarray:
    """One GRU step on plain vectors: (1-z) * h_prev + z * candidate."""
    return _gru_step(params, direction, ad.constant(x_t), ad.constant(h_prev)).value


def encode_sequence(
    tensor, params: ModelParams, kind: str | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Encode one repository: y (n, 2H) and the summary state h_n (2H,)."""
    if kind is not None and kind != params.meta["encoder_kind"]:
        raise ValidationError(
            f"params were built for {params.meta['encoder_kind']!r}, not {kind!r}"
        )
    x, mask = _coerce_single(tensor)
    xs = [ad.constant(x[None, t, :]) for t in range(x.shape[0])]
    if params.meta["reduction"] == "linear":
        xs = [_reduce_linear(params, x_t) for x_t in xs]
    ys, h_n = _encode_tape(params, xs, mask[None, :])
    y = np.stack([y_t.value[0] for y_t in ys])
    return y, h_n.value[0]


def masked_attention(
    y: np.ndarray, h_n: np.ndarray, mask, return_weights: bool = False
):
    """Attention pooling over (n, d_k) encodings; PAD positions get exactly
    zero weight and cannot influence the output."""
    y = np.asarray(y, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValidationError("attention mask must have at least one real position")
    ys = [ad.constant(y[None, t, :]) for t in range(y.shape[0])]
    pooled, weights = _attention_tape(ys, ad.constant(np.asarray(h_n)[None, :]), mask[None, :])
    if return_weights:
        return pooled.value[0], weights.value[0]
    return pooled.value[0]


def classify(repo_vec: np.ndarray, params: ModelParams) -> np.ndarray:
    """Per-topic sigmoid scores for one pooled repository vector."""
    logits = np.asarray(repo_vec, dtype=np.float64) @ params["cls.W"].value + params["cls.b"].value
    return sigmoid_values(logits)


def _coerce_single(tensor) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(tensor, RepoTensor):
        return tensor.x, np.asarray(tensor.mask, dtype=bool)
    x = np.asarray(tensor, dtype=np.float64)
    return x, np.ones(x.shape[0], dtype=bool)


# Training ------------------------------------------------------------------

def stack_dataset(dataset: list[RepoTensor]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not dataset:
        raise ValidationError("empty training dataset")
    n, width = dataset[0].n, dataset[0].width
    for t in dataset:
        if t.n != n or t.width != width:
            raise ValidationError(
                f"tensor {t.repo_id!r} has shape ({t.n}, {t.width}), expected ({n}, {width})"
            )
        if t.labels is None:
            raise ValidationError(f"tensor {t.repo_id!r} is missing labels")
    x = np.stack([t.x for t in dataset])
    mask = np.stack([np.asarray(t.mask, dtype=bool) for t in dataset])
    labels = np.stack([t.labels for t in dataset])
    return x, mask, labels


def train(
    dataset: list[RepoTensor],
    config: TrainConfig,
    params: ModelParams | None = None,
) -> tuple[ModelParams, TrainLog]:
    """Mini-batch AdamW over summed binary cross-entropy.

    Deterministic for a fixed seed: initialization, the per-epoch shuffle
    and the batch reduction order are all fixed by ``config.seed``.
    """
    config.validate()
    x, mask, labels = stack_dataset(dataset)
    if params is None:
        params = init_params(x.shape[2], labels.shape[1], config)
    log = TrainLog(seed=config.seed)
    rng = np.random.default_rng((config.seed, 0x7261696E))
    total = x.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(total)
        for start in range(0, total, config.batch_size):
            idx = order[start : start + config.batch_size]
            params.zero_grad()
            loss = batch_loss(params, x[idx], mask[idx], labels[idx])
            if not np.isfinite(loss.value):
                raise RepotopicalError(
                    f"loss became non-finite at epoch {epoch}; "
                    f"try a learning rate below {config.learning_rate}"
                )
            loss.backward()
            params.adamw_step(config.learning_rate, config.weight_decay)
        epoch_loss = float(batch_loss(params, x, mask, labels).value)
        log.epoch_losses.append(epoch_loss)
    return params, log


def predict_scores(params: ModelParams, dataset: list[RepoTensor]) -> np.ndarray:
    x = np.stack([t.x for t in dataset])
    mask = np.stack([np.asarray(t.mask, dtype=bool) for t in dataset])
    logits = forward_logits(params, x, mask)
    return sigmoid_values(logits.value)


# Aggregation baselines ------------------------------------------------------

def aggregate_vectors(
    vectors,
    mode: str,
    params: ModelParams | None = None,
    max_count: int | None = None,
) -> np.ndarray:
    """Pool a variable-length list of equal-width vectors into one vector.

    mean: arithmetic mean. concat: fixed-order concatenation zero-padded or
    truncated to ``max_count`` slots. attention: the encoder plus masked
    attention over the list (requires ``params`` built for that width).
    """
    rows = [np.asarray(v, dtype=np.float64) for v in vectors]
    if not rows:
        raise ValidationError("cannot aggregate an empty vector list")
    stacked = np.stack(rows)
    if mode == "mean":
        return stacked.mean(axis=0)
    if mode == "concat":
        count = max_count if max_count is not None else len(rows)
        width = stacked.shape[1]
        out = np.zeros(count * width)
        flat = stacked[:count].ravel()
        out[: flat.size] = flat
        return out
    if mode == "attention":
        if params is None:
            raise ValidationError("attention aggregation requires model params")
        y, h_n = encode_sequence(stacked, params)
        return masked_attention(y, h_n, np.ones(len(rows), dtype=bool))
    raise ValidationError(f"unknown aggregation mode {mode!r}")


# Checkpoints ----------------------------------------------------------------

def save_checkpoint(params: ModelParams, path) -> None:
    """Versioned binary checkpoint: meta echo plus f32 row-major tensors."""
    config = {"meta": params.meta, "step": params.step}
    tensors = {n: t.value.astype(np.float32) for n, t in params.tensors.items()}
    write_tensor_file(path, config, tensors)


def load_checkpoint(path) -> ModelParams:
    config, tensors = read_tensor_file(path)
    try:
        meta = config["meta"]
        step = int(config.get("step", 0))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed checkpoint config: {exc}") from exc
    params = ModelParams(
        {n: Tensor(arr.astype(np.float64)) for n, arr in tensors.items()}, meta
    )
    params.step = step
    return params


# Estimators -----------------------------------------------------------------

class TopicalClassifier(BaseEstimator):
    """Scikit-learn style front door for the attention tagger.

    ``fit`` consumes a list of RepoTensor (labels attached or passed as
    ``y``); ``predict_proba`` returns per-topic sigmoid scores. Per-topic
    decision thresholds default to 0.5 and can be replaced with optimized
    ones via ``set_thresholds``.
    """

    def __init__(
        self,
        learning_rate: float = 0.002,
        weight_decay: float = 0.01,
        batch_size: int = 16,
        epochs: int = 50,
        seed: int = 0,
        encoder_kind: str = "bigru",
        reduction: str = "pca",
        hidden_size: int = DEFAULT_HIDDEN,
        reduced_dim: int = 64,
        n_domains: int = 3,
    ):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.encoder_kind = encoder_kind
        self.reduction = reduction
        self.hidden_size = hidden_size
        self.reduced_dim = reduced_dim
        self.n_domains = n_domains
        self.params_ = None
        self.log_ = None
        self.thresholds_ = None

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            encoder_kind=self.encoder_kind,
            reduction=self.reduction,
            hidden_size=self.hidden_size,
            reduced_dim=self.reduced_dim,
            n_domains=self.n_domains,
        ).validate()

    def fit(self, X: list[RepoTensor], y=None):
        dataset = X
        if y is not None:
            y = np.asarray(y, dtype=np.int64)
            dataset = [
                RepoTensor(t.x, t.mask, labels=y[i], repo_id=t.repo_id, paths=t.paths)
                for i, t in enumerate(X)
            ]
        self.params_, self.log_ = train(dataset, self._config())
        self.thresholds_ = np.full(self.params_.meta["n_topics"], 0.5)
        return self

    def predict_proba(self, X: list[RepoTensor]) -> np.ndarray:
        check_fitted(self, "params_")
        return predict_scores(self.params_, X)

    def set_thresholds(self, thresholds) -> "TopicalClassifier":
        check_fitted(self, "params_")
        thresholds = np.asarray(thresholds, dtype=np.float64)
        if thresholds.shape != (self.params_.meta["n_topics"],):
            raise ValidationError("threshold vector shape mismatch")
        self.thresholds_ = thresholds
        return self

    def predict(self, X: list[RepoTensor]) -> np.ndarray:
        return (self.predict_proba(X) >= self.thresholds_).astype(np.int64)


class LinearHeadClassifier(BaseEstimator):
    """Linear+sigmoid head over fixed-width pooled vectors; the trainable
    half of the mean/concat aggregation baselines."""

    def __init__(
        self,
        learning_rate: float = 0.002,
        weight_decay: float = 0.01,
        batch_size: int = 16,
        epochs: int = 50,
        seed: int = 0,
    ):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.weights_ = None

    def fit(self, X, y):
        x = np.asarray(X, dtype=np.float64)
        labels = np.asarray(y, dtype=np.float64)
        if x.ndim != 2 or labels.ndim != 2 or x.shape[0] != labels.shape[0]:
            raise ValidationError("LinearHeadClassifier expects 2-D X and y with equal rows")
        rng = np.random.default_rng((self.seed, 0x68656164))
        tensors = {
            "W": Tensor(_glorot(rng, (x.shape[1], labels.shape[1]))),
            "b": Tensor(np.zeros(labels.shape[1])),
        }
        params = ModelParams(tensors, {"kind": "linear-head"})
        for _ in range(self.epochs):
            order = rng.permutation(x.shape[0])
            for start in range(0, x.shape[0], self.batch_size):
                idx = order[start : start + self.batch_size]
                params.zero_grad()
                logits = ad.add(ad.matmul(ad.constant(x[idx]), params["W"]), params["b"])
                per_label = ad.bce_with_logits(logits, labels[idx])
                loss = ad.reduce_mean(ad.reduce_sum(per_label, axis=-1))
                if not np.isfinite(loss.value):
                    raise RepotopicalError("linear head loss became non-finite")
                loss.backward()
                params.adamw_step(self.learning_rate, self.weight_decay)
        self.weights_ = (params["W"].value.copy(), params["b"].value.copy())
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_fitted(self, "weights_")
        w, b = self.weights_
        logits = np.asarray(X, dtype=np.float64) @ w + b
        return sigmoid_values(logits)
