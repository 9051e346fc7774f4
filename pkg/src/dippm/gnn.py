"""Graph network that regresses latency (ms), memory (MB), and energy (J).

Architecture: three message-passing blocks with separate self/neighbor
transforms and mean aggregation over predecessors,

    H_out[v] = relu(H_in[v] @ W_self + mean_{u -> v} H_in[u] @ W_neigh + bias)

followed by a mean readout over nodes, concatenation with the normalized
5-wide static feature vector, and three fully connected blocks (ReLU and
dropout after the first two, linear 3-wide output). An MLP baseline shares
the FC stack but sees only the static features.

Gradients are exact reverse-mode derivatives written out by hand; the test
suite checks them against central finite differences. Training runs one Adam
step per record on the Huber loss over z-scored targets, with normalizers
fitted on the training split only. Everything is deterministic given the
config seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar

import numpy as np

from . import numerics
from .dataset import DatasetRecord, TargetVector
from .errors import (
    EmptyDataset,
    EmptyGraph,
    IoFailure,
    NonFinite,
    ShapeMismatch,
    VersionMismatch,
)
from .featurize import FEATURE_WIDTH, STATIC_WIDTH, VOCAB_VERSION, GraphEncoding, StaticFeatures

DEFAULT_HIDDEN = 512
DEFAULT_DROPOUT = 0.05


@dataclass
class SageLayerParams:
    w_self: np.ndarray   # (d_in, d_out)
    w_neigh: np.ndarray  # (d_in, d_out)
    bias: np.ndarray     # (d_out,)


@dataclass
class AffineParams:
    w: np.ndarray  # (d_in, d_out)
    b: np.ndarray  # (d_out,)


@dataclass
class Normalizer:
    """Z-score statistics for targets and static features.

    Standard deviations below 1e-9 (constant columns) are replaced by 1 so
    normalization stays finite.
    """

    y_mean: np.ndarray
    y_std: np.ndarray
    fs_mean: np.ndarray
    fs_std: np.ndarray

    @classmethod
    def identity(cls) -> "Normalizer":
        return cls(np.zeros(3), np.ones(3), np.zeros(STATIC_WIDTH), np.ones(STATIC_WIDTH))

    @classmethod
    def fit(cls, targets: np.ndarray, statics: np.ndarray) -> "Normalizer":
        def clamp(std):
            std = std.copy()
            std[std < 1e-9] = 1.0
            return std

        return cls(
            y_mean=targets.mean(axis=0),
            y_std=clamp(targets.std(axis=0)),
            fs_mean=statics.mean(axis=0),
            fs_std=clamp(statics.std(axis=0)),
        )

    def normalize_y(self, y: np.ndarray) -> np.ndarray:
        return (y - self.y_mean) / self.y_std

    def denormalize_y(self, y: np.ndarray) -> np.ndarray:
        return y * self.y_std + self.y_mean

    def normalize_fs(self, fs: np.ndarray) -> np.ndarray:
        return (fs - self.fs_mean) / self.fs_std


@dataclass
class TrainConfig:
    epochs: int
    lr: float = numerics.DEFAULT_LEARNING_RATE
    seed: int = 0
    hidden: int = DEFAULT_HIDDEN
    huber_delta: float = 1.0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.hidden < 1:
            raise ValueError(f"hidden width must be >= 1, got {self.hidden}")
        if self.huber_delta <= 0:
            raise ValueError(f"huber delta must be positive, got {self.huber_delta}")


@dataclass
class _Prepared:
    """Per-record arrays the training loop reuses every epoch."""

    features: np.ndarray       # (N, 32)
    agg: np.ndarray            # (N, N) mean-aggregation matrix: agg[v, u] = 1/indeg(v) per edge u->v
    fs_raw: np.ndarray         # (5,) log1p static features
    y_raw: np.ndarray | None   # (3,) original-unit targets, None at predict time


def _aggregation_matrix(num_nodes: int, edges) -> np.ndarray:
    agg = np.zeros((num_nodes, num_nodes), dtype=np.float64)
    deg = np.zeros(num_nodes, dtype=np.float64)
    for _, dst in edges:
        deg[dst] += 1.0
    for src, dst in edges:
        agg[dst, src] = 1.0 / deg[dst]
    return agg


def _prepare_encoding(encoding: GraphEncoding, fs: StaticFeatures, target: TargetVector | None = None) -> _Prepared:
    if encoding.num_nodes < 1:
        raise EmptyGraph("encoding has no nodes")
    if encoding.features.shape != (encoding.num_nodes, FEATURE_WIDTH):
        raise ShapeMismatch(f"feature matrix {encoding.features.shape} does not match {encoding.num_nodes} nodes")
    return _Prepared(
        features=np.asarray(encoding.features, dtype=np.float64),
        agg=_aggregation_matrix(encoding.num_nodes, encoding.edges),
        fs_raw=fs.as_vector,
        y_raw=None if target is None else target.as_array,
    )


def _prepare_record(record: DatasetRecord) -> _Prepared:
    return _prepare_encoding(record.encoding, record.fs, record.target)


def _neighbor_mean(h: np.ndarray, prep: _Prepared) -> np.ndarray:
    return prep.agg @ h


def _scatter_neighbor_grad(g: np.ndarray, prep: _Prepared) -> np.ndarray:
    return prep.agg.T @ g


# ---------------------------------------------------------------------------
# models


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    std = math.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=(fan_in, fan_out))


def _fc_stack(rng: np.random.Generator, dims: list[tuple[int, int]]) -> list[AffineParams]:
    return [AffineParams(w=_glorot(rng, di, do), b=np.zeros(do)) for di, do in dims]


@dataclass
class DippmModel:
    """Trained weights of the graph network plus its normalizers."""

    sage: list[SageLayerParams]
    fc: list[AffineParams]
    dropout_p: float
    normalizer: Normalizer
    hidden: int
    vocab_version: str = VOCAB_VERSION

    arch: ClassVar[str] = "sage"

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        items = []
        for i, layer in enumerate(self.sage, start=1):
            items.append((f"sage{i}.w_self", layer.w_self))
            items.append((f"sage{i}.w_neigh", layer.w_neigh))
            items.append((f"sage{i}.bias", layer.bias))
        for i, layer in enumerate(self.fc, start=1):
            items.append((f"fc{i}.w", layer.w))
            items.append((f"fc{i}.b", layer.b))
        return items

    def _embed(self, prep: _Prepared):
        h = prep.features
        caches = []
        for layer in self.sage:
            m = _neighbor_mean(h, prep)
            z = h @ layer.w_self + m @ layer.w_neigh + layer.bias
            caches.append((h, m, z))
            h = np.maximum(z, 0.0)
        return h, caches

    def forward_norm(self, prep: _Prepared, fs_norm: np.ndarray, train: bool = False, rng=None):
        h, sage_cache = self._embed(prep)
        r = h.mean(axis=0)
        u = np.concatenate([r, fs_norm])
        out, fc_cache = _fc_forward(self.fc, u, self.dropout_p, train, rng)
        return out, (prep, sage_cache, h.shape[0], fc_cache)

    def backward_from(self, cache, dout: np.ndarray) -> dict[str, np.ndarray]:
        prep, sage_cache, n_nodes, fc_cache = cache
        grads: dict[str, np.ndarray] = {}
        du = _fc_backward(self.fc, fc_cache, dout, grads)
        dr = du[: self.hidden]
        dh = np.tile(dr / n_nodes, (n_nodes, 1))
        for i in range(len(self.sage) - 1, -1, -1):
            h_in, m, z = sage_cache[i]
            dz = dh * (z > 0.0)
            grads[f"sage{i + 1}.w_self"] = h_in.T @ dz
            grads[f"sage{i + 1}.w_neigh"] = m.T @ dz
            grads[f"sage{i + 1}.bias"] = dz.sum(axis=0)
            layer = self.sage[i]
            dh = dz @ layer.w_self.T + _scatter_neighbor_grad(dz @ layer.w_neigh.T, prep)
        return grads


@dataclass
class MlpModel:
    """Baseline that regresses from the static features alone."""

    fc: list[AffineParams]
    dropout_p: float
    normalizer: Normalizer
    hidden: int
    vocab_version: str = VOCAB_VERSION

    arch: ClassVar[str] = "mlp"

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        items = []
        for i, layer in enumerate(self.fc, start=1):
            items.append((f"fc{i}.w", layer.w))
            items.append((f"fc{i}.b", layer.b))
        return items

    def forward_norm(self, prep: _Prepared, fs_norm: np.ndarray, train: bool = False, rng=None):
        out, fc_cache = _fc_forward(self.fc, fs_norm, self.dropout_p, train, rng)
        return out, fc_cache

    def backward_from(self, cache, dout: np.ndarray) -> dict[str, np.ndarray]:
        grads: dict[str, np.ndarray] = {}
        _fc_backward(self.fc, cache, dout, grads)
        return grads


def _fc_forward(fc: list[AffineParams], u: np.ndarray, dropout_p: float, train: bool, rng):
    cache = []
    x = u
    last = len(fc) - 1
    for i, layer in enumerate(fc):
        a = x @ layer.w + layer.b
        if i == last:
            cache.append((x, a, None))
            x = a
            continue
        h = np.maximum(a, 0.0)
        mask = None
        if train and dropout_p > 0.0:
            if rng is None:
                raise ValueError("training-mode forward needs an rng for dropout")
            mask = numerics.dropout_mask(h.shape, dropout_p, rng)
            h = h * mask
        cache.append((x, a, mask))
        x = h
    return x, cache


def _fc_backward(fc: list[AffineParams], cache, dout: np.ndarray, grads: dict) -> np.ndarray:
    d = dout
    last = len(fc) - 1
    for i in range(last, -1, -1):
        x, a, mask = cache[i]
        if i != last:
            if mask is not None:
                d = d * mask
            d = d * (a > 0.0)
        grads[f"fc{i + 1}.w"] = np.outer(x, d)
        grads[f"fc{i + 1}.b"] = d.copy()
        d = fc[i].w @ d
    return d


def create_model(hidden: int = DEFAULT_HIDDEN, seed: int = 0, dropout_p: float = DEFAULT_DROPOUT,
                 normalizer: Normalizer | None = None) -> DippmModel:
    return _new_sage_model(hidden, np.random.default_rng(seed), dropout_p, normalizer or Normalizer.identity())


def create_mlp_model(hidden: int = DEFAULT_HIDDEN, seed: int = 0, dropout_p: float = DEFAULT_DROPOUT,
                     normalizer: Normalizer | None = None) -> MlpModel:
    return _new_mlp_model(hidden, np.random.default_rng(seed), dropout_p, normalizer or Normalizer.identity())


def _new_sage_model(hidden: int, rng, dropout_p: float, normalizer: Normalizer) -> DippmModel:
    sage_dims = [(FEATURE_WIDTH, hidden), (hidden, hidden), (hidden, hidden)]
    sage = [
        SageLayerParams(w_self=_glorot(rng, di, do), w_neigh=_glorot(rng, di, do), bias=np.zeros(do))
        for di, do in sage_dims
    ]
    fc = _fc_stack(rng, [(hidden + STATIC_WIDTH, hidden), (hidden, hidden), (hidden, 3)])
    return DippmModel(sage=sage, fc=fc, dropout_p=dropout_p, normalizer=normalizer, hidden=hidden)


def _new_mlp_model(hidden: int, rng, dropout_p: float, normalizer: Normalizer) -> MlpModel:
    fc = _fc_stack(rng, [(STATIC_WIDTH, hidden), (hidden, hidden), (hidden, 3)])
    return MlpModel(fc=fc, dropout_p=dropout_p, normalizer=normalizer, hidden=hidden)


# ---------------------------------------------------------------------------
# public forward / backward surface


def sage_forward(encoding: GraphEncoding, layer: SageLayerParams, h_in: np.ndarray) -> np.ndarray:
    """One message-passing block over the encoding's predecessor edges."""
    if h_in.ndim != 2 or h_in.shape[0] != encoding.num_nodes:
        raise ShapeMismatch(f"h_in {h_in.shape} does not cover {encoding.num_nodes} nodes")
    if h_in.shape[1] != layer.w_self.shape[0]:
        raise ShapeMismatch(f"h_in width {h_in.shape[1]} vs layer input {layer.w_self.shape[0]}")
    m = _aggregation_matrix(encoding.num_nodes, encoding.edges) @ h_in
    return np.maximum(h_in @ layer.w_self + m @ layer.w_neigh + layer.bias, 0.0)


def readout_mean(z: np.ndarray) -> np.ndarray:
    """Arithmetic mean over node embeddings; order-free by construction."""
    if z.ndim != 2 or z.shape[0] < 1:
        raise EmptyGraph("readout needs at least one node embedding")
    return z.mean(axis=0)


def forward(encoding: GraphEncoding, fs: StaticFeatures, model, mode: str = "eval", rng=None) -> np.ndarray:
    """Normalized-space prediction for one graph. mode is "train" or "eval"."""
    if mode not in ("train", "eval"):
        raise ValueError(f'mode must be "train" or "eval", got {mode!r}')
    prep = _prepare_encoding(encoding, fs)
    fs_norm = model.normalizer.normalize_fs(prep.fs_raw)
    out, _ = model.forward_norm(prep, fs_norm, train=(mode == "train"), rng=rng)
    return out


def predict(model, encoding: GraphEncoding, fs: StaticFeatures) -> TargetVector:
    """Original-unit eval-mode prediction."""
    y = model.normalizer.denormalize_y(forward(encoding, fs, model))
    return TargetVector(latency_ms=float(y[0]), memory_mb=float(y[1]), energy_j=float(y[2]))


def predict_record(model, record: DatasetRecord) -> TargetVector:
    return predict(model, record.encoding, record.fs)


def batch_loss(model, records: list[DatasetRecord], huber_delta: float = 1.0) -> float:
    """Mean eval-mode Huber loss over a batch, in normalized space."""
    if not records:
        raise EmptyDataset("batch is empty")
    total = 0.0
    for record in records:
        prep = _prepare_record(record)
        fs_norm = model.normalizer.normalize_fs(prep.fs_raw)
        y_norm = model.normalizer.normalize_y(prep.y_raw)
        out, _ = model.forward_norm(prep, fs_norm)
        loss, _ = numerics.huber_loss(out, y_norm, huber_delta)
        total += loss
    return total / len(records)


def backward(model, records: list[DatasetRecord], huber_delta: float = 1.0) -> tuple[float, dict[str, np.ndarray]]:
    """Mean batch Huber loss plus exact gradients for every parameter.

    Dropout is off here (eval-mode forward); the training loop applies its own
    per-step masks internally.
    """
    if not records:
        raise EmptyDataset("batch is empty")
    grads: dict[str, np.ndarray] = {name: np.zeros_like(arr) for name, arr in model.param_items()}
    total = 0.0
    for record in records:
        prep = _prepare_record(record)
        fs_norm = model.normalizer.normalize_fs(prep.fs_raw)
        y_norm = model.normalizer.normalize_y(prep.y_raw)
        out, cache = model.forward_norm(prep, fs_norm)
        loss, dout = numerics.huber_loss(out, y_norm, huber_delta)
        total += loss
        for name, grad in model.backward_from(cache, dout).items():
            grads[name] += grad
    scale = 1.0 / len(records)
    for name in grads:
        grads[name] *= scale
    return total * scale, grads


# ---------------------------------------------------------------------------
# training


def train(train_records: list[DatasetRecord], val_records: list[DatasetRecord],
          config: TrainConfig) -> tuple[DippmModel, list[dict]]:
    """Fit the graph network; returns the final-epoch model and history."""
    return _fit(_new_sage_model, train_records, val_records, config)


def train_mlp(train_records: list[DatasetRecord], val_records: list[DatasetRecord],
              config: TrainConfig) -> tuple[MlpModel, list[dict]]:
    """Fit the static-features-only baseline with the identical protocol."""
    return _fit(_new_mlp_model, train_records, val_records, config)


def _fit(make_model, train_records, val_records, config: TrainConfig):
    if not train_records:
        raise EmptyDataset("training split is empty")
    rng = np.random.default_rng(config.seed)

    targets = np.stack([r.target.as_array for r in train_records])
    statics = np.stack([r.fs.as_vector for r in train_records])
    normalizer = Normalizer.fit(targets, statics)
    model = make_model(config.hidden, rng, DEFAULT_DROPOUT, normalizer)

    preps = [_prepare_record(r) for r in train_records]
    fs_norm = np.stack([normalizer.normalize_fs(p.fs_raw) for p in preps])
    y_norm = np.stack([normalizer.normalize_y(p.y_raw) for p in preps])
    y_raw = np.stack([p.y_raw for p in preps])

    val_preps = [_prepare_record(r) for r in val_records]
    val_fs_norm = [normalizer.normalize_fs(p.fs_raw) for p in val_preps]
    val_y_norm = [normalizer.normalize_y(p.y_raw) for p in val_preps]
    val_y_raw = [p.y_raw for p in val_preps]

    params = model.param_items()
    states = {name: numerics.AdamState.for_param(arr.shape, config.lr) for name, arr in params}
    n = len(preps)
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        loss_sum = 0.0
        ape_sum = np.zeros(3)
        for i in order:
            out, cache = model.forward_norm(preps[i], fs_norm[i], train=True, rng=rng)
            loss, dout = numerics.huber_loss(out, y_norm[i], config.huber_delta)
            if not math.isfinite(loss):
                raise NonFinite(f"training loss diverged at epoch {epoch}")
            loss_sum += loss
            pred = normalizer.denormalize_y(out)
            ape_sum += np.abs(pred - y_raw[i]) / np.abs(y_raw[i])
            grads = model.backward_from(cache, dout)
            for name, arr in params:
                arr[...] = numerics.adam_step(arr, grads[name], states[name])

        entry = {
            "epoch": epoch,
            "train_loss": loss_sum / n,
            "train_mape": float((ape_sum / n).mean()),
            "val_loss": None,
            "val_mape": None,
        }
        if val_preps:
            v_loss = 0.0
            v_ape = np.zeros(3)
            for prep, f_n, t_n, t_raw in zip(val_preps, val_fs_norm, val_y_norm, val_y_raw):
                out, _ = model.forward_norm(prep, f_n)
                loss, _ = numerics.huber_loss(out, t_n, config.huber_delta)
                v_loss += loss
                v_ape += np.abs(normalizer.denormalize_y(out) - t_raw) / np.abs(t_raw)
            entry["val_loss"] = v_loss / len(val_preps)
            entry["val_mape"] = float((v_ape / len(val_preps)).mean())
        history.append(entry)
    return model, history


# ---------------------------------------------------------------------------
# persistence

_SAGE_PARAM_NAMES = tuple(
    [f"sage{i}.{part}" for i in (1, 2, 3) for part in ("w_self", "w_neigh", "bias")]
    + [f"fc{i}.{part}" for i in (1, 2, 3) for part in ("w", "b")]
)
_MLP_PARAM_NAMES = tuple(f"fc{i}.{part}" for i in (1, 2, 3) for part in ("w", "b"))
_VECTOR_SUFFIXES = (".bias", ".b")


def save_model(model, path) -> None:
    """Write the model as one JSON document; round-trips bit-exactly."""
    params = {}
    for name, arr in model.param_items():
        if arr.ndim == 1:
            params[name] = {"rows": 1, "cols": int(arr.shape[0]), "data": arr.tolist()}
        else:
            params[name] = {"rows": int(arr.shape[0]), "cols": int(arr.shape[1]), "data": arr.ravel().tolist()}
    doc = {
        "vocab_version": model.vocab_version,
        "arch": model.arch,
        "hidden": model.hidden,
        "dropout_p": model.dropout_p,
        "normalizer": {
            "y_mean": model.normalizer.y_mean.tolist(),
            "y_std": model.normalizer.y_std.tolist(),
            "fs_mean": model.normalizer.fs_mean.tolist(),
            "fs_std": model.normalizer.fs_std.tolist(),
        },
        "params": params,
    }
    try:
        Path(path).write_text(json.dumps(doc), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write model to {path}: {exc}") from exc


def load_model(path):
    """Read a model file back; refuses files from another vocabulary."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read model from {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IoFailure(f"model file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise IoFailure(f"model file {path} must contain an object")

    version = doc.get("vocab_version")
    if version != VOCAB_VERSION:
        raise VersionMismatch(f"model was built for vocabulary {version!r}, this build uses {VOCAB_VERSION!r}")
    arch = doc.get("arch")
    if arch not in ("sage", "mlp"):
        raise IoFailure(f"unknown model arch {arch!r}")

    try:
        hidden = int(doc["hidden"])
        dropout_p = float(doc["dropout_p"])
        norm_doc = doc["normalizer"]
        normalizer = Normalizer(
            y_mean=np.asarray(norm_doc["y_mean"], dtype=np.float64),
            y_std=np.asarray(norm_doc["y_std"], dtype=np.float64),
            fs_mean=np.asarray(norm_doc["fs_mean"], dtype=np.float64),
            fs_std=np.asarray(norm_doc["fs_std"], dtype=np.float64),
        )
        expected = _SAGE_PARAM_NAMES if arch == "sage" else _MLP_PARAM_NAMES
        arrays = {}
        for name in expected:
            entry = doc["params"][name]
            rows, cols = int(entry["rows"]), int(entry["cols"])
            data = np.asarray(entry["data"], dtype=np.float64)
            if data.size != rows * cols:
                raise IoFailure(f"parameter {name}: {data.size} values for a {rows}x{cols} matrix")
            arrays[name] = data if name.endswith(_VECTOR_SUFFIXES) else data.reshape(rows, cols)
    except (KeyError, TypeError, ValueError) as exc:
        raise IoFailure(f"model file {path} is incomplete: {exc}") from exc

    if arch == "sage":
        sage = [
            SageLayerParams(
                w_self=arrays[f"sage{i}.w_self"],
                w_neigh=arrays[f"sage{i}.w_neigh"],
                bias=arrays[f"sage{i}.bias"],
            )
            for i in (1, 2, 3)
        ]
        fc = [AffineParams(w=arrays[f"fc{i}.w"], b=arrays[f"fc{i}.b"]) for i in (1, 2, 3)]
        return DippmModel(sage=sage, fc=fc, dropout_p=dropout_p, normalizer=normalizer,
                          hidden=hidden, vocab_version=version)
    fc = [AffineParams(w=arrays[f"fc{i}.w"], b=arrays[f"fc{i}.b"]) for i in (1, 2, 3)]
    return MlpModel(fc=fc, dropout_p=dropout_p, normalizer=normalizer, hidden=hidden, vocab_version=version)
