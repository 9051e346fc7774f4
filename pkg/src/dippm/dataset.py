"""Dataset records, the synthetic label oracle, splits, and MAPE.

A record bundles everything one training sample needs: the graph encoding,
the static feature vector, and a three-way target (latency ms, memory MB,
energy J). Labels come from a deterministic closed-form cost oracle rather
than hardware measurement, which keeps training fully reproducible and gives
the tests an exact ground truth:

    latency_ms = 0.05 * n_op + macs / 1e8 + 0.2 * depth
    memory_mb  = 600 + 4 * (params_est + peak_act) / 2**20
    energy_j   = 0.25 * latency_ms * (1 + macs / 1e9)

where n_op is the operator-node count, depth the longest path (in edges) of
the contracted operator graph, params_est the weight-element count of
conv/dense nodes (bias included when has_bias is set), and peak_act the
largest operator output-tensor element count. The depth term makes labels a
function of topology, not just of the static features.

On disk a dataset is JSON Lines, one record per line::

    {"name": str, "x": [[float; 32]], "edges": [[int, int]], "n": int,
     "fs": [float; 5], "fs_raw": {"macs": int, "batch": int, "t_conv": int,
     "t_dense": int, "t_relu": int}, "y": {"latency_ms": float,
     "memory_mb": float, "energy_j": float}}
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import featurize, graph_ir
from .errors import (
    InvalidSpec,
    IoFailure,
    LengthMismatch,
    MalformedRecord,
    TooFew,
    ZeroActual,
)
from .featurize import GraphEncoding, StaticFeatures
from .graph_ir import ComputationGraph, OperatorKind, ZooSpec

DEFAULT_FAMILY_MIX = {"mlp": 1.0, "vggish": 1.0, "resnetish": 1.0}

_PARAM_KINDS = {OperatorKind.CONV2D, OperatorKind.CONV2D_TRANSPOSE, OperatorKind.DENSE}


@dataclass
class TargetVector:
    latency_ms: float
    memory_mb: float
    energy_j: float

    @property
    def as_array(self) -> np.ndarray:
        return np.array([self.latency_ms, self.memory_mb, self.energy_j], dtype=np.float64)


@dataclass
class DatasetRecord:
    encoding: GraphEncoding
    fs: StaticFeatures
    target: TargetVector
    model_name: str = ""


@dataclass
class SplitSpec:
    train_frac: float = 0.70
    val_frac: float = 0.15
    test_frac: float = 0.15
    seed: int = 0

    def __post_init__(self):
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {total}, expected 1")


@dataclass
class MapeResult:
    latency: float
    memory: float
    energy: float
    overall: float


# ---------------------------------------------------------------------------
# synthetic label oracle


def oracle_labels(graph: ComputationGraph) -> TargetVector:
    """Deterministic cost labels for one graph; see the module docstring."""
    nodes, edges = featurize.operator_graph(graph)
    n_op = len(nodes)
    macs = featurize.compute_macs(graph)

    depth = [0] * n_op
    for src, dst in edges:  # edges arrive producer-first, so one pass suffices
        depth[dst] = max(depth[dst], depth[src] + 1)
    longest = max(depth) if depth else 0

    params_est = 0
    peak_act = 0
    for node in nodes:
        peak_act = max(peak_act, _numel(node.out_shape))
        if node.kind in _PARAM_KINDS:
            params_est += _weight_elements(graph, node)

    latency_ms = 0.05 * n_op + macs / 1e8 + 0.2 * longest
    memory_mb = 600.0 + 4.0 * (params_est + peak_act) / 2**20
    energy_j = 0.25 * latency_ms * (1.0 + macs / 1e9)
    return TargetVector(latency_ms=latency_ms, memory_mb=memory_mb, energy_j=energy_j)


def _numel(shape) -> int:
    n = 1
    for dim in shape:
        n *= dim
    return n


def _weight_elements(graph: ComputationGraph, node) -> int:
    in_shape = graph.node(node.inputs[0]).out_shape if node.inputs else None
    has_bias = 1 if node.attr("has_bias") else 0
    if node.kind is OperatorKind.DENSE:
        in_features = in_shape[-1] if in_shape else 0
        out_features = node.out_shape[-1]
        return in_features * out_features + has_bias * out_features
    kh, kw = int(node.attr("kernel_h")), int(node.attr("kernel_w"))
    groups = int(node.attr("groups")) or 1
    c_in = in_shape[1] if in_shape else 0
    c_out = node.out_shape[1]
    if node.kind is OperatorKind.CONV2D:
        return c_out * (c_in // groups) * kh * kw + has_bias * c_out
    return c_in * (c_out // groups) * kh * kw + has_bias * c_out


# ---------------------------------------------------------------------------
# synthetic dataset generation

_BATCHES = (1, 2, 4, 8)
_HWS = (8, 16, 32)
_MLP_WIDTHS = (8, 16, 32, 64)
_CONV_WIDTHS = (4, 8, 16)


def record_from_graph(graph: ComputationGraph, name: str | None = None) -> DatasetRecord:
    """Featurize a graph and label it with the oracle."""
    return DatasetRecord(
        encoding=featurize.create_graph_encoding(graph),
        fs=featurize.static_features(graph),
        target=oracle_labels(graph),
        model_name=graph.name if name is None else name,
    )


def synth_dataset(n: int, family_mix: dict[str, float] | None = None, seed: int = 0) -> list[DatasetRecord]:
    """Sample n zoo models and label them; deterministic given the seed."""
    if n < 1:
        raise InvalidSpec(f"need at least one record, got n={n}")
    mix = dict(DEFAULT_FAMILY_MIX if family_mix is None else family_mix)
    for family, weight in mix.items():
        if family not in graph_ir.ZOO_FAMILIES:
            raise InvalidSpec(f"unknown family {family!r} in mix")
        if weight < 0:
            raise InvalidSpec(f"negative weight for family {family!r}")
    families = [f for f in mix if mix[f] > 0]
    if not families:
        raise InvalidSpec("family mix has no positive weights")
    weights = [mix[f] for f in families]

    rng = random.Random(seed)
    records = []
    for i in range(n):
        family = rng.choices(families, weights=weights)[0]
        hw = rng.choice(_HWS)
        if family == "mlp":
            depth = rng.randint(1, 6)
            width = rng.choice(_MLP_WIDTHS)
        elif family == "vggish":
            depth = rng.randint(1, min(4, hw.bit_length() - 1))
            width = rng.choice(_CONV_WIDTHS)
        else:
            depth = rng.randint(1, 4)
            width = rng.choice(_CONV_WIDTHS)
        spec = ZooSpec(
            family=family,
            depth=depth,
            width=width,
            batch_size=rng.choice(_BATCHES),
            input_hw=hw,
            seed=rng.getrandbits(63),
        )
        graph = graph_ir.build_zoo_model(spec)
        records.append(record_from_graph(graph, name=f"{graph.name}-{i:05d}"))
    return records


# ---------------------------------------------------------------------------
# split and metric


def split(records: list[DatasetRecord], spec: SplitSpec) -> tuple[list[DatasetRecord], list[DatasetRecord], list[DatasetRecord]]:
    """Seeded shuffle, then contiguous train/val/test cut.

    Train and val sizes are the rounded fractions; test takes the remainder,
    so 100 records split 70/15/15 and 10 records split 7/2/1.
    """
    n = len(records)
    if n < 3:
        raise TooFew(f"need at least 3 records to split, got {n}")
    indices = list(range(n))
    random.Random(spec.seed).shuffle(indices)
    n_train = round(n * spec.train_frac)
    n_val = round(n * spec.val_frac)
    train = [records[i] for i in indices[:n_train]]
    val = [records[i] for i in indices[n_train : n_train + n_val]]
    test = [records[i] for i in indices[n_train + n_val :]]
    return train, val, test


def mape(preds: list[TargetVector], actuals: list[TargetVector]) -> MapeResult:
    """Per-target mean absolute percentage error plus the mean of the three."""
    if len(preds) != len(actuals):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(actuals)} actuals")
    if not preds:
        raise LengthMismatch("need at least one prediction")
    sums = np.zeros(3, dtype=np.float64)
    for pred, actual in zip(preds, actuals):
        p = pred.as_array
        a = actual.as_array
        if np.any(a == 0.0):
            raise ZeroActual("actual target contains a zero component")
        sums += np.abs(p - a) / np.abs(a)
    per_target = sums / len(preds)
    return MapeResult(
        latency=float(per_target[0]),
        memory=float(per_target[1]),
        energy=float(per_target[2]),
        overall=float(per_target.mean()),
    )


# ---------------------------------------------------------------------------
# JSONL persistence


def record_to_line(record: DatasetRecord) -> str:
    enc = featurize.encoding_to_dict(record.encoding)
    doc = {
        "name": record.model_name,
        "x": enc["x"],
        "edges": enc["edges"],
        "n": enc["n"],
        "fs": record.fs.as_vector.tolist(),
        "fs_raw": {
            "macs": record.fs.macs,
            "batch": record.fs.batch,
            "t_conv": record.fs.t_conv,
            "t_dense": record.fs.t_dense,
            "t_relu": record.fs.t_relu,
        },
        "y": {
            "latency_ms": record.target.latency_ms,
            "memory_mb": record.target.memory_mb,
            "energy_j": record.target.energy_j,
        },
    }
    return json.dumps(doc)


def record_from_line(line: str, lineno: int = 0) -> DatasetRecord:
    where = f"line {lineno}" if lineno else "record"
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"{where}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedRecord(f"{where}: expected an object")
    for key in ("name", "x", "edges", "n", "fs", "fs_raw", "y"):
        if key not in doc:
            raise MalformedRecord(f'{where}: missing "{key}" field')
    try:
        encoding = featurize.encoding_from_dict(doc)
        raw = doc["fs_raw"]
        fs = StaticFeatures(
            macs=int(raw["macs"]),
            batch=int(raw["batch"]),
            t_conv=int(raw["t_conv"]),
            t_dense=int(raw["t_dense"]),
            t_relu=int(raw["t_relu"]),
        )
        y = doc["y"]
        target = TargetVector(
            latency_ms=float(y["latency_ms"]),
            memory_mb=float(y["memory_mb"]),
            energy_j=float(y["energy_j"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"{where}: {exc}") from exc
    if encoding.num_nodes != encoding.features.shape[0] or (
        encoding.num_nodes and encoding.features.shape[1] != featurize.FEATURE_WIDTH
    ):
        raise MalformedRecord(f"{where}: feature matrix does not match node count")
    for src, dst in encoding.edges:
        if not (0 <= src < encoding.num_nodes and 0 <= dst < encoding.num_nodes):
            raise MalformedRecord(f"{where}: edge ({src}, {dst}) out of range")
    if len(doc["fs"]) != featurize.STATIC_WIDTH:
        raise MalformedRecord(f"{where}: fs vector must have {featurize.STATIC_WIDTH} entries")
    for value in (target.latency_ms, target.memory_mb, target.energy_j):
        if not math.isfinite(value) or value <= 0:
            raise MalformedRecord(f"{where}: target values must be finite and positive")
    return DatasetRecord(encoding=encoding, fs=fs, target=target, model_name=str(doc["name"]))


def write_dataset(records: list[DatasetRecord], path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(record_to_line(record))
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write dataset to {path}: {exc}") from exc


def read_dataset(path) -> list[DatasetRecord]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read dataset from {path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        records.append(record_from_line(line, lineno))
    return records
