"""Computation-graph intermediate representation.

A model is a directed acyclic graph of operator nodes. Each node carries the
original operator name, a classified operator kind, numeric attributes, and an
output tensor shape (NCHW order, left-aligned, rank 1..4). Graphs come from two
places: a JSON document (see below) or the parametric zoo builders that stand
in for framework importers.

JSON document schema::

    {
      "name":    str,            # optional, defaults to ""
      "batch":   int,            # batch size the shapes were built for
      "outputs": [int, ...],     # at least one node id
      "nodes": [
        {
          "id":        int,          # unique, non-negative
          "op":        str,          # operator name; unknown names classify as "other"
          "inputs":    [int, ...],   # producer node ids (optional, default [])
          "attrs":     {str: num},   # optional, absent attributes read as 0
          "out_shape": [int, ...]    # optional on non-source nodes (inferred)
        }, ...
      ]
    }

Parsing re-sorts nodes topologically and renumbers ids densely from 0, so a
document whose node order is merely unusual is accepted rather than rejected.
All functions here are pure: they never mutate their inputs and return new
graph values.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from heapq import heappop, heappush

from .errors import (
    BadShape,
    CyclicGraph,
    DanglingReference,
    InvalidSpec,
    MalformedDocument,
    ShapeMismatch,
    Underspecified,
)

MAX_RANK = 4


class OperatorKind(enum.Enum):
    """Fixed 16-entry operator vocabulary.

    Definition order is the one-hot encoding order and must never change:
    index 0 is conv2d, index 15 is the catch-all ``other``.
    """

    CONV2D = "conv2d"
    CONV2D_TRANSPOSE = "conv2d_transpose"
    DENSE = "dense"
    BATCH_MATMUL = "batch_matmul"
    RELU = "relu"
    ADD = "add"
    MULTIPLY = "multiply"
    MAXPOOL2D = "maxpool2d"
    AVGPOOL2D = "avgpool2d"
    GLOBAL_AVGPOOL2D = "global_avgpool2d"
    BATCHNORM = "batchnorm"
    SOFTMAX = "softmax"
    RESHAPE = "reshape"
    CONCAT = "concat"
    LAYERNORM = "layernorm"
    OTHER = "other"


OPERATOR_VOCABULARY: tuple[OperatorKind, ...] = tuple(OperatorKind)
KIND_INDEX: dict[OperatorKind, int] = {k: i for i, k in enumerate(OPERATOR_VOCABULARY)}

_NAME_TO_KIND = {k.value: k for k in OperatorKind}

# Attribute names in their canonical feature-slot order.
KNOWN_ATTRIBUTES: tuple[str, ...] = (
    "kernel_h",
    "kernel_w",
    "stride_h",
    "stride_w",
    "pad_h",
    "pad_w",
    "dilation_h",
    "dilation_w",
    "groups",
    "out_features",
    "has_bias",
    "epsilon",
)

# Node names that denote data/plumbing rather than computation. They are kept
# in the graph (classified as OTHER) but dropped by featurization.
NON_OPERATOR_NAMES = frozenset(
    {
        "const",
        "constant",
        "var",
        "variable",
        "param",
        "parameter",
        "input",
        "tuple",
        "tuple_get_item",
        "tuplegetitem",
    }
)


def classify_operator(name: str) -> OperatorKind:
    """Map an operator name to its vocabulary entry, falling back to OTHER.

    Matching is case-insensitive and ignores dotted namespaces, so both
    "nn.conv2d" and "Conv2D" classify as CONV2D. Unknown names never error.
    """
    tail = name.strip().lower().rsplit(".", 1)[-1]
    return _NAME_TO_KIND.get(tail, OperatorKind.OTHER)


@dataclass
class IRNode:
    id: int
    raw_name: str
    kind: OperatorKind
    attrs: dict[str, float] = field(default_factory=dict)
    out_shape: list[int] | None = None
    inputs: list[int] = field(default_factory=list)

    def attr(self, name: str, default: float = 0) -> float:
        """Attribute value with absent entries reading as the default (0)."""
        return self.attrs.get(name, default)

    def is_operator(self) -> bool:
        return self.raw_name.strip().lower().rsplit(".", 1)[-1] not in NON_OPERATOR_NAMES


@dataclass
class ComputationGraph:
    nodes: list[IRNode]
    outputs: list[int]
    batch_size: int
    name: str = ""

    def node(self, node_id: int) -> IRNode:
        return self.nodes[node_id]


@dataclass
class ZooSpec:
    """Parameters of one programmatically built model.

    input_hw must be a power of two in [8, 256]; conv families additionally
    require 2**depth <= input_hw so spatial pooling never collapses below 1.
    """

    family: str
    depth: int
    width: int
    batch_size: int
    input_hw: int
    seed: int = 0


ZOO_FAMILIES = ("mlp", "vggish", "resnetish")


# ---------------------------------------------------------------------------
# validation


def validate_graph(graph: ComputationGraph) -> None:
    """Check structural invariants; raises on the first violation."""
    if graph.batch_size < 1:
        raise MalformedDocument(f"batch size must be positive, got {graph.batch_size}")
    n = len(graph.nodes)
    for rank, node in enumerate(graph.nodes):
        if node.id != rank:
            raise MalformedDocument(f"node ids must be dense 0..{n - 1}, found {node.id} at position {rank}")
        for src in node.inputs:
            if not 0 <= src < n:
                raise DanglingReference(f"node {node.id} references missing input {src}")
            if src >= rank:
                raise CyclicGraph(f"node {node.id} consumes node {src}, which does not precede it")
        if node.out_shape is not None:
            _check_shape(node.out_shape, node.id)
    if not graph.outputs:
        raise MalformedDocument("graph declares no outputs")
    for out in graph.outputs:
        if not 0 <= out < n:
            raise DanglingReference(f"output id {out} does not exist")


def _check_shape(shape: list[int], node_id: int) -> None:
    if not 1 <= len(shape) <= MAX_RANK:
        raise BadShape(f"node {node_id}: shape rank {len(shape)} outside [1, {MAX_RANK}]")
    for dim in shape:
        if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
            raise BadShape(f"node {node_id}: shape entry {dim!r} is not a positive integer")


# ---------------------------------------------------------------------------
# JSON parsing / serialization


def parse_graph_json(text: str) -> ComputationGraph:
    """Parse a graph document, re-topologize it, and validate it.

    Node ids in the document may be any unique non-negative integers; they are
    renumbered densely in topological order (stable: among ready nodes the
    smallest original id goes first, so an already-canonical document round
    trips unchanged). If any non-source node lacks an out_shape the whole
    graph goes through shape inference, which may also surface
    Underspecified/ShapeMismatch errors.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("top-level value must be an object")

    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise MalformedDocument('"nodes" must be a non-empty list')
    outputs = doc.get("outputs")
    if not isinstance(outputs, list) or not outputs or not all(isinstance(o, int) for o in outputs):
        raise MalformedDocument('"outputs" must be a non-empty list of node ids')
    batch = doc.get("batch")
    if not isinstance(batch, int) or isinstance(batch, bool) or batch < 1:
        raise MalformedDocument('"batch" must be a positive integer')
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise MalformedDocument('"name" must be a string')

    by_id: dict[int, dict] = {}
    for entry in raw_nodes:
        if not isinstance(entry, dict):
            raise MalformedDocument("every node must be an object")
        nid = entry.get("id")
        if not isinstance(nid, int) or isinstance(nid, bool) or nid < 0:
            raise MalformedDocument(f"node id {nid!r} must be a non-negative integer")
        if nid in by_id:
            raise MalformedDocument(f"duplicate node id {nid}")
        op = entry.get("op")
        if not isinstance(op, str) or not op:
            raise MalformedDocument(f"node {nid}: missing operator name")
        inputs = entry.get("inputs", [])
        if not isinstance(inputs, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in inputs):
            raise MalformedDocument(f"node {nid}: inputs must be a list of node ids")
        attrs = entry.get("attrs", {})
        if not isinstance(attrs, dict) or not all(
            isinstance(k, str) and isinstance(v, (int, float)) and not isinstance(v, bool) for k, v in attrs.items()
        ):
            raise MalformedDocument(f"node {nid}: attrs must map names to numbers")
        shape = entry.get("out_shape")
        if shape is not None:
            if not isinstance(shape, list):
                raise BadShape(f"node {nid}: out_shape must be a list")
            _check_shape(shape, nid)
        by_id[nid] = entry

    for nid, entry in by_id.items():
        for src in entry.get("inputs", []):
            if src not in by_id:
                raise DanglingReference(f"node {nid} references missing input {src}")
    for out in outputs:
        if out not in by_id:
            raise DanglingReference(f"output id {out} does not exist")

    order = _topological_order(by_id)
    remap = {old: new for new, old in enumerate(order)}
    nodes = []
    for old_id in order:
        entry = by_id[old_id]
        shape = entry.get("out_shape")
        nodes.append(
            IRNode(
                id=remap[old_id],
                raw_name=entry["op"],
                kind=classify_operator(entry["op"]),
                attrs=dict(entry.get("attrs", {})),
                out_shape=list(shape) if shape is not None else None,
                inputs=[remap[i] for i in entry.get("inputs", [])],
            )
        )
    graph = ComputationGraph(nodes=nodes, outputs=[remap[o] for o in outputs], batch_size=batch, name=name)
    validate_graph(graph)
    if any(node.out_shape is None for node in graph.nodes):
        graph = infer_shapes(graph)
    return graph


def _topological_order(by_id: dict[int, dict]) -> list[int]:
    consumers: dict[int, list[int]] = {nid: [] for nid in by_id}
    pending = {}
    for nid, entry in by_id.items():
        inputs = entry.get("inputs", [])
        pending[nid] = len(inputs)
        for src in inputs:
            consumers[src].append(nid)
    ready = [nid for nid, deg in pending.items() if deg == 0]
    heap: list[int] = []
    for nid in ready:
        heappush(heap, nid)
    order = []
    while heap:
        nid = heappop(heap)
        order.append(nid)
        for consumer in consumers[nid]:
            pending[consumer] -= 1
            if pending[consumer] == 0:
                heappush(heap, consumer)
    if len(order) != len(by_id):
        stuck = sorted(set(by_id) - set(order))
        raise CyclicGraph(f"nodes {stuck} form a dependency cycle")
    return order


def serialize_graph(graph: ComputationGraph) -> str:
    """Canonical JSON form: fixed key order, attrs sorted by name."""
    doc = {
        "name": graph.name,
        "batch": graph.batch_size,
        "outputs": list(graph.outputs),
        "nodes": [
            {
                "id": node.id,
                "op": node.raw_name,
                "inputs": list(node.inputs),
                "attrs": {k: node.attrs[k] for k in sorted(node.attrs)},
                "out_shape": list(node.out_shape) if node.out_shape is not None else None,
            }
            for node in graph.nodes
        ],
    }
    for entry in doc["nodes"]:
        if entry["out_shape"] is None:
            del entry["out_shape"]
    return json.dumps(doc)


# ---------------------------------------------------------------------------
# shape inference

_ELEMENTWISE = {OperatorKind.RELU, OperatorKind.SOFTMAX, OperatorKind.BATCHNORM, OperatorKind.LAYERNORM}
_BINARY_ELEMENTWISE = {OperatorKind.ADD, OperatorKind.MULTIPLY}
_POOLS = {OperatorKind.MAXPOOL2D, OperatorKind.AVGPOOL2D}


def infer_shapes(graph: ComputationGraph) -> ComputationGraph:
    """Populate every node's out_shape; idempotent on already-inferred graphs.

    Source nodes must declare a shape. Shapes of conv/pool/dense/matmul/concat
    nodes are recomputed from inputs and attributes; reshape keeps a declared
    shape whose element count matches its input and otherwise flattens to
    [leading dim, rest]; OTHER nodes keep a declared shape or pass their first
    input through. Stored attribute zeros take semantic defaults where one
    exists (stride 1 for conv, stride = kernel for pools, dilation 1, groups 1).
    """
    validate_graph(graph)
    shapes: list[list[int]] = []
    new_nodes = []
    for node in graph.nodes:
        in_shapes = [shapes[i] for i in node.inputs]
        shape = _infer_node_shape(node, in_shapes)
        _check_shape(shape, node.id)
        shapes.append(shape)
        new_nodes.append(
            IRNode(
                id=node.id,
                raw_name=node.raw_name,
                kind=node.kind,
                attrs=dict(node.attrs),
                out_shape=shape,
                inputs=list(node.inputs),
            )
        )
    return ComputationGraph(nodes=new_nodes, outputs=list(graph.outputs), batch_size=graph.batch_size, name=graph.name)


def _conv_spatial(size: int, kernel: int, stride: int, pad: int, dilation: int) -> int:
    return (size + 2 * pad - dilation * (kernel - 1) - 1) // stride + 1


def _infer_node_shape(node: IRNode, in_shapes: list[list[int]]) -> list[int]:
    if not node.inputs:
        if node.out_shape is None:
            raise Underspecified(f"source node {node.id} ({node.raw_name}) declares no out_shape")
        return list(node.out_shape)

    kind = node.kind
    first = in_shapes[0]

    if kind is OperatorKind.CONV2D or kind is OperatorKind.CONV2D_TRANSPOSE:
        if len(first) != 4:
            raise ShapeMismatch(f"node {node.id}: {kind.value} input must be rank 4, got {first}")
        kh, kw = int(node.attr("kernel_h")), int(node.attr("kernel_w"))
        if kh < 1 or kw < 1:
            raise Underspecified(f"node {node.id}: {kind.value} kernel size missing")
        sh = int(node.attr("stride_h")) or 1
        sw = int(node.attr("stride_w")) or 1
        ph, pw = int(node.attr("pad_h")), int(node.attr("pad_w"))
        dh = int(node.attr("dilation_h")) or 1
        dw = int(node.attr("dilation_w")) or 1
        out_c = int(node.attr("out_features"))
        if out_c < 1:
            if node.out_shape is not None and len(node.out_shape) == 4:
                out_c = node.out_shape[1]
            else:
                raise Underspecified(f"node {node.id}: {kind.value} output channels missing")
        n, _, h, w = first
        if kind is OperatorKind.CONV2D:
            oh = _conv_spatial(h, kh, sh, ph, dh)
            ow = _conv_spatial(w, kw, sw, pw, dw)
        else:
            oh = (h - 1) * sh - 2 * ph + dh * (kh - 1) + 1
            ow = (w - 1) * sw - 2 * pw + dw * (kw - 1) + 1
        return [n, out_c, oh, ow]

    if kind in _POOLS:
        if len(first) != 4:
            raise ShapeMismatch(f"node {node.id}: {kind.value} input must be rank 4, got {first}")
        kh, kw = int(node.attr("kernel_h")), int(node.attr("kernel_w"))
        if kh < 1 or kw < 1:
            raise Underspecified(f"node {node.id}: pool kernel size missing")
        sh = int(node.attr("stride_h")) or kh
        sw = int(node.attr("stride_w")) or kw
        ph, pw = int(node.attr("pad_h")), int(node.attr("pad_w"))
        dh = int(node.attr("dilation_h")) or 1
        dw = int(node.attr("dilation_w")) or 1
        n, c, h, w = first
        return [n, c, _conv_spatial(h, kh, sh, ph, dh), _conv_spatial(w, kw, sw, pw, dw)]

    if kind is OperatorKind.GLOBAL_AVGPOOL2D:
        if len(first) != 4:
            raise ShapeMismatch(f"node {node.id}: global pool input must be rank 4, got {first}")
        return [first[0], first[1], 1, 1]

    if kind is OperatorKind.DENSE:
        out_features = int(node.attr("out_features"))
        if out_features < 1:
            raise Underspecified(f"node {node.id}: dense out_features missing")
        return list(first[:-1]) + [out_features]

    if kind is OperatorKind.BATCH_MATMUL:
        if len(in_shapes) != 2:
            raise ShapeMismatch(f"node {node.id}: batch_matmul needs exactly 2 inputs")
        a, b = in_shapes
        if len(a) != 3 or len(b) != 3:
            raise ShapeMismatch(f"node {node.id}: batch_matmul inputs must be rank 3, got {a} and {b}")
        if a[0] != b[0] or a[2] != b[1]:
            raise ShapeMismatch(f"node {node.id}: batch_matmul shapes {a} x {b} do not compose")
        return [a[0], a[1], b[2]]

    if kind in _BINARY_ELEMENTWISE:
        for other in in_shapes[1:]:
            if other != first:
                raise ShapeMismatch(f"node {node.id}: elementwise inputs differ: {first} vs {other}")
        return list(first)

    if kind is OperatorKind.CONCAT:
        if len(first) < 2:
            raise ShapeMismatch(f"node {node.id}: concat inputs must have rank >= 2")
        channels = 0
        for shape in in_shapes:
            if len(shape) != len(first) or shape[0] != first[0] or shape[2:] != first[2:]:
                raise ShapeMismatch(f"node {node.id}: concat inputs differ outside channel dim: {in_shapes}")
            channels += shape[1]
        return [first[0], channels] + list(first[2:])

    if kind is OperatorKind.RESHAPE:
        total = _numel(first)
        if node.out_shape is not None and _numel(node.out_shape) == total:
            return list(node.out_shape)
        if len(first) < 2:
            return list(first)
        return [first[0], total // first[0]]

    if kind in _ELEMENTWISE:
        return list(first)

    # OTHER: trust a declared shape, else pass through.
    if node.out_shape is not None:
        return list(node.out_shape)
    return list(first)


def _numel(shape: list[int]) -> int:
    n = 1
    for dim in shape:
        n *= dim
    return n


def with_batch_size(graph: ComputationGraph, batch_size: int) -> ComputationGraph:
    """Rebuild the graph for a different batch size and re-infer all shapes.

    Source nodes whose leading dimension equals the old batch (and whose rank
    is at least 2, so plain weight vectors are left alone) get the new leading
    dimension; every non-source shape is recomputed.
    """
    if batch_size < 1:
        raise InvalidSpec(f"batch size must be positive, got {batch_size}")
    old = graph.batch_size
    nodes = []
    for node in graph.nodes:
        shape = None
        if not node.inputs and node.out_shape is not None:
            shape = list(node.out_shape)
            if len(shape) >= 2 and shape[0] == old:
                shape[0] = batch_size
        nodes.append(
            IRNode(
                id=node.id,
                raw_name=node.raw_name,
                kind=node.kind,
                attrs=dict(node.attrs),
                out_shape=shape,
                inputs=list(node.inputs),
            )
        )
    return infer_shapes(ComputationGraph(nodes=nodes, outputs=list(graph.outputs), batch_size=batch_size, name=graph.name))


# ---------------------------------------------------------------------------
# zoo builders


class _Builder:
    def __init__(self, name: str, batch: int):
        self.name = name
        self.batch = batch
        self.nodes: list[IRNode] = []

    def add(self, op: str, inputs: tuple[int, ...] = (), attrs: dict | None = None, out_shape: list[int] | None = None) -> int:
        nid = len(self.nodes)
        self.nodes.append(
            IRNode(
                id=nid,
                raw_name=op,
                kind=classify_operator(op),
                attrs=dict(attrs or {}),
                out_shape=out_shape,
                inputs=list(inputs),
            )
        )
        return nid

    def finish(self, outputs: list[int]) -> ComputationGraph:
        graph = ComputationGraph(nodes=self.nodes, outputs=outputs, batch_size=self.batch, name=self.name)
        return infer_shapes(graph)


def _validate_zoo_spec(spec: ZooSpec) -> None:
    if spec.family not in ZOO_FAMILIES:
        raise InvalidSpec(f"unknown family {spec.family!r}; expected one of {ZOO_FAMILIES}")
    if spec.depth < 1:
        raise InvalidSpec(f"depth must be >= 1, got {spec.depth}")
    if spec.width < 1:
        raise InvalidSpec(f"width must be >= 1, got {spec.width}")
    if spec.batch_size < 1:
        raise InvalidSpec(f"batch_size must be >= 1, got {spec.batch_size}")
    hw = spec.input_hw
    if hw < 8 or hw > 256 or hw & (hw - 1):
        raise InvalidSpec(f"input_hw must be a power of two in [8, 256], got {hw}")
    if spec.family == "vggish" and (1 << spec.depth) > hw:
        raise InvalidSpec(f"vggish depth {spec.depth} pools a {hw}x{hw} input below 1x1")


def build_zoo_model(spec: ZooSpec) -> ComputationGraph:
    """Deterministically build one model graph from its spec.

    Families:
      mlp       depth blocks of [dense, relu] on a flattened input
      vggish    depth blocks of [conv2d, (batchnorm?), relu, maxpool2d],
                then flatten, dense, relu, dense, softmax
      resnetish stem conv2d/batchnorm/relu, then depth residual blocks of
                [conv2d, batchnorm, (batchnorm?), relu, add], optionally a
                trailing "gelu" activation per block, then global pool,
                flatten, dense

    The (?) pieces and has_bias/width multipliers are drawn from a PRNG seeded
    with spec.seed, so the same spec always yields the same graph while specs
    differing only in seed yield structural variety that the five graph-level
    static features cannot see.
    """
    _validate_zoo_spec(spec)
    rng = random.Random(spec.seed)
    name = f"{spec.family}-d{spec.depth}-w{spec.width}-b{spec.batch_size}-hw{spec.input_hw}-s{spec.seed}"
    b = _Builder(name, spec.batch_size)
    if spec.family == "mlp":
        last = _build_mlp(b, spec, rng)
    elif spec.family == "vggish":
        last = _build_vggish(b, spec, rng)
    else:
        last = _build_resnetish(b, spec, rng)
    return b.finish([last])


def _dense_attrs(out_features: int, rng: random.Random) -> dict:
    return {"out_features": out_features, "has_bias": rng.randint(0, 1)}


def _conv_attrs(out_channels: int, rng: random.Random) -> dict:
    return {
        "kernel_h": 3,
        "kernel_w": 3,
        "stride_h": 1,
        "stride_w": 1,
        "pad_h": 1,
        "pad_w": 1,
        "dilation_h": 1,
        "dilation_w": 1,
        "groups": 1,
        "out_features": out_channels,
        "has_bias": rng.randint(0, 1),
    }


def _build_mlp(b: _Builder, spec: ZooSpec, rng: random.Random) -> int:
    prev = b.add("input", out_shape=[spec.batch_size, spec.input_hw * spec.input_hw])
    for _ in range(spec.depth):
        prev = b.add("dense", (prev,), _dense_attrs(spec.width, rng))
        prev = b.add("relu", (prev,))
    return prev


def _build_vggish(b: _Builder, spec: ZooSpec, rng: random.Random) -> int:
    prev = b.add("input", out_shape=[spec.batch_size, 3, spec.input_hw, spec.input_hw])
    for i in range(spec.depth):
        channels = spec.width * (1 << min(i, 3))
        prev = b.add("conv2d", (prev,), _conv_attrs(channels, rng))
        if rng.random() < 0.5:
            prev = b.add("batchnorm", (prev,), {"epsilon": 1e-5})
        prev = b.add("relu", (prev,))
        prev = b.add("maxpool2d", (prev,), {"kernel_h": 2, "kernel_w": 2, "stride_h": 2, "stride_w": 2})
    prev = b.add("reshape", (prev,))
    head_width = spec.width * rng.choice([2, 4])
    prev = b.add("dense", (prev,), _dense_attrs(head_width, rng))
    prev = b.add("relu", (prev,))
    prev = b.add("dense", (prev,), _dense_attrs(10, rng))
    return b.add("softmax", (prev,))


def _build_resnetish(b: _Builder, spec: ZooSpec, rng: random.Random) -> int:
    prev = b.add("input", out_shape=[spec.batch_size, 3, spec.input_hw, spec.input_hw])
    prev = b.add("conv2d", (prev,), _conv_attrs(spec.width, rng))
    prev = b.add("batchnorm", (prev,), {"epsilon": 1e-5})
    prev = b.add("relu", (prev,))
    for _ in range(spec.depth):
        block_in = prev
        prev = b.add("conv2d", (prev,), _conv_attrs(spec.width, rng))
        prev = b.add("batchnorm", (prev,), {"epsilon": 1e-5})
        if rng.random() < 0.5:
            prev = b.add("batchnorm", (prev,), {"epsilon": 1e-5})
        prev = b.add("relu", (prev,))
        prev = b.add("add", (block_in, prev))
        if rng.random() < 0.4:
            prev = b.add("gelu", (prev,))
    prev = b.add("global_avgpool2d", (prev,))
    prev = b.add("reshape", (prev,))
    return b.add("dense", (prev,), _dense_attrs(10, rng))
