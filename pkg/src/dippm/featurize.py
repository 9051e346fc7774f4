"""Turn a computation graph into trainable features.

Two products come out of here:

* a graph encoding: directed producer->consumer edge list over the operator
  nodes plus one 32-wide feature row per operator node, and
* the 5-wide graph-level static feature vector
  (MACs, batch size, #conv2d, #dense, #relu), log1p-scaled.

Feature row layout (width 32):

    [0..15]   one-hot operator class, index order = OPERATOR_VOCABULARY
    [16..27]  attributes in KNOWN_ATTRIBUTES order, log1p-scaled except
              has_bias (kept 0/1) and epsilon (kept raw)
    [28..31]  output shape N, C, H, W, log1p-scaled, missing ranks = 0

Non-operator nodes (constants, variables, inputs, tuples) are dropped and
their edges contracted, so an operator feeding an operator through dropped
plumbing still produces an edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyGraph, Underspecified
from .graph_ir import (
    KIND_INDEX,
    KNOWN_ATTRIBUTES,
    ComputationGraph,
    IRNode,
    OperatorKind,
)

FEATURE_WIDTH = 32
STATIC_WIDTH = 5
_ATTR_BASE = 16
_SHAPE_BASE = 28

# Bumped whenever the vocabulary or slot layout changes; embedded in saved
# models so stale models are refused at load time.
VOCAB_VERSION = "v1"


@dataclass(eq=False)
class GraphEncoding:
    """Adjacency edge list plus node-feature matrix of one graph."""

    num_nodes: int
    edges: list[tuple[int, int]]
    features: np.ndarray  # (num_nodes, FEATURE_WIDTH) float64

    def __eq__(self, other) -> bool:
        if not isinstance(other, GraphEncoding):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and self.edges == other.edges
            and np.array_equal(self.features, other.features)
        )


@dataclass
class StaticFeatures:
    """Graph-level summary: MACs, batch size, and three operator counts."""

    macs: int
    batch: int
    t_conv: int
    t_dense: int
    t_relu: int

    @property
    def as_vector(self) -> np.ndarray:
        return np.array(
            [
                math.log1p(self.macs),
                math.log1p(self.batch),
                math.log1p(self.t_conv),
                math.log1p(self.t_dense),
                math.log1p(self.t_relu),
            ],
            dtype=np.float64,
        )


# ---------------------------------------------------------------------------
# operator-graph extraction


def filter_and_preprocess(graph: ComputationGraph) -> list[IRNode]:
    """Operator nodes in deterministic post-order.

    Depth-first from the first declared output, producers before consumers,
    ties broken by input-list order; remaining outputs are walked next and any
    operator nodes unreachable from every output are appended in id order.
    Non-operator nodes are skipped, with their producers attached transitively
    to their consumers.
    """
    return operator_graph(graph)[0]


def operator_graph(graph: ComputationGraph) -> tuple[list[IRNode], list[tuple[int, int]]]:
    """Filtered operator nodes plus contracted producer->consumer edges.

    Edge endpoints are positions in the returned node list, not original ids.
    Raises EmptyGraph when no operator node remains.
    """
    is_op = [node.is_operator() for node in graph.nodes]
    if not any(is_op):
        raise EmptyGraph(f"graph {graph.name!r} has no operator nodes")

    # Producers seen through dropped nodes, deduplicated, input order kept.
    producers: list[list[int]] = []
    for node in graph.nodes:
        seen: list[int] = []
        for src in node.inputs:
            candidates = [src] if is_op[src] else producers[src]
            for c in candidates:
                if c not in seen:
                    seen.append(c)
        producers.append(seen)

    order: list[int] = []
    visited = [False] * len(graph.nodes)

    def visit(root: int) -> None:
        stack: list[tuple[int, bool]] = [(root, False)]
        while stack:
            nid, expanded = stack.pop()
            if expanded:
                order.append(nid)
                continue
            if visited[nid]:
                continue
            visited[nid] = True
            stack.append((nid, True))
            for child in reversed(producers[nid]):
                if not visited[child]:
                    stack.append((child, False))

    for out in graph.outputs:
        roots = [out] if is_op[out] else producers[out]
        for root in roots:
            if not visited[root]:
                visit(root)
    for nid, op in enumerate(is_op):
        if op and not visited[nid]:
            visit(nid)

    position = {nid: i for i, nid in enumerate(order)}
    edges: list[tuple[int, int]] = []
    emitted = set()
    for nid in order:
        for src in producers[nid]:
            edge = (position[src], position[nid])
            if edge not in emitted:
                emitted.add(edge)
                edges.append(edge)
    return [graph.nodes[nid] for nid in order], edges


def encode_node(node: IRNode) -> np.ndarray:
    """One 32-wide feature row; see the module docstring for the layout."""
    if node.out_shape is None:
        raise Underspecified(f"node {node.id} ({node.raw_name}) has no out_shape; run shape inference first")
    vec = np.zeros(FEATURE_WIDTH, dtype=np.float64)
    vec[KIND_INDEX[node.kind]] = 1.0
    for offset, attr_name in enumerate(KNOWN_ATTRIBUTES):
        value = float(node.attr(attr_name))
        slot = _ATTR_BASE + offset
        if attr_name == "has_bias":
            vec[slot] = 1.0 if value else 0.0
        elif attr_name == "epsilon":
            vec[slot] = value
        else:
            vec[slot] = math.log1p(max(value, 0.0))
    for axis, dim in enumerate(node.out_shape):
        vec[_SHAPE_BASE + axis] = math.log1p(dim)
    return vec


def create_graph_encoding(graph: ComputationGraph) -> GraphEncoding:
    """Feature matrix and edge list over the filtered operator nodes."""
    nodes, edges = operator_graph(graph)
    features = np.stack([encode_node(node) for node in nodes])
    return GraphEncoding(num_nodes=len(nodes), edges=edges, features=features)


# ---------------------------------------------------------------------------
# MACs and static features

_MAC_KINDS = {
    OperatorKind.CONV2D,
    OperatorKind.CONV2D_TRANSPOSE,
    OperatorKind.DENSE,
    OperatorKind.BATCH_MATMUL,
}


def compute_macs(graph: ComputationGraph) -> int:
    """Total multiply-accumulate count over conv2d, conv2d_transpose, dense,
    and batch_matmul nodes; every other operator contributes zero.

    Per node:
      conv2d            N * C_out * H_out * W_out * (C_in // groups) * K_h * K_w
      conv2d_transpose  N * C_in * H_in * W_in * (C_out // groups) * K_h * K_w
      dense             (product of leading output dims) * in_features * out_features
      batch_matmul      B * M * N * K
    """
    total = 0
    for node in graph.nodes:
        if node.kind not in _MAC_KINDS:
            continue
        total += _node_macs(graph, node)
    return total


def _node_macs(graph: ComputationGraph, node: IRNode) -> int:
    if node.out_shape is None:
        raise Underspecified(f"node {node.id}: shapes not inferred")
    if not node.inputs:
        raise Underspecified(f"node {node.id} ({node.kind.value}): input shape unavailable")
    in_shape = graph.node(node.inputs[0]).out_shape
    if in_shape is None:
        raise Underspecified(f"node {node.id}: producer shape unavailable")
    out = node.out_shape

    if node.kind is OperatorKind.DENSE:
        leading = 1
        for dim in out[:-1]:
            leading *= dim
        return leading * in_shape[-1] * out[-1]

    if node.kind is OperatorKind.BATCH_MATMUL:
        return out[0] * out[1] * out[2] * in_shape[2]

    kh, kw = int(node.attr("kernel_h")), int(node.attr("kernel_w"))
    if kh < 1 or kw < 1:
        raise Underspecified(f"node {node.id}: kernel size missing")
    groups = int(node.attr("groups")) or 1
    if len(in_shape) != 4 or len(out) != 4:
        raise Underspecified(f"node {node.id}: conv shapes must be rank 4")
    if node.kind is OperatorKind.CONV2D:
        n, c_out, h_out, w_out = out
        c_in = in_shape[1]
        return n * c_out * h_out * w_out * (c_in // groups) * kh * kw
    n, c_in, h_in, w_in = in_shape
    c_out = out[1]
    return n * c_in * h_in * w_in * (c_out // groups) * kh * kw


def static_features(graph: ComputationGraph) -> StaticFeatures:
    """MACs plus operator-kind counts; batch comes from the graph itself."""
    t_conv = sum(1 for n in graph.nodes if n.kind is OperatorKind.CONV2D)
    t_dense = sum(1 for n in graph.nodes if n.kind is OperatorKind.DENSE)
    t_relu = sum(1 for n in graph.nodes if n.kind is OperatorKind.RELU)
    return StaticFeatures(
        macs=compute_macs(graph),
        batch=graph.batch_size,
        t_conv=t_conv,
        t_dense=t_dense,
        t_relu=t_relu,
    )


# ---------------------------------------------------------------------------
# encoding serialization (shared by dataset records)


def encoding_to_dict(encoding: GraphEncoding) -> dict:
    return {
        "n": encoding.num_nodes,
        "edges": [[s, d] for s, d in encoding.edges],
        "x": encoding.features.tolist(),
    }


def encoding_from_dict(doc: dict) -> GraphEncoding:
    features = np.asarray(doc["x"], dtype=np.float64)
    if features.ndim == 1 and features.size == 0:
        features = features.reshape(0, FEATURE_WIDTH)
    return GraphEncoding(
        num_nodes=int(doc["n"]),
        edges=[(int(s), int(d)) for s, d in doc["edges"]],
        features=features,
    )
