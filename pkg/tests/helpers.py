"""Shared test utilities: random graph construction and brute-force oracles.

The MAC counters here deliberately count multiply-accumulates one by one with
nested loops (window positions enumerated by stepping, not by the closed-form
size formula) so they stay independent of the library's arithmetic.
"""

from __future__ import annotations

import random

from dippm import graph_ir
from dippm.graph_ir import ComputationGraph, IRNode, ZooSpec, classify_operator


def _node(nid, op, inputs=(), attrs=None, out_shape=None) -> IRNode:
    return IRNode(
        id=nid,
        raw_name=op,
        kind=classify_operator(op),
        attrs=dict(attrs or {}),
        out_shape=list(out_shape) if out_shape is not None else None,
        inputs=list(inputs),
    )


def make_graph(nodes_spec, outputs, batch=1, name="test-graph") -> ComputationGraph:
    """Build and shape-infer a graph from (op, inputs, attrs, out_shape) tuples."""
    nodes = [_node(i, *spec) for i, spec in enumerate(nodes_spec)]
    return graph_ir.infer_shapes(ComputationGraph(nodes=nodes, outputs=outputs, batch_size=batch, name=name))


def chain_graph(kinds, shape=(1, 8), batch=1) -> ComputationGraph:
    """Linear chain of same-shape operators; the first node is the source."""
    spec = [(kinds[0], (), {}, list(shape))]
    for i, op in enumerate(kinds[1:], start=1):
        spec.append((op, (i - 1,), {}, None))
    return make_graph(spec, outputs=[len(kinds) - 1], batch=batch)


def random_zoo_graph(rng: random.Random) -> ComputationGraph:
    family = rng.choice(graph_ir.ZOO_FAMILIES)
    hw = rng.choice([8, 16, 32])
    if family == "mlp":
        depth, width = rng.randint(1, 5), rng.choice([4, 8, 16])
    elif family == "vggish":
        depth, width = rng.randint(1, min(3, hw.bit_length() - 1)), rng.choice([2, 4, 8])
    else:
        depth, width = rng.randint(1, 3), rng.choice([2, 4, 8])
    spec = ZooSpec(family=family, depth=depth, width=width, batch_size=rng.choice([1, 2, 4]),
                   input_hw=hw, seed=rng.getrandbits(32))
    return graph_ir.build_zoo_model(spec)


def random_graph(rng: random.Random, max_segments: int = 6, small: bool = False) -> ComputationGraph:
    """Random valid graph touching the whole operator vocabulary over time.

    Starts from a rank-4 input, applies a random run of channel/spatial ops
    (some with skip connections, constants, or a batch-matmul detour that
    flattens the tensor), then ends in a small dense head. With small=True the
    graph stays at or below 8 operator nodes for gradient-check duty.
    """
    batch = rng.choice([1, 2]) if small else rng.choice([1, 2, 4])
    channels = rng.randint(2, 3) if small else rng.randint(2, 4)
    hw = rng.choice([4, 8]) if small else rng.choice([4, 8, 16])
    spec: list[tuple] = [("input", (), {}, [batch, channels, hw, hw])]
    cur = 0

    def push(op, inputs, attrs=None, shape=None):
        nonlocal cur
        spec.append((op, tuple(inputs), dict(attrs or {}), list(shape) if shape else None))
        cur = len(spec) - 1
        return cur

    def shape_of(i):
        return _infer_shape_of(spec, i, batch)

    budget = rng.randint(1, 3) if small else rng.randint(2, max_segments)
    for _ in range(budget):
        s = shape_of(cur)
        if len(s) == 4:
            _, c, h, w = s
            menu = ["conv", "bn", "relu", "layernorm", "softmax", "gelu"]
            if h >= 2:
                menu.append("pool")
            if not small:
                menu += ["skip", "const_add", "concat"]
                if h <= 8:
                    menu.append("upconv")
                if h * w <= 64:
                    menu.append("bmm")
            choice = rng.choice(menu)
            if choice == "conv":
                out_c = rng.randint(2, 4)
                groups = 2 if (not small and c % 2 == 0 and out_c % 2 == 0 and rng.random() < 0.3) else 1
                kernel = rng.choice([1, 3])
                push("conv2d", [cur], {
                    "kernel_h": kernel, "kernel_w": kernel, "stride_h": 1, "stride_w": 1,
                    "pad_h": kernel // 2, "pad_w": kernel // 2, "dilation_h": 1, "dilation_w": 1,
                    "groups": groups, "out_features": out_c, "has_bias": rng.randint(0, 1),
                })
            elif choice == "upconv":
                push("conv2d_transpose", [cur], {
                    "kernel_h": 2, "kernel_w": 2, "stride_h": 2, "stride_w": 2,
                    "groups": 1, "out_features": rng.randint(2, 4), "has_bias": rng.randint(0, 1),
                })
            elif choice == "pool":
                push(rng.choice(["maxpool2d", "avgpool2d"]), [cur],
                     {"kernel_h": 2, "kernel_w": 2, "stride_h": 2, "stride_w": 2})
            elif choice == "bn":
                push("batchnorm", [cur], {"epsilon": 1e-5})
            elif choice == "skip":
                same = [i for i in range(len(spec) - 1) if shape_of(i) == s]
                if same:
                    push(rng.choice(["add", "multiply"]), [rng.choice(same), cur])
            elif choice == "const_add":
                prev = cur
                const = push("const", [], shape=s)
                push("add", [prev, const])
            elif choice == "concat":
                push("concat", [cur, cur])
            elif choice == "bmm":
                src4 = cur
                left = push("reshape", [src4], shape=[s[0], c, h * w])
                right = push("reshape", [src4], shape=[s[0], h * w, c])
                push("batch_matmul", [left, right])
                push("reshape", [cur])
            else:
                push(choice, [cur])
        else:
            menu = ["dense", "relu", "layernorm", "softmax", "gelu"]
            if not small:
                menu += ["skip", "concat"]
            choice = rng.choice(menu)
            if choice == "dense":
                push("dense", [cur], {"out_features": rng.randint(2, 6), "has_bias": rng.randint(0, 1)})
            elif choice == "skip":
                same = [i for i in range(len(spec) - 1) if shape_of(i) == s]
                if same:
                    push("add", [rng.choice(same), cur])
            elif choice == "concat":
                push("concat", [cur, cur])
            else:
                push(choice, [cur])

    if len(shape_of(cur)) == 4:
        if not small and rng.random() < 0.5:
            push("global_avgpool2d", [cur])
        push("reshape", [cur])
    push("dense", [cur], {"out_features": rng.randint(2, 6), "has_bias": rng.randint(0, 1)})
    if rng.random() < 0.5:
        push("relu", [cur])
    return make_graph(spec, outputs=[cur], batch=batch, name=f"random-{rng.getrandbits(16)}")


def _infer_shape_of(spec, idx, batch):
    """Re-derive the shape of spec[idx] by running inference on the prefix."""
    nodes = [_node(i, *s) for i, s in enumerate(spec)]
    g = graph_ir.infer_shapes(ComputationGraph(nodes=nodes, outputs=[len(nodes) - 1], batch_size=batch))
    return g.nodes[idx].out_shape


# ---------------------------------------------------------------------------
# brute-force MAC counters


def brute_force_conv2d_macs(n, c_in, h, w, c_out, kh, kw, sh, sw, ph, pw, dh, dw, groups) -> int:
    count = 0
    for _b in range(n):
        for _co in range(c_out):
            y = -ph
            while y + dh * (kh - 1) <= h + ph - 1:
                x = -pw
                while x + dw * (kw - 1) <= w + pw - 1:
                    for _ci in range(c_in // groups):
                        for _i in range(kh):
                            for _j in range(kw):
                                count += 1
                    x += sw
                y += sh
    return count


def brute_force_conv2d_transpose_macs(n, c_in, h, w, c_out, kh, kw, groups) -> int:
    count = 0
    for _b in range(n):
        for _ci in range(c_in):
            for _y in range(h):
                for _x in range(w):
                    for _co in range(c_out // groups):
                        for _i in range(kh):
                            for _j in range(kw):
                                count += 1
    return count


def brute_force_dense_macs(rows, in_features, out_features) -> int:
    count = 0
    for _r in range(rows):
        for _i in range(in_features):
            for _o in range(out_features):
                count += 1
    return count


def brute_force_batch_matmul_macs(b, m, k, n) -> int:
    count = 0
    for _b in range(b):
        for _m in range(m):
            for _n in range(n):
                for _k in range(k):
                    count += 1
    return count
