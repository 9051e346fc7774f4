import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dippm import dataset, featurize, graph_ir
from dippm.dataset import SplitSpec, TargetVector, mape, oracle_labels, split
from dippm.errors import InvalidSpec, LengthMismatch, MalformedRecord, TooFew, ZeroActual

from helpers import chain_graph, make_graph, random_graph


# -- oracle ---------------------------------------------------------------------


def test_oracle_singleton_relu():
    g = chain_graph(["relu"])
    y = oracle_labels(g)
    assert y.latency_ms == pytest.approx(0.05, abs=1e-15)
    assert y.memory_mb > 600.0
    assert y.energy_j == pytest.approx(0.25 * 0.05, abs=1e-15)


def test_oracle_memory_additive_floor():
    for seed in range(8):
        y = oracle_labels(random_graph(random.Random(seed)))
        assert y.memory_mb > 600.0


def test_oracle_extra_relu_changes_latency_by_depth_and_count():
    shallow = chain_graph(["relu"] * 3)
    deeper = chain_graph(["relu"] * 4)
    a, b = oracle_labels(shallow), oracle_labels(deeper)
    # one more operator, one more level: 0.05 + 0.2
    assert b.latency_ms - a.latency_ms == pytest.approx(0.25, abs=1e-12)
    assert b.memory_mb >= a.memory_mb


def test_oracle_depth_term_separates_equal_static_features():
    wide = make_graph(
        [
            ("relu", (), {}, [1, 8]),
            ("gelu", (0,), {}, None),
            ("gelu", (0,), {}, None),
            ("add", (1, 2), {}, None),
        ],
        outputs=[3],
    )
    deep = make_graph(
        [
            ("relu", (), {}, [1, 8]),
            ("gelu", (0,), {}, None),
            ("gelu", (1,), {}, None),
            ("add", (0, 2), {}, None),
        ],
        outputs=[3],
    )
    assert featurize.static_features(wide) == featurize.static_features(deep)
    assert oracle_labels(wide).latency_ms != oracle_labels(deep).latency_ms


def test_oracle_monotone_under_node_insertion():
    for seed in range(6):
        g = random_graph(random.Random(seed))
        out = g.outputs[0]
        extended = make_graph(
            [(n.raw_name, tuple(n.inputs), dict(n.attrs), list(n.out_shape)) for n in g.nodes]
            + [("softmax", (out,), {}, None)],
            outputs=[len(g.nodes)],
            batch=g.batch_size,
        )
        a, b = oracle_labels(g), oracle_labels(extended)
        assert b.latency_ms > a.latency_ms
        assert b.memory_mb >= a.memory_mb


# -- synth_dataset -----------------------------------------------------------------


def test_synth_deterministic():
    a = dataset.synth_dataset(10, seed=7)
    b = dataset.synth_dataset(10, seed=7)
    assert len(a) == len(b) == 10
    lines_a = [dataset.record_to_line(r) for r in a]
    lines_b = [dataset.record_to_line(r) for r in b]
    assert lines_a == lines_b
    c = dataset.synth_dataset(10, seed=8)
    assert [dataset.record_to_line(r) for r in c] != lines_a


def test_synth_records_are_valid():
    for rec in dataset.synth_dataset(25, seed=3):
        assert rec.encoding.num_nodes == rec.encoding.features.shape[0]
        assert rec.encoding.features.shape[1] == featurize.FEATURE_WIDTH
        assert rec.fs.as_vector.shape == (5,)
        for value in rec.target.as_array:
            assert math.isfinite(value) and value > 0
        for s, d in rec.encoding.edges:
            assert 0 <= s < rec.encoding.num_nodes
            assert 0 <= d < rec.encoding.num_nodes


def test_synth_family_mix_pure_mlp():
    records = dataset.synth_dataset(15, {"mlp": 1.0}, seed=5)
    for rec in records:
        assert rec.fs.t_conv == 0
        assert rec.model_name.startswith("mlp-")


def test_synth_rejects_bad_inputs():
    with pytest.raises(InvalidSpec):
        dataset.synth_dataset(0, seed=1)
    with pytest.raises(InvalidSpec):
        dataset.synth_dataset(3, {"transformer": 1.0}, seed=1)
    with pytest.raises(InvalidSpec):
        dataset.synth_dataset(3, {"mlp": 0.0}, seed=1)


# -- split ------------------------------------------------------------------------


def _dummy_records(n):
    g = chain_graph(["relu"])
    rec = dataset.record_from_graph(g)
    return [dataset.DatasetRecord(rec.encoding, rec.fs, rec.target, model_name=str(i)) for i in range(n)]


def test_split_100_is_70_15_15():
    train, val, test = split(_dummy_records(100), SplitSpec(seed=1))
    assert (len(train), len(val), len(test)) == (70, 15, 15)


def test_split_10_rounding_rule():
    train, val, test = split(_dummy_records(10), SplitSpec(seed=1))
    assert (len(train), len(val), len(test)) == (7, 2, 1)


def test_split_same_seed_same_membership():
    records = _dummy_records(20)
    a = split(records, SplitSpec(seed=9))
    b = split(records, SplitSpec(seed=9))
    for part_a, part_b in zip(a, b):
        assert [r.model_name for r in part_a] == [r.model_name for r in part_b]
    c = split(records, SplitSpec(seed=10))
    assert any(
        [r.model_name for r in x] != [r.model_name for r in y] for x, y in zip(a, c)
    )


def test_split_too_few():
    with pytest.raises(TooFew):
        split(_dummy_records(2), SplitSpec(seed=0))


def test_split_spec_fraction_invariant():
    with pytest.raises(ValueError):
        SplitSpec(train_frac=0.5, val_frac=0.2, test_frac=0.2)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(min_value=3, max_value=300), seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_split_partition_property(n, seed):
    records = _dummy_records(n)
    train, val, test = split(records, SplitSpec(seed=seed))
    names = [r.model_name for r in train] + [r.model_name for r in val] + [r.model_name for r in test]
    assert len(names) == n
    assert sorted(names, key=int) == [str(i) for i in range(n)]


# -- mape --------------------------------------------------------------------------


def test_mape_identity_is_zero():
    ys = [TargetVector(1.0, 2.0, 3.0), TargetVector(4.0, 5.0, 6.0)]
    res = mape(ys, ys)
    assert (res.latency, res.memory, res.energy, res.overall) == (0.0, 0.0, 0.0, 0.0)


def test_mape_single_record_example():
    pred = [TargetVector(90.0, 50.0, 7.0)]
    actual = [TargetVector(100.0, 50.0, 7.0)]
    res = mape(pred, actual)
    assert res.latency == pytest.approx(0.10)
    assert res.memory == 0.0 and res.energy == 0.0
    assert res.overall == pytest.approx(0.10 / 3)


def test_mape_zero_actual():
    with pytest.raises(ZeroActual):
        mape([TargetVector(1.0, 1.0, 1.0)], [TargetVector(0.0, 1.0, 1.0)])


def test_mape_length_mismatch():
    y = TargetVector(1.0, 1.0, 1.0)
    with pytest.raises(LengthMismatch):
        mape([y, y], [y])
    with pytest.raises(LengthMismatch):
        mape([], [])


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(min_value=0.1, max_value=1e4),
            st.floats(min_value=0.1, max_value=1e4),
        ),
        min_size=1,
        max_size=10,
    )
)
def test_mape_nonnegative_and_zero_iff_exact(pairs):
    preds = [TargetVector(p, p, p) for p, _ in pairs]
    actuals = [TargetVector(a, a, a) for _, a in pairs]
    res = mape(preds, actuals)
    assert res.overall >= 0.0
    if all(p == a for p, a in pairs):
        assert res.overall == 0.0
    else:
        assert res.overall > 0.0


# -- JSONL persistence ------------------------------------------------------------------


def test_jsonl_round_trip(tmp_path):
    records = dataset.synth_dataset(12, seed=6)
    path = tmp_path / "data.jsonl"
    dataset.write_dataset(records, path)
    loaded = dataset.read_dataset(path)
    assert loaded == records
    second = tmp_path / "data2.jsonl"
    dataset.write_dataset(loaded, second)
    assert path.read_bytes() == second.read_bytes()


def test_jsonl_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert dataset.read_dataset(path) == []


def test_jsonl_missing_field_reports_line(tmp_path):
    records = dataset.synth_dataset(3, seed=2)
    path = tmp_path / "data.jsonl"
    dataset.write_dataset(records, path)
    lines = path.read_text().splitlines()
    doc = json.loads(lines[1])
    del doc["y"]
    lines[1] = json.dumps(doc)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(MalformedRecord, match="line 2"):
        dataset.read_dataset(path)


def test_jsonl_invalid_json_reports_line(tmp_path):
    path = tmp_path / "data.jsonl"
    dataset.write_dataset(dataset.synth_dataset(2, seed=2), path)
    path.write_text(path.read_text() + "{broken\n")
    with pytest.raises(MalformedRecord, match="line 3"):
        dataset.read_dataset(path)


def test_jsonl_rejects_nonpositive_targets(tmp_path):
    records = dataset.synth_dataset(1, seed=2)
    doc = json.loads(dataset.record_to_line(records[0]))
    doc["y"]["latency_ms"] = -1.0
    with pytest.raises(MalformedRecord):
        dataset.record_from_line(json.dumps(doc), 1)


def test_jsonl_line_schema_keys():
    record = dataset.synth_dataset(1, seed=4)[0]
    doc = json.loads(dataset.record_to_line(record))
    assert list(doc.keys()) == ["name", "x", "edges", "n", "fs", "fs_raw", "y"]
    assert list(doc["y"].keys()) == ["latency_ms", "memory_mb", "energy_j"]
    assert list(doc["fs_raw"].keys()) == ["macs", "batch", "t_conv", "t_dense", "t_relu"]
    assert doc["n"] == record.encoding.num_nodes
    assert len(doc["fs"]) == 5
