import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marlene.stream import (
    BINARY,
    NUMERIC,
    TARGET,
    ArffError,
    ArffRowError,
    ArffSchemaError,
    DatasetMeta,
    InterleavePolicy,
    StreamId,
    dataset_stats,
    dump_meka_arff,
    interleave,
    load_dataset,
    make_instance,
    parse_meka_arff,
    read_csv,
    read_schedule_order,
    write_csv,
)

TOY = """% toy dataset
@relation 'toy: -C 2'

@attribute a {0,1}
@attribute b {0,1}
@attribute x numeric

@data
1,0,3.5
0,1,-1
"""


class TestParseArff:
    def test_labels_first(self):
        meta, data = parse_meka_arff(TOY.encode())
        assert (meta.n_features, meta.n_labels, meta.name) == (1, 2, "toy")
        assert data[0].y.tolist() == [1, 0]
        assert data[0].x.tolist() == [3.5]
        assert [d.t for d in data] == [0, 1]

    def test_labels_last(self):
        text = TOY.replace("-C 2", "-C -2").replace("1,0,3.5", "3.5,1,0").replace("0,1,-1", "-1,0,1")
        text = text.replace("@attribute a {0,1}\n@attribute b {0,1}\n@attribute x numeric",
                            "@attribute x numeric\n@attribute a {0,1}\n@attribute b {0,1}")
        meta, data = parse_meka_arff(text)
        assert meta.n_labels == 2 and meta.feature_names == ("x",)
        assert data[0].y.tolist() == [1, 0] and data[0].x.tolist() == [3.5]
        assert data[1].y.tolist() == [0, 1]

    def test_sparse_rows(self):
        text = TOY.replace("1,0,3.5", "{0 1,2 3.5}").replace("0,1,-1", "{1 1,2 -1}")
        _, sparse = parse_meka_arff(text)
        _, dense = parse_meka_arff(TOY)
        assert sparse == dense

    def test_numeric_coded_labels_and_binary_features(self):
        text = ("@relation 'r: -C 1'\n@attribute l numeric\n@attribute f {0,1}\n"
                "@attribute g real\n@data\n1,1,0.25\n0,0,2\n")
        meta, data = parse_meka_arff(text)
        assert meta.feature_kinds == (BINARY, NUMERIC)
        assert [d.y.tolist() for d in data] == [[1], [0]]

    def test_row_arity_error_names_row(self):
        text = TOY.replace("0,1,-1", "0,1,-1,7")
        with pytest.raises(ArffRowError) as err:
            parse_meka_arff(text)
        assert err.value.line == 10

    def test_label_outside_binary_domain(self):
        with pytest.raises(ArffSchemaError):
            parse_meka_arff(TOY.replace("1,0,3.5", "2,0,3.5"))

    def test_label_attribute_with_wide_domain(self):
        with pytest.raises(ArffSchemaError):
            parse_meka_arff(TOY.replace("@attribute a {0,1}", "@attribute a {0,1,2}"))

    def test_malformed_header_has_line_number(self):
        with pytest.raises(ArffError) as err:
            parse_meka_arff(TOY.replace("@attribute x numeric", "@attribute"))
        assert err.value.line == 6

    def test_missing_label_count(self):
        with pytest.raises(ArffError):
            parse_meka_arff(TOY.replace(": -C 2", ""))

    def test_missing_values_imputed(self):
        text = ("@relation 'r: -C 1'\n@attribute l {0,1}\n@attribute f {0,1}\n@attribute g numeric\n"
                "@data\n1,1,2\n0,0,4\n1,?,?\n")
        _, data = parse_meka_arff(text)
        assert data[2].x.tolist() == [0.0, 3.0]

    def test_crlf_and_comments(self):
        meta, data = parse_meka_arff(TOY.replace("\n", "\r\n"))
        assert len(data) == 2 and meta.n_labels == 2


@st.composite
def datasets(draw):
    n_labels = draw(st.integers(1, 4))
    kinds = tuple(draw(st.lists(st.sampled_from([NUMERIC, BINARY]), min_size=1, max_size=4)))
    n = draw(st.integers(1, 12))
    rows = []
    for t in range(n):
        x = [float(draw(st.integers(0, 1))) if k == BINARY else
             draw(st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=False)) for k in kinds]
        y = draw(st.lists(st.integers(0, 1), min_size=n_labels, max_size=n_labels))
        rows.append(make_instance(x, y, TARGET, t))
    return DatasetMeta(len(kinds), kinds, n_labels, "rt"), rows


class TestRoundTrip:
    @given(datasets(), st.booleans())
    @settings(max_examples=60, deadline=None)
    def test_arff_round_trip(self, ds, sparse):
        meta, rows = ds
        meta2, rows2 = parse_meka_arff(dump_meka_arff(meta, rows, sparse=sparse))
        assert rows2 == rows
        assert meta2.feature_kinds == meta.feature_kinds
        assert meta2.n_labels == meta.n_labels

    def test_csv_round_trip(self, tmp_path):
        meta, rows = parse_meka_arff(TOY)
        write_csv(tmp_path / "d.csv", meta, rows)
        meta2, rows2 = load_dataset(tmp_path / "d.csv")
        assert rows2 == rows and meta2.n_labels == 2 and meta2.name == "toy"

    def test_csv_without_sidecar_uses_header(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f1,f2,l1,l2\n0.5,1,1,0\n")
        meta, rows = read_csv(p)
        assert meta.n_labels == 2 and rows[0].x.tolist() == [0.5, 1.0]

    def test_empty_csv(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("")
        with pytest.raises(ValueError):
            read_csv(p)


def _instances(Y):
    return [make_instance([0.0], y, TARGET, t) for t, y in enumerate(Y)]


class TestDatasetStats:
    def test_hand_count(self):
        s = dataset_stats(_instances([[1, 0], [1, 1]]))
        assert s.lden == pytest.approx(0.75)
        assert s.lir == pytest.approx(0.25)
        assert s.lsir == pytest.approx(0.25)

    def test_all_zero(self):
        assert tuple(dataset_stats(_instances([[0, 0, 0]] * 4))) == (0.0, 0.0, 0.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            dataset_stats([])

    @given(st.integers(1, 20).flatmap(
        lambda n: st.integers(1, 5).flatmap(
            lambda q: st.lists(st.lists(st.integers(0, 1), min_size=q, max_size=q), min_size=n, max_size=n))))
    @settings(max_examples=100, deadline=None)
    def test_matches_slot_counting(self, Y):
        n, q = len(Y), len(Y[0])
        lden = sum(v for row in Y for v in row) / (n * q)
        lir = sum(min(sum(r[j] for r in Y), n - sum(r[j] for r in Y)) for j in range(q)) / (n * q)
        lsir = sum(min(sum(r), q - sum(r)) for r in Y) / (n * q)
        s = dataset_stats(_instances(Y))
        assert s.lden == pytest.approx(lden, abs=1e-12)
        assert s.lir == pytest.approx(lir, abs=1e-12)
        assert s.lsir == pytest.approx(lsir, abs=1e-12)
        assert 0 <= s.lir <= 0.5 and 0 <= s.lsir <= 0.5 and 0 <= s.lden <= 1

    @given(st.lists(st.lists(st.integers(0, 1), min_size=3, max_size=3), min_size=2, max_size=20))
    @settings(max_examples=60, deadline=None)
    def test_positive_minority_gives_lir_equal_lden(self, Y):
        Y = np.array(Y)
        Y[:, Y.sum(axis=0) > len(Y) / 2] ^= 1  # make the positive class the minority everywhere
        s = dataset_stats(_instances(Y.tolist()))
        assert s.lir == s.lden


def _seq(stream, tags):
    return [make_instance([float(i)], [0], stream, i) for i, _ in enumerate(tags)]


class TestInterleave:
    def test_round_robin_sources_first(self):
        target = _seq(TARGET, "ab")
        source = _seq(StreamId.source(1), "12")
        sched = interleave(target, [source])
        assert [str(s) for s in sched.order()] == ["S1", "T", "S1", "T"]
        assert sched[1][1] == target[0] and sched[2][1] == source[1]

    def test_no_sources_is_identity(self):
        target = _seq(TARGET, "abc")
        assert [inst for _, inst in interleave(target)] == target

    def test_unequal_lengths(self):
        target = _seq(TARGET, "abcd")
        sched = interleave(target, [_seq(StreamId.source(1), "1")])
        assert [str(s) for s in sched.order()] == ["S1", "T", "T", "T", "T"]

    @pytest.mark.parametrize("policy", list(InterleavePolicy))
    def test_deterministic_and_order_preserving(self, policy):
        target = _seq(TARGET, range(30))
        sources = [_seq(StreamId.source(1), range(50)), _seq(StreamId.source(2), range(7))]
        a = interleave(target, sources, policy, seed=3)
        b = interleave(target, sources, policy, seed=3)
        assert a.dumps() == b.dumps()
        for sid in (TARGET, StreamId.source(1), StreamId.source(2)):
            ts = [inst.t for s, inst in a if s == sid]
            assert ts == sorted(ts)
        assert len(a) == 87

    def test_events_retagged_with_position(self):
        wrong = _seq(StreamId.source(4), "ab")
        sched = interleave(_seq(TARGET, "a"), [wrong])
        assert all(inst.stream == sid for sid, inst in sched)

    def test_schedule_file_replay(self):
        target = _seq(TARGET, range(5))
        sources = [_seq(StreamId.source(1), range(5))]
        a = interleave(target, sources, InterleavePolicy.RANDOM, seed=11)
        b = interleave(target, sources, order=read_schedule_order(a.dumps()))
        assert a.dumps() == b.dumps()


def test_stream_id_parse():
    assert StreamId.parse("T") == TARGET and str(StreamId.parse("S3")) == "S3"
    with pytest.raises(ValueError):
        StreamId.parse("X1")


def test_instance_rejects_non_binary_labels():
    with pytest.raises(ValueError):
        make_instance([1.0], [2])
