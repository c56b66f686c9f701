import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from spsafs.types import (
    CLASSIFICATION,
    REGRESSION,
    Dataset,
    FeatureMask,
    IterationRecord,
    RunTrace,
    as_weights,
    bound,
    round_mask,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


class TestFeatureMask:
    def test_indices_round_trip(self):
        m = FeatureMask.from_indices([2, 3, 5], 6)
        assert m.bits == (0, 0, 1, 1, 0, 1)
        assert m.indices == (2, 3, 5)
        assert m.count == 3 and not m.is_empty

    @given(st.integers(1, 40).flatmap(lambda p: st.tuples(st.just(p), st.sets(st.integers(0, p - 1)))))
    def test_index_set_round_trip(self, case):
        p, idx = case
        m = FeatureMask.from_indices(idx, p)
        assert set(m.indices) == idx
        assert FeatureMask.from_indices(m.indices, p) == m

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=70))
    def test_hex_round_trip(self, bits):
        m = FeatureMask(tuple(bits))
        assert FeatureMask.from_hex(m.to_hex(), m.p) == m
        assert len(m.to_hex()) == (m.p + 3) // 4

    def test_hex_bit_order(self):
        assert FeatureMask.from_indices([0], 8).to_hex() == "01"
        assert FeatureMask.from_indices([4], 8).to_hex() == "10"

    def test_rejects_bad_bits(self):
        with pytest.raises(ValueError):
            FeatureMask((0, 2))
        with pytest.raises(ValueError):
            FeatureMask(())
        with pytest.raises(IndexError):
            FeatureMask.from_indices([6], 6)
        with pytest.raises(ValueError):
            FeatureMask.from_hex("ff", 4)

    def test_immutable_and_hashable(self):
        m = FeatureMask.full(3)
        with pytest.raises(AttributeError):
            m.bits = (0, 0, 0)
        assert m.with_bit(1, 0) == FeatureMask((1, 0, 1))
        assert m == FeatureMask.full(3)
        assert len({m, FeatureMask.full(3)}) == 1


class TestBoundAndRound:
    def test_in_box_unchanged(self):
        np.testing.assert_array_equal(bound([0.45, 0.55]), [0.45, 0.55])

    def test_clamps(self):
        np.testing.assert_array_equal(bound([-0.2, 1.3]), [0.0, 1.0])

    @given(arrays(np.float64, st.integers(1, 20), elements=finite))
    def test_idempotent(self, v):
        np.testing.assert_array_equal(bound(bound(v)), bound(v))

    @pytest.mark.parametrize(
        "w",
        [[0.45, 0.45, 0.55, 0.55, 0.45, 0.55], [0.351, 0.451, 0.649, 0.549, 0.451, 0.649]],
    )
    def test_worked_example_rounding(self, w):
        assert round_mask(w).bits == (0, 0, 1, 1, 0, 1)

    def test_half_rounds_up(self):
        assert round_mask([0.5]).bits == (1,)

    @given(arrays(np.float64, st.integers(1, 20), elements=finite))
    def test_round_of_bound_is_total(self, v):
        m = round_mask(bound(v))
        assert m.p == len(v)

    def test_as_weights_validates(self):
        with pytest.raises(ValueError):
            as_weights([0.1, np.nan])
        with pytest.raises(ValueError):
            as_weights([0.1, 0.2], p=3)


class TestDataset:
    def test_defaults_and_read_only(self):
        ds = Dataset(np.zeros((3, 2)), [0, 1, 0], (), CLASSIFICATION)
        assert ds.feature_names == ("x1", "x2")
        assert ds.labels == (0, 1) and ds.n_classes == 2
        with pytest.raises(ValueError):
            ds.x[0, 0] = 1.0

    @pytest.mark.parametrize(
        "x, y, kind",
        [
            (np.zeros((1, 2)), [0], CLASSIFICATION),
            (np.zeros((3, 2)), [1, 1, 1], CLASSIFICATION),
            (np.array([[0.0], [np.nan]]), [0, 1], CLASSIFICATION),
            (np.zeros((2, 2)), [0.0, np.inf], REGRESSION),
            (np.zeros((2, 2)), [0.0, 1.0, 2.0], REGRESSION),
            (np.zeros((2, 2)), [0.0, 1.0], "ranking"),
        ],
    )
    def test_rejects_invalid(self, x, y, kind):
        with pytest.raises(ValueError):
            Dataset(x, y, (), kind)

    def test_columns(self):
        ds = Dataset(np.arange(6.0).reshape(2, 3), [0.0, 1.0], (), REGRESSION)
        np.testing.assert_array_equal(ds.columns(FeatureMask((1, 0, 1))), [[0, 2], [3, 5]])
        with pytest.raises(ValueError):
            ds.columns(FeatureMask((1, 0)))


def _record(k, yp, ym):
    m = FeatureMask((1, 0))
    return IterationRecord(k, yp, ym, 0.1, m, m.with_bit(1, 1), (0.5, 0.5))


class TestRunTrace:
    def test_best_and_running_minimum(self):
        t = RunTrace()
        for k, (yp, ym) in enumerate([(0.4, 0.5), (0.6, 0.3), (0.35, 0.7)]):
            t.add(_record(k, yp, ym))
        assert t.best_loss == 0.3
        assert t.best_mask == FeatureMask((1, 1))
        np.testing.assert_array_equal(t.running_best(), [0.4, 0.3, 0.3])
        assert t.iterations_run == 3

    def test_order_enforced(self):
        t = RunTrace()
        with pytest.raises(ValueError):
            t.add(_record(1, 0.1, 0.2))
        t.add(_record(0, 0.1, 0.2))
        with pytest.raises(ValueError):
            t.add(_record(2, 0.1, 0.2))

    def test_wall_time_ignored_by_equality(self):
        a, b = RunTrace(wall_time=1.0), RunTrace(wall_time=2.0)
        assert a == b
