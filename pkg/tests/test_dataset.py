import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carfir.dataset import (
    Dataset,
    TimeSeries,
    denormalize,
    load_csv,
    normalize,
    parse_range,
    split,
    write_csv,
)


def _ds(u, y):
    return Dataset(inputs=(TimeSeries("u", u),), output=TimeSeries("y", y))


class TestLoadCsv:
    def test_three_rows(self):
        src = io.BytesIO(b"t,u,y\n0,1,2\n0.12,3,4\n0.24,5,6\n")
        ds = load_csv(src, ["u", "y"], time_column="t")
        assert len(ds.series) == 2
        assert len(ds) == 3
        np.testing.assert_array_equal(ds.inputs[0].samples, [1, 3, 5])
        np.testing.assert_array_equal(ds.output.samples, [2, 4, 6])
        assert ds.output.dt == pytest.approx(0.12)
        assert ds.normalization == {}

    def test_missing_column(self):
        with pytest.raises(ValueError, match="'z'"):
            load_csv("t,u,y\n0,1,2\n", ["u", "z"])

    def test_nan_names_row(self):
        rows = "\n".join(f"{i},{i},{i}" for i in range(1, 7))
        text = "t,u,y\n" + rows + "\n7,NaN,3\n"
        with pytest.raises(ValueError, match="row 7"):
            load_csv(text, ["u", "y"])

    def test_non_numeric(self):
        with pytest.raises(ValueError, match=r"row 2, column 'y'"):
            load_csv("u,y\n1,2\n3,abc\n", ["u", "y"])

    def test_ragged(self):
        with pytest.raises(ValueError, match="row 2"):
            load_csv("u,y\n1,2\n3\n", ["u", "y"])

    def test_write_then_read(self):
        ds = _ds([0.1, 0.2, 0.3], [1.0, 2.0, 4.0])
        buf = io.StringIO()
        write_csv(ds, buf)
        back = load_csv(buf.getvalue(), ["u", "y"], time_column="t")
        np.testing.assert_array_equal(back.matrix(), ds.matrix())


class TestNormalize:
    def test_min_max(self):
        ds = normalize(_ds([0, 5, 10], [1, 2, 3]))
        np.testing.assert_array_equal(ds.inputs[0].samples, [0, 0.5, 1])
        assert ds.normalization["u"] == (0.0, 10.0)

    def test_unit_series_unchanged(self):
        ds = normalize(_ds([0, 0.25, 1], [0, 1, 0.5]))
        np.testing.assert_array_equal(ds.inputs[0].samples, [0, 0.25, 1])

    def test_zero_range(self):
        with pytest.raises(ValueError, match="zero range"):
            normalize(_ds([2, 2, 2], [0, 1, 2]))

    def test_given_params_may_exceed_unit_interval(self):
        ds = normalize(_ds([-1, 0, 11], [0, 1, 2]), {"u": (0, 10), "y": (0, 2)})
        np.testing.assert_allclose(ds.inputs[0].samples, [-0.1, 0, 1.1])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=50).filter(lambda v: max(v) - min(v) > 1e-3))
    def test_roundtrip_and_idempotence(self, values):
        raw = _ds(values, values[::-1])
        norm = normalize(raw)
        back = denormalize(norm)
        scale = max(1.0, max(abs(v) for v in values))
        np.testing.assert_allclose(back.matrix(), raw.matrix(), atol=1e-12 * scale)
        again = normalize(denormalize(norm), norm.normalization)
        np.testing.assert_allclose(again.matrix(), norm.matrix(), atol=1e-12)


class TestSplit:
    def setup_method(self):
        x = np.arange(100, dtype=float)
        self.ds = normalize(_ds(x, x ** 2))

    def test_lengths(self):
        train, tests = split(self.ds, (0, 79), [(80, 99)])
        assert len(train) == 80 and len(tests[0]) == 20
        assert tests[0].normalization == self.ds.normalization

    def test_train_only(self):
        train, tests = split(self.ds, (0, 99))
        assert tests == [] and len(train) == 100

    def test_overlap(self):
        with pytest.raises(ValueError, match="overlap"):
            split(self.ds, (0, 50), [(40, 99)])

    def test_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            split(self.ds, (0, 100))

    def test_values_bit_exact(self):
        train, (test,) = split(self.ds, (10, 19), [(50, 59)])
        assert np.array_equal(train.matrix(), self.ds.matrix()[10:20])
        assert np.array_equal(test.matrix(), self.ds.matrix()[50:60])

    def test_parse_range(self):
        assert parse_range("3:9") == (3, 9)
        with pytest.raises(ValueError):
            parse_range("3-9")


def test_unequal_lengths_rejected():
    with pytest.raises(ValueError, match="lengths"):
        _ds([1, 2, 3], [1, 2])


def test_non_finite_rejected():
    with pytest.raises(ValueError, match="non-finite"):
        TimeSeries("u", [1.0, float("inf")])
