import numpy as np
import pytest

from sqalab.errors import SqaLabError
from sqalab.features import (
    align_features,
    check_feature_matrices,
    check_feature_matrix,
    read_features_csv,
    render_features_csv,
    write_features_csv,
)


class TestChecks:
    def test_valid_matrix_passes(self):
        m = check_feature_matrix([[1.0, 2.0], [3.0, 4.0]])
        assert m.shape == (2, 2)
        assert m.dtype == np.float64

    def test_wrong_ndim(self):
        with pytest.raises(SqaLabError) as ei:
            check_feature_matrix([1.0, 2.0])
        assert ei.value.code == "features_format"

    def test_empty(self):
        with pytest.raises(SqaLabError):
            check_feature_matrix(np.zeros((0, 3)))
        with pytest.raises(SqaLabError):
            check_feature_matrix(np.zeros((3, 0)))

    def test_non_finite(self):
        with pytest.raises(SqaLabError, match="non-finite"):
            check_feature_matrix([[1.0, np.nan]])
        with pytest.raises(SqaLabError):
            check_feature_matrix([[np.inf, 0.0]])

    def test_matrices_accepts_3d_array(self):
        X = np.arange(24, dtype=float).reshape(2, 3, 4)
        mats = check_feature_matrices(X)
        assert len(mats) == 2
        assert mats[0].shape == (3, 4)

    def test_matrices_width_mismatch(self):
        with pytest.raises(SqaLabError, match="inconsistent feature widths"):
            check_feature_matrices([np.zeros((2, 3)), np.zeros((2, 4))])

    def test_matrices_empty_sequence(self):
        with pytest.raises(SqaLabError):
            check_feature_matrices([])


class TestRoundTrip:
    def test_exact_round_trip(self):
        rng = np.random.default_rng(7)
        features = {
            "b": rng.standard_normal((3, 4)),
            "a": rng.standard_normal((5, 4)) * 1e-7,
            "c": rng.standard_normal((1, 4)) * 1e9,
        }
        text = render_features_csv(features)
        back = read_features_csv__from_text(text)
        assert sorted(back) == ["a", "b", "c"]
        for sid, m in features.items():
            assert np.array_equal(back[sid], m), sid

    def test_header_and_ordering(self):
        text = render_features_csv({"z": [[1.0, 2.0]], "a": [[3.0, 4.0]]})
        lines = text.strip().split("\n")
        assert lines[0] == "sample_id,frame_idx,f0,f1"
        assert lines[1].startswith("a,0,")
        assert lines[2].startswith("z,0,")

    def test_file_round_trip(self, tmp_path):
        features = {"s": np.array([[0.5, -1.25], [2.0, 3.5]])}
        path = tmp_path / "features.csv"
        write_features_csv(path, features)
        back = read_features_csv(path)
        assert np.array_equal(back["s"], features["s"])

    def test_render_width_mismatch(self):
        with pytest.raises(SqaLabError, match="inconsistent feature widths"):
            render_features_csv({"a": [[1.0]], "b": [[1.0, 2.0]]})

    def test_render_empty(self):
        with pytest.raises(SqaLabError):
            render_features_csv({})


def read_features_csv__from_text(text: str):
    import io

    return read_features_csv(io.StringIO(text))


class TestReadErrors:
    def test_bad_header(self):
        with pytest.raises(SqaLabError, match="header"):
            read_features_csv__from_text("sample,frame,f0\na,0,1.0\n")

    def test_empty_file(self):
        with pytest.raises(SqaLabError, match="header"):
            read_features_csv__from_text("")

    def test_header_only(self):
        with pytest.raises(SqaLabError, match="no data rows"):
            read_features_csv__from_text("sample_id,frame_idx,f0\n")

    def test_ragged_row(self):
        text = "sample_id,frame_idx,f0,f1\na,0,1.0,2.0\na,1,3.0\n"
        with pytest.raises(SqaLabError, match="line 3") as ei:
            read_features_csv__from_text(text)
        assert ei.value.code == "features_format"

    def test_duplicate_frame(self):
        text = "sample_id,frame_idx,f0\na,0,1.0\na,0,2.0\n"
        with pytest.raises(SqaLabError, match="duplicate frame_idx 0 in sample 'a'"):
            read_features_csv__from_text(text)

    def test_frame_gap_names_sample_and_index(self):
        text = "sample_id,frame_idx,f0\na,0,1.0\na,2,2.0\n"
        with pytest.raises(SqaLabError, match="sample 'a'.*gap at index 1"):
            read_features_csv__from_text(text)

    def test_non_numeric_value(self):
        text = "sample_id,frame_idx,f0\na,0,oops\n"
        with pytest.raises(SqaLabError, match="line 2"):
            read_features_csv__from_text(text)

    def test_non_finite_value(self):
        text = "sample_id,frame_idx,f0\na,0,nan\n"
        with pytest.raises(SqaLabError, match="non-finite"):
            read_features_csv__from_text(text)

    def test_negative_index(self):
        text = "sample_id,frame_idx,f0\na,-1,1.0\n"
        with pytest.raises(SqaLabError, match="negative"):
            read_features_csv__from_text(text)


class TestAlign:
    def test_orders_by_ids(self):
        features = {"a": np.ones((1, 2)), "b": np.zeros((2, 2))}
        mats = align_features(features, ["b", "a"])
        assert mats[0].shape == (2, 2)
        assert np.all(mats[1] == 1)

    def test_missing_listed_sorted(self):
        with pytest.raises(SqaLabError, match="missing features for 2 sample") as ei:
            align_features({"a": np.ones((1, 1))}, ["c", "a", "b"])
        assert ei.value.code == "missing_data"
        assert "b, c" in str(ei.value)
