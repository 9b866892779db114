from __future__ import annotations

import numpy as np
import pytest

from clair.exceptions import MatrixFormatError
from clair.textio import load_matrix, load_stacked, save_matrix, save_stacked

from conftest import random_stacked


class TestMatrixRoundTrip:
    def test_exact_round_trip(self, rng, tmp_path):
        m = rng.normal(size=(4, 7))
        path = tmp_path / "m.mat"
        save_matrix(path, m)
        np.testing.assert_array_equal(load_matrix(path), m)

    def test_extreme_values_round_trip(self, tmp_path):
        m = np.array([[1e-308, -1e300], [np.pi, 1 / 3]])
        path = tmp_path / "m.mat"
        save_matrix(path, m)
        np.testing.assert_array_equal(load_matrix(path), m)

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "m.mat"
        path.write_text("# header comment\n\n2 2\n# row comment\n1 2\n\n3 4\n")
        np.testing.assert_array_equal(load_matrix(path), [[1.0, 2.0], [3.0, 4.0]])

    def test_comment_written(self, tmp_path):
        path = tmp_path / "m.mat"
        save_matrix(path, np.eye(2), comment="identity")
        assert path.read_text().startswith("# identity\n")
        np.testing.assert_array_equal(load_matrix(path), np.eye(2))


class TestMatrixErrors:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "m.mat"
        path.write_text("")
        with pytest.raises(MatrixFormatError):
            load_matrix(path)

    def test_bad_float_names_line(self, tmp_path):
        path = tmp_path / "m.mat"
        path.write_text("2 2\n1 2\n3 oops\n")
        with pytest.raises(MatrixFormatError) as err:
            load_matrix(path)
        assert "m.mat:3" in str(err.value)

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "m.mat"
        path.write_text("1 3\n1 2\n")
        with pytest.raises(MatrixFormatError) as err:
            load_matrix(path)
        assert ":2" in str(err.value)

    def test_truncated_rows(self, tmp_path):
        path = tmp_path / "m.mat"
        path.write_text("3 2\n1 2\n")
        with pytest.raises(MatrixFormatError):
            load_matrix(path)

    def test_trailing_content(self, tmp_path):
        path = tmp_path / "m.mat"
        path.write_text("1 2\n1 2\n9 9\n")
        with pytest.raises(MatrixFormatError) as err:
            load_matrix(path)
        assert ":3" in str(err.value)


class TestStackedRoundTrip:
    def test_exact_round_trip(self, rng, tmp_path):
        s = random_stacked(rng, n_clients=4, block_rows=3, cols=5)
        path = tmp_path / "s.mat"
        save_stacked(path, s)
        loaded = load_stacked(path)
        assert loaded.n_clients == 4
        assert loaded.block_rows == 3
        np.testing.assert_array_equal(loaded.data, s.data)

    def test_header_format(self, rng, tmp_path):
        s = random_stacked(rng, n_clients=3, block_rows=2, cols=2)
        path = tmp_path / "s.mat"
        save_stacked(path, s)
        lines = path.read_text().splitlines()
        assert lines[0] == "3 2 2"
        assert lines[1] == "pair 0 1"

    def test_out_of_order_blocks_rejected(self, rng, tmp_path):
        s = random_stacked(rng, n_clients=3, block_rows=1, cols=2)
        path = tmp_path / "s.mat"
        save_stacked(path, s)
        text = path.read_text().replace("pair 0 1", "pair 1 0", 1)
        path.write_text(text)
        with pytest.raises(MatrixFormatError) as err:
            load_stacked(path)
        assert "out of order" in str(err.value) or "expected" in str(err.value)

    def test_truncated_block(self, rng, tmp_path):
        s = random_stacked(rng, n_clients=3, block_rows=2, cols=2)
        path = tmp_path / "s.mat"
        save_stacked(path, s)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(MatrixFormatError):
            load_stacked(path)
