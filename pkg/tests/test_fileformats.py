"""Design/outcome/prior file round-trips and strict parsing."""

import numpy as np
import pytest

from poolkit import bloom, fileformats
from poolkit.types import DesignMatrix, Prior, TestOutcome, ValidationError


class TestDesignFiles:
    def test_roundtrip_plain(self, tmp_path):
        design = DesignMatrix(["011", "101", "110"])
        path = tmp_path / "d.txt"
        fileformats.write_design(path, design)
        loaded, layout = fileformats.read_design(path)
        assert loaded.row_ints() == design.row_ints()
        assert layout is None

    def test_roundtrip_with_bloom_block(self, tmp_path):
        layout = bloom.build_layout(7, 2, 3, seed=9)
        path = tmp_path / "d.txt"
        fileformats.write_design(path, layout.to_design_matrix(), layout)
        loaded_design, loaded_layout = fileformats.read_design(path)
        assert loaded_design.row_ints() == layout.to_design_matrix().row_ints()
        np.testing.assert_array_equal(loaded_layout.assignments, layout.assignments)
        assert loaded_layout.seed == 9

    def test_bit_order_contract(self):
        # Leftmost character is patient 0.
        design, _ = fileformats.design_from_text(
            "design v1\nn 3\nm 1\nrows\n100\n")
        assert design.rows[0].bits == (1, 0, 0)

    def test_row_count_mismatch(self):
        with pytest.raises(ValidationError):
            fileformats.design_from_text("design v1\nn 2\nm 2\nrows\n10\n")

    def test_row_length_mismatch(self):
        with pytest.raises(ValidationError):
            fileformats.design_from_text("design v1\nn 3\nm 1\nrows\n10\n")

    def test_header_required(self):
        with pytest.raises(ValidationError):
            fileformats.design_from_text("n 2\nm 1\nrows\n10\n")


class TestOutcomeFiles:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "o.txt"
        fileformats.write_outcome(path, TestOutcome("0101"))
        assert fileformats.read_outcome(path) == TestOutcome("0101")

    def test_length_checked(self):
        with pytest.raises(ValidationError):
            fileformats.outcome_from_text("outcome v1\nm 3\nbits 01\n")


class TestPriorArgument:
    def test_uniform(self):
        prior = fileformats.parse_prior_argument("uniform:0.05", 4)
        assert prior == Prior([0.05] * 4)

    def test_file(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("0.1\n0.2\n0.3\n")
        assert fileformats.parse_prior_argument(str(path), 3) == Prior([0.1, 0.2, 0.3])

    def test_file_length_mismatch(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("0.1\n0.2\n")
        with pytest.raises(ValidationError):
            fileformats.parse_prior_argument(str(path), 3)
