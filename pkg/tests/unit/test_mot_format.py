"""Unit tests for MOTChallenge text files."""
import numpy as np
import pytest

from app.io import MotFormatError, format_number, group_frames, parse_mot, read_mot, render_mot, write_mot
from app.io.mot_format import embeddings_path, write_embeddings
from app.models import MotLine
from app.tracking import KalmanBoxFilter, Track

CANONICAL = (
    "1,1,10,20,30,40,1,-1,-1,-1\n"
    "1,2,100.5,20,30.25,40,0.875,-1,-1,-1\n"
    "2,1,12,21,30,40,1,-1,-1,-1\n"
)


class TestParse:
    """Reading lines."""

    def test_example_line(self):
        (line,) = parse_mot("1,2,10,20,30,40,1,-1,-1,-1")
        assert (line.frame, line.id) == (1, 2)
        assert line.box == (10.0, 20.0, 40.0, 60.0)
        assert line.conf == 1.0

    def test_field_count(self):
        with pytest.raises(MotFormatError, match="line 2") as exc_info:
            parse_mot("1,1,10,20,30,40,1,-1,-1,-1\n1,2,3,4,5,6\n")
        assert exc_info.value.line_number == 2

    def test_blank_lines_counted(self):
        with pytest.raises(MotFormatError) as exc_info:
            parse_mot("1,1,10,20,30,40,1,-1,-1,-1\n\nbad\n")
        assert exc_info.value.line_number == 3

    def test_non_numeric(self):
        with pytest.raises(MotFormatError, match="bb_left"):
            parse_mot("1,1,abc,20,30,40,1,-1,-1,-1")

    def test_fractional_frame(self):
        with pytest.raises(MotFormatError, match="integer"):
            parse_mot("1.5,1,10,20,30,40,1,-1,-1,-1")

    def test_integral_float_ids_accepted(self):
        (line,) = parse_mot("3.0,7.0,10,20,30,40,1,-1,-1,-1")
        assert (line.frame, line.id) == (3, 7)

    def test_non_positive_extent(self):
        with pytest.raises(MotFormatError, match="extent"):
            parse_mot("1,1,10,20,0,40,1,-1,-1,-1")

    def test_frame_must_be_positive(self):
        with pytest.raises(MotFormatError):
            parse_mot("0,1,10,20,30,40,1,-1,-1,-1")


class TestWrite:
    """Rendering and files."""

    def test_format_number(self):
        assert format_number(10.0) == "10"
        assert format_number(0.875) == "0.875"
        assert format_number(1.23456) == "1.235"
        assert format_number(-0.0001) == "0"
        assert format_number(-1.0) == "-1"

    def test_canonical_round_trip(self, tmp_path):
        source = tmp_path / "in.txt"
        source.write_text(CANONICAL)
        target = tmp_path / "out.txt"
        assert write_mot(read_mot(source), target) == 3
        assert target.read_text() == CANONICAL

    def test_sorted_by_frame_then_id(self):
        lines = [MotLine.from_box(2, 1, (0, 0, 1, 1)), MotLine.from_box(1, 5, (0, 0, 1, 1)), MotLine.from_box(1, 2, (0, 0, 1, 1))]
        rendered = render_mot(lines).splitlines()
        assert [row.split(",")[:2] for row in rendered] == [["1", "2"], ["1", "5"], ["2", "1"]]

    def test_write_tracks(self, tmp_path):
        track = Track.spawn(4, 1, (0.0, 0.0, 10.0, 20.0), None, 0.75, KalmanBoxFilter())
        track.observe(2, (1.0, 0.0, 11.0, 20.0), None, 0.5)
        path = tmp_path / "tracks.txt"
        assert write_mot([track], path) == 2
        assert path.read_text() == "1,4,0,0,10,20,0.75,-1,-1,-1\n2,4,1,0,10,20,0.5,-1,-1,-1\n"

    def test_write_empty(self, tmp_path):
        path = tmp_path / "empty.txt"
        assert write_mot([], path) == 0
        assert path.read_text() == ""

    def test_group_frames(self):
        grouped = group_frames(parse_mot(CANONICAL))
        assert list(grouped) == [1, 2]
        assert [line.id for line in grouped[1]] == [1, 2]

    def test_embeddings_sidecar(self, tmp_path):
        det = tmp_path / "det.txt"
        assert embeddings_path(det) == tmp_path / "det_embeddings.npy"
        path = write_embeddings(np.eye(3), det)
        np.testing.assert_array_equal(np.load(path), np.eye(3))
