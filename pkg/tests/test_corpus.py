"""Annotation ingestion, timestamp partitioning, persistence."""

import json
import math

import pytest
from hypothesis import given, strategies as st

from scenevec.corpus import (
    Corpus,
    CorpusError,
    ObjectInstance,
    ingest,
    load_corpus,
    partition_of,
    save_corpus,
)


def make_corpus(frame_labels, n_timestamps=1, labels=None):
    """Corpus from label names per frame; every instance at the origin."""
    if labels is None:
        labels = sorted({name for frame in frame_labels for name in frame})
    ids = {name: i for i, name in enumerate(labels)}
    frames = [
        [ObjectInstance(label=ids[name], frame=f, cx=0.5, cy=0.5) for name in frame]
        for f, frame in enumerate(frame_labels)
    ]
    return Corpus(labels=list(labels), frames=frames, n_timestamps=n_timestamps)


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


class TestPartition:
    def test_ten_frames_three_timestamps(self):
        # ceil(10/3) = 4 frames per timestamp: {0..3}, {4..7}, {8,9}
        n_f = math.ceil(10 / 3)
        got = [partition_of(i, n_f) for i in range(10)]
        assert got == [0, 0, 0, 0, 1, 1, 1, 1, 2, 2]

    def test_exact_division(self):
        n_f = math.ceil(9 / 3)
        assert [partition_of(i, n_f) for i in range(9)] == [0, 0, 0, 1, 1, 1, 2, 2, 2]

    def test_single_timestamp(self):
        c = make_corpus([["a"], ["b"], ["a"]], n_timestamps=1)
        assert [c.timestamp_of(f) for f in range(3)] == [0, 0, 0]

    def test_corpus_partition_fields(self):
        c = make_corpus([["a", "b"]] * 10, n_timestamps=3)
        assert c.frames_per_timestamp == 4
        assert c.timestamp_of(9) == 2
        assert list(c.frames_of(0)) == [0, 1, 2, 3]
        assert list(c.frames_of(2)) == [8, 9]

    @given(st.integers(min_value=1, max_value=200), st.integers(min_value=1, max_value=20))
    def test_partition_covers_all_frames(self, n_frames, n_timestamps):
        n_timestamps = min(n_timestamps, n_frames)
        n_f = math.ceil(n_frames / n_timestamps)
        ts = [partition_of(i, n_f) for i in range(n_frames)]
        assert ts[0] == 0
        assert max(ts) <= n_timestamps - 1
        # nondecreasing, step at most 1
        assert all(0 <= b - a <= 1 for a, b in zip(ts, ts[1:]))


class TestCorpusValidation:
    def test_frequency_table(self):
        c = make_corpus([["a", "b"], ["a"], ["b"], ["b"]], n_timestamps=2)
        assert c.freq.shape == (2, 2)
        assert c.frequency(c.label_id("a"), 0) == 2
        assert c.frequency(c.label_id("b"), 1) == 2
        assert c.global_frequency(c.label_id("b")) == 3

    def test_duplicate_label_in_frame_counts_twice(self):
        c = make_corpus([["a", "a", "b"]])
        assert c.frequency(c.label_id("a"), 0) == 2

    def test_unused_label_rejected(self):
        with pytest.raises(CorpusError):
            make_corpus([["a"]], labels=["a", "ghost"])

    def test_more_timestamps_than_frames_rejected(self):
        with pytest.raises(CorpusError):
            make_corpus([["a"], ["a"]], n_timestamps=3)

    def test_empty_rejected(self):
        with pytest.raises(CorpusError):
            Corpus(labels=[], frames=[], n_timestamps=1)

    def test_frame_labels(self):
        c = make_corpus([["a", "b"], ["b"]])
        assert c.frame_labels(0) == {c.label_id("a"), c.label_id("b")}
        assert c.timestamp_labels(0) == {0, 1}

    def test_unknown_label_name(self):
        c = make_corpus([["a"]])
        with pytest.raises(KeyError):
            c.label_id("nope")


class TestIngest:
    def test_pixel_record_normalized(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        write_jsonl(path, [
            {"label": "cat", "frame": 0, "x": 320, "y": 240, "w": 640, "h": 480},
            {"label": "dog", "frame": 0, "x": 160, "y": 120, "w": 640, "h": 480},
        ])
        c = ingest(path, 1)
        cat = next(i for i in c.frames[0] if c.labels[i.label] == "cat")
        assert (cat.cx, cat.cy) == (0.5, 0.5)
        dog = next(i for i in c.frames[0] if c.labels[i.label] == "dog")
        assert (dog.cx, dog.cy) == (0.25, 0.25)

    def test_normalized_record(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        write_jsonl(path, [{"label": "a", "frame": 2, "cx": 0.1, "cy": 0.9}])
        c = ingest(path, 1)
        assert c.n_frames == 3
        assert c.frames[0] == [] and c.frames[1] == []
        assert c.frames[2][0].cx == pytest.approx(0.1)

    def test_labels_sorted(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        write_jsonl(path, [
            {"label": "zebra", "frame": 0, "cx": 0.5, "cy": 0.5},
            {"label": "ant", "frame": 0, "cx": 0.5, "cy": 0.5},
        ])
        assert ingest(path, 1).labels == ["ant", "zebra"]

    def test_out_of_bounds_center_rejected(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        write_jsonl(path, [{"label": "a", "frame": 0, "x": 700, "y": 10,
                            "w": 640, "h": 480}])
        with pytest.raises(CorpusError) as exc:
            ingest(path, 1)
        assert "line 1" in str(exc.value)

    def test_bad_json_line_identified(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        path.write_text('{"label": "a", "frame": 0, "cx": 0.5, "cy": 0.5}\nnot json\n')
        with pytest.raises(CorpusError) as exc:
            ingest(path, 1)
        assert "line 2" in str(exc.value)

    def test_negative_frame_rejected(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        write_jsonl(path, [{"label": "a", "frame": -1, "cx": 0.5, "cy": 0.5}])
        with pytest.raises(CorpusError):
            ingest(path, 1)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        path.write_text("")
        with pytest.raises(CorpusError):
            ingest(path, 1)

    def test_cx_without_cy_rejected(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        write_jsonl(path, [{"label": "a", "frame": 0, "cx": 0.5}])
        with pytest.raises(CorpusError):
            ingest(path, 1)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        c = make_corpus([["a", "b"], ["b"], ["a"]], n_timestamps=2)
        path = tmp_path / "corpus.json"
        save_corpus(c, path)
        back = load_corpus(path)
        assert back.labels == c.labels
        assert back.n_timestamps == c.n_timestamps
        assert back.n_frames == c.n_frames
        assert (back.freq == c.freq).all()
        assert back.frames == c.frames

    def test_round_trip_preserves_positions(self, tmp_path):
        frames = [[ObjectInstance(label=0, frame=0, cx=0.123456, cy=0.654321)]]
        c = Corpus(labels=["x"], frames=frames, n_timestamps=1)
        path = tmp_path / "corpus.json"
        save_corpus(c, path)
        assert load_corpus(path).frames[0][0].cx == pytest.approx(0.123456)
