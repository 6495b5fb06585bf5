"""Annotation ingestion, timestamp partitioning, and frequency tables.

An annotation file is UTF-8 JSON-lines: one object occurrence per line with
a string ``label``, an integer ``frame``, and either center pixel coordinates
``x``, ``y`` plus frame dimensions ``w``, ``h``, or pre-normalized ``cx``,
``cy``.  Frames are grouped into equal runs of ceil(|F| / |T|) consecutive
frames, one run per timestamp (the final run may be short).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np


class CorpusError(ValueError):
    """Malformed annotations or an impossible partition request."""


@dataclass(frozen=True)
class ObjectInstance:
    """One occurrence of a labeled object: dense label id plus normalized center."""

    label: int
    frame: int
    cx: float
    cy: float


def partition_of(frame: int, n_f: int) -> int:
    """Timestamp index owning a frame when each timestamp spans n_f frames."""
    if frame < 0:
        raise ValueError(f"frame index must be nonnegative, got {frame}")
    if n_f <= 0:
        raise ValueError(f"frames per timestamp must be positive, got {n_f}")
    return frame // n_f


@dataclass
class Corpus:
    """Frames of labeled instances with a fixed timestamp partition.

    Immutable by convention after construction; every derived structure
    (frequency table, per-frame label sets) is computed once here.
    """

    labels: list[str]
    frames: list[list[ObjectInstance]]
    n_timestamps: int
    frames_per_timestamp: int = field(init=False)
    freq: np.ndarray = field(init=False)

    def __post_init__(self):
        n_frames = len(self.frames)
        if n_frames == 0:
            raise CorpusError("corpus has no frames")
        if not self.labels:
            raise CorpusError("corpus has no instances")
        if self.n_timestamps < 1:
            raise CorpusError(f"n_timestamps must be >= 1, got {self.n_timestamps}")
        if self.n_timestamps > n_frames:
            raise CorpusError(
                f"n_timestamps={self.n_timestamps} exceeds frame count {n_frames}")
        self.frames_per_timestamp = math.ceil(n_frames / self.n_timestamps)
        freq = np.zeros((len(self.labels), self.n_timestamps), dtype=np.int64)
        for inst_list in self.frames:
            for inst in inst_list:
                t = partition_of(inst.frame, self.frames_per_timestamp)
                freq[inst.label, t] += 1
        self.freq = freq
        present = freq.sum(axis=1)
        if np.any(present == 0):
            dead = int(np.argmax(present == 0))
            raise CorpusError(f"label {self.labels[dead]!r} has no instances")

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def label_id(self, name: str) -> int:
        try:
            return self.labels.index(name)
        except ValueError:
            raise KeyError(f"unknown label {name!r}") from None

    def timestamp_of(self, frame: int) -> int:
        if not 0 <= frame < self.n_frames:
            raise IndexError(f"frame {frame} out of range")
        return partition_of(frame, self.frames_per_timestamp)

    def frames_of(self, t: int) -> range:
        """Frame indices belonging to timestamp t."""
        if not 0 <= t < self.n_timestamps:
            raise IndexError(f"timestamp {t} out of range")
        lo = t * self.frames_per_timestamp
        hi = min(lo + self.frames_per_timestamp, self.n_frames)
        return range(lo, hi)

    def frame_labels(self, frame: int) -> frozenset[int]:
        """Set of label ids occurring in one frame."""
        return frozenset(inst.label for inst in self.frames[frame])

    def timestamp_labels(self, t: int) -> frozenset[int]:
        """Set of label ids occurring anywhere in timestamp t."""
        return frozenset(np.flatnonzero(self.freq[:, t]).tolist())

    def frequency(self, label: int, t: int) -> int:
        if not 0 <= label < self.n_labels:
            raise IndexError(f"label id {label} out of range")
        if not 0 <= t < self.n_timestamps:
            raise IndexError(f"timestamp {t} out of range")
        return int(self.freq[label, t])

    def global_frequency(self, label: int) -> int:
        return int(self.freq[label].sum())


def _parse_record(line: str, lineno: int) -> tuple[str, int, float, float]:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(rec, dict):
        raise CorpusError(f"line {lineno}: record is not an object")
    try:
        label = rec["label"]
        frame = rec["frame"]
    except KeyError as exc:
        raise CorpusError(f"line {lineno}: missing key {exc.args[0]!r}") from None
    if not isinstance(label, str) or not label:
        raise CorpusError(f"line {lineno}: label must be a nonempty string")
    if not isinstance(frame, int) or frame < 0:
        raise CorpusError(f"line {lineno}: frame must be a nonnegative int")
    if "w" in rec or "h" in rec:
        try:
            x, y, w, h = (float(rec[k]) for k in ("x", "y", "w", "h"))
        except (KeyError, TypeError, ValueError):
            raise CorpusError(f"line {lineno}: pixel records need numeric x, y, w, h") from None
        if w <= 0 or h <= 0:
            raise CorpusError(f"line {lineno}: frame dimensions must be positive")
        if not (0 <= x <= w and 0 <= y <= h):
            raise CorpusError(
                f"line {lineno}: center ({x}, {y}) outside frame bounds {w}x{h} "
                f"for label {label!r}")
        cx, cy = x / w, y / h
    else:
        try:
            cx, cy = float(rec["cx"]), float(rec["cy"])
        except (KeyError, TypeError, ValueError):
            raise CorpusError(f"line {lineno}: records need x/y/w/h or cx/cy") from None
        if not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0):
            raise CorpusError(
                f"line {lineno}: normalized center ({cx}, {cy}) outside the unit "
                f"square for label {label!r}")
    return label, frame, cx, cy


def ingest(path: str | os.PathLike, n_timestamps: int) -> Corpus:
    """Read an annotation file and build the partitioned corpus.

    Label strings are re-indexed densely in sorted order, so two files with
    the same occurrences in different line orders produce the same table.
    """
    raw: list[tuple[str, int, float, float]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            raw.append(_parse_record(line, lineno))
    if not raw:
        raise CorpusError(f"{path}: no instances")
    labels = sorted({r[0] for r in raw})
    index = {name: i for i, name in enumerate(labels)}
    n_frames = max(r[1] for r in raw) + 1
    frames: list[list[ObjectInstance]] = [[] for _ in range(n_frames)]
    for name, frame, cx, cy in raw:
        frames[frame].append(ObjectInstance(index[name], frame, cx, cy))
    return Corpus(labels=labels, frames=frames, n_timestamps=n_timestamps)


def save_corpus(corpus: Corpus, path: str | os.PathLike) -> None:
    """Serialize to a single JSON document (see load_corpus)."""
    doc = {
        "labels": corpus.labels,
        "n_timestamps": corpus.n_timestamps,
        "n_frames": corpus.n_frames,
        "instances": [
            [inst.label, inst.frame, inst.cx, inst.cy]
            for frame in corpus.frames for inst in frame
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_corpus(path: str | os.PathLike) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        labels = list(doc["labels"])
        n_timestamps = int(doc["n_timestamps"])
        n_frames = int(doc["n_frames"])
        instances = doc["instances"]
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"{path}: malformed corpus snapshot ({exc})") from exc
    frames: list[list[ObjectInstance]] = [[] for _ in range(n_frames)]
    for label, frame, cx, cy in instances:
        frames[int(frame)].append(ObjectInstance(int(label), int(frame), float(cx), float(cy)))
    return Corpus(labels=labels, frames=frames, n_timestamps=n_timestamps)
