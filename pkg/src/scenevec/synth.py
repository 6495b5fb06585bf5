"""Deterministic synthetic scenarios emitting annotation records.

Three generators: a 5x5 symbol grid whose three character sets are the
clustering ground truth, a sequential 4-symbol reel whose block order is the
neighborhood ground truth, and a school scene with a localized event, a
person of interest who later reappears, and stable background objects.

All produce plain annotation dicts (the JSON-lines schema of the corpus
module) plus a ground-truth document, and are reproducible per seed.
"""

from __future__ import annotations

import json
import math
import os
import string

import numpy as np

UPPER = tuple(string.ascii_uppercase)
LOWER = tuple(string.ascii_lowercase)
DIGITS = tuple(string.digits)


def _blocks_of(symbols: tuple[str, ...]) -> list[tuple[str, ...]]:
    """Split a symbol set into runs of four with a trailing short run."""
    return [tuple(symbols[i:i + 4]) for i in range(0, len(symbols), 4)]


# Frame reel for the sequential scenario: {0,1,2,3},{4,5,6,7},{8,9},{A,B,C,D},
# ..., {Y,Z}, {a,b,c,d}, ..., {y,z}; 17 blocks cover all 62 symbols.
SEQ4_BLOCKS: tuple[tuple[str, ...], ...] = tuple(
    _blocks_of(DIGITS) + _blocks_of(UPPER) + _blocks_of(LOWER))

GRID_SETS: tuple[tuple[str, ...], ...] = (UPPER, LOWER, DIGITS)


def write_annotations(records: list[dict], path: str | os.PathLike) -> None:
    """One JSON object per line, field order fixed for reproducible bytes."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def write_ground_truth(truth: dict, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)


def _record(label: str, frame: int, cx: float, cy: float) -> dict:
    return {"label": label, "frame": frame,
            "cx": round(float(np.clip(cx, 0.0, 1.0)), 6),
            "cy": round(float(np.clip(cy, 0.0, 1.0)), 6)}


def gen_grid5x5(n_frames: int, seed: int) -> tuple[list[dict], dict]:
    """Frames of 12 symbols on a 5x5 cell grid.

    Each frame draws 4 symbols from each of the three sets and lays every
    set out in 4 side-by-side cells of its own row, so same-set symbols stay
    close and different sets stay apart.  Centers carry a small jitter (5%
    of the cell size).
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    rng = np.random.default_rng(seed)
    cell = 1.0 / 5.0
    jitter = 0.05 * cell
    records: list[dict] = []
    for f in range(n_frames):
        rows = rng.choice(5, size=3, replace=False)
        offsets = rng.integers(0, 2, size=3)
        for s, symbols in enumerate(GRID_SETS):
            chosen = rng.choice(len(symbols), size=4, replace=False)
            for slot, idx in enumerate(chosen):
                col = offsets[s] + slot
                cx = (col + 0.5) * cell + rng.uniform(-jitter, jitter)
                cy = (rows[s] + 0.5) * cell + rng.uniform(-jitter, jitter)
                records.append(_record(symbols[idx], f, cx, cy))
    classes = {sym: s for s, symbols in enumerate(GRID_SETS) for sym in symbols}
    truth = {"scenario": "grid5x5", "classes": classes}
    return records, truth


def gen_seq4(n_frames: int, seed: int) -> tuple[list[dict], dict]:
    """Frames cycling through the 17 sequential symbol blocks.

    Block members sit in side-by-side positions on a horizontal strip; the
    short blocks ({8,9}, {Y,Z}, {y,z}) use the first positions.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    rng = np.random.default_rng(seed)
    slot_w = 1.0 / 4.0
    jitter = 0.05 * slot_w
    records: list[dict] = []
    for f in range(n_frames):
        block = SEQ4_BLOCKS[f % len(SEQ4_BLOCKS)]
        for slot, sym in enumerate(block):
            cx = (slot + 0.5) * slot_w + rng.uniform(-jitter, jitter)
            cy = 0.5 + rng.uniform(-jitter, jitter)
            records.append(_record(sym, f, cx, cy))
    blocks = {sym: b for b, members in enumerate(SEQ4_BLOCKS) for sym in members}
    sets = {sym: s for s, symbols in enumerate(GRID_SETS) for sym in symbols}
    truth = {"scenario": "seq4", "n_blocks": len(SEQ4_BLOCKS),
             "blocks": blocks, "classes": sets}
    return records, truth


_KITCHEN = (
    ("stove", (0.20, 0.25)),
    ("fridge", (0.08, 0.40)),
    ("sink", (0.35, 0.22)),
    ("counter", (0.30, 0.40)),
    ("chef", (0.25, 0.55)),
    ("pot", (0.21, 0.30)),
    ("plate", (0.40, 0.45)),
    ("knife", (0.38, 0.38)),
)

_STREET = (
    ("car", (0.60, 0.70)),
    ("bus", (0.80, 0.68)),
    ("road-sign", (0.55, 0.50)),
    ("crosswalk", (0.70, 0.85)),
    ("cyclist", (0.65, 0.60)),
    ("hydrant", (0.52, 0.78)),
    ("storefront", (0.88, 0.50)),
    ("dog", (0.75, 0.55)),
)


def gen_two_scene(n_frames: int, n_timestamps: int,
                  seed: int) -> tuple[list[dict], dict]:
    """Two interleaved scenes with disjoint label rosters.

    Even frames show a kitchen, odd frames a street; a frame never mixes
    the rosters, so membership is fully recoverable from co-occurrence.
    Each frame drops a random subset of its roster (at least five labels)
    around fixed anchors; the first frame of each scene shows the full
    roster so every label is guaranteed to occur.
    """
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2 to show both scenes")
    if n_timestamps < 1:
        raise ValueError("n_timestamps must be >= 1")
    rng = np.random.default_rng(seed)
    records: list[dict] = []
    for f in range(n_frames):
        roster = _KITCHEN if f % 2 == 0 else _STREET
        if f < 2:
            chosen = list(range(len(roster)))
        else:
            take = int(rng.integers(5, len(roster) + 1))
            chosen = sorted(rng.choice(len(roster), size=take, replace=False))
        for idx in chosen:
            name, (ax, ay) = roster[idx]
            records.append(_record(name, f,
                                   ax + rng.uniform(-0.03, 0.03),
                                   ay + rng.uniform(-0.03, 0.03)))
    classes = {name: "kitchen" for name, _ in _KITCHEN}
    classes.update({name: "street" for name, _ in _STREET})
    truth = {"scenario": "two_scene", "n_timestamps": n_timestamps,
             "classes": classes}
    return records, truth


# School scene layout: anchor points on the unit square.  The event corner
# is kept clear of fixed scenery so the event/person-of-interest geometry is
# dominated by their own pairing rather than the background cluster.
_SCHOOL_GATE = (0.50, 0.30)
_EVENT_SPOT = (0.70, 0.58)

_SCENERY = (
    ("school", (0.50, 0.15)),
    ("gate", _SCHOOL_GATE),
    ("building-a", (0.12, 0.22)),
    ("building-b", (0.88, 0.22)),
    ("office-worker", (0.92, 0.45)),
    ("shop", (0.15, 0.55)),
    ("kiosk", (0.30, 0.70)),
    ("tree-a", (0.08, 0.80)),
    ("tree-b", (0.95, 0.85)),
    ("lamp-post", (0.35, 0.40)),
    ("fountain", (0.25, 0.25)),
    ("bus-stop", (0.10, 0.95)),
)

# Occupancy and spacing of the event / person-of-interest thread.  The two
# labels always share frames with matched counts: 45% of frames in the echo
# timestamps 5, 6, 8 and 60% in the return timestamp 7, standing 0.19 apart
# in the echoes but 0.327 apart at the return.
_ECHO_T = (5, 6, 8)
_RETURN_T = 7
_ECHO_GAP = 0.19
_RETURN_GAP = 0.327


def gen_school_event(n_frames: int, n_timestamps: int,
                     seed: int) -> tuple[list[dict], dict]:
    """School scenario: a localized incident at timestamp 3 whose principals
    linger through the later timestamps.

    Fixed scenery, cars, and pedestrians appear in every frame.  At
    timestamp 3 the students and the person of interest crowd the event
    spot; afterwards the event scene and the person of interest recur
    together at reduced, matched rates (45% of frames in timestamps 5, 6,
    and 8; 60% in timestamp 7) with a wider separation on the return.  At
    timestamp 7 the students only appear in frames without the person of
    interest, so the two never co-occur there.  Police attend at timestamp
    4; trucks pass through early timestamps always and mid ones sometimes.
    """
    if n_timestamps < 9:
        raise ValueError("school scenario needs n_timestamps >= 9")
    if n_frames < n_timestamps:
        raise ValueError("n_frames must cover every timestamp")
    rng = np.random.default_rng(seed)
    n_f = math.ceil(n_frames / n_timestamps)
    records: list[dict] = []

    def put(label: str, f: int, anchor: tuple[float, float], spread: float = 0.02):
        cx = anchor[0] + rng.uniform(-spread, spread)
        cy = anchor[1] + rng.uniform(-spread, spread)
        records.append(_record(label, f, cx, cy))

    for f in range(n_frames):
        t = f // n_f
        j = f - t * n_f
        for name, anchor in _SCENERY:
            put(name, f, anchor)
        put("car", f, (rng.uniform(0.1, 0.9), 0.85))
        put("pedestrian-a", f, (rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)),
            spread=0.0)
        put("pedestrian-b", f, (rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)),
            spread=0.0)

        incident = False
        if t == 3:
            incident = True
            poi_at = (_EVENT_SPOT[0] + 0.04, _EVENT_SPOT[1] + 0.03)
        elif t in _ECHO_T and j % 20 < 9:
            incident = True
            poi_at = (_EVENT_SPOT[0], _EVENT_SPOT[1] + _ECHO_GAP)
        elif t == _RETURN_T and j % 5 < 3:
            incident = True
            poi_at = (_EVENT_SPOT[0], _EVENT_SPOT[1] + _RETURN_GAP)
        if incident:
            put("malicious-event", f, _EVENT_SPOT, spread=0.01)
            put("person-of-interest", f, poi_at, spread=0.01)

        if t == 3:
            # field trip past the event: students crowd the spot too
            put("student", f, (_EVENT_SPOT[0] - 0.08, _EVENT_SPOT[1] + 0.06))
        elif t == _RETURN_T:
            if not incident:
                put("student", f, _SCHOOL_GATE)
        else:
            put("student", f, _SCHOOL_GATE)

        if t == 4:
            put("police", f, _EVENT_SPOT)
        if t in (0, 1):
            put("truck", f, (rng.uniform(0.2, 0.8), 0.72))
        elif t in _ECHO_T and rng.random() < 0.4:
            put("truck", f, (rng.uniform(0.2, 0.8), 0.72))

    freq: dict[str, list[int]] = {}
    for rec in records:
        t = rec["frame"] // n_f
        freq.setdefault(rec["label"], [0] * n_timestamps)[t] += 1
    classes = {name: 0 for name, _ in _SCENERY}
    classes.update({"car": 1, "pedestrian-a": 1, "pedestrian-b": 1,
                    "student": 1, "truck": 1, "police": 1,
                    "malicious-event": 2, "person-of-interest": 2})
    truth = {
        "scenario": "school_event",
        "n_timestamps": n_timestamps,
        "frames_per_timestamp": n_f,
        "roles": {"event": "malicious-event", "poi": "person-of-interest",
                  "student": "student", "police": "police", "school": "school"},
        "classes": classes,
        "frequencies": freq,
    }
    return records, truth
