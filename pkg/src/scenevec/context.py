"""Training-pair extraction under the three context-window mechanisms.

Positives come from (1) instances sharing a frame, (2) instances in frames
within a small window around the reference frame whose label is absent from
the reference frame, and (3) instances in neighboring timestamps whose label
is absent from the whole reference timestamp.  Negatives are labels drawn by
excess frequency outside the reference window and carry the ceiling
discrepancy of 1.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus
from .scoring import DEFAULT_SIGMA_T, DiffusionKernel, DiscrepancyScorer

log = logging.getLogger(__name__)

SAME_FRAME = "same_frame"
SURROUNDING_FRAMES = "surrounding_frames"
NEIGHBOR_TIMESTAMPS = "neighbor_timestamps"
MECHANISMS = (SAME_FRAME, SURROUNDING_FRAMES, NEIGHBOR_TIMESTAMPS)


@dataclass(frozen=True)
class TrainingPair:
    """Reference/context labels with their discrepancy target.

    t_ref is None for static training data.  ref_frame records which frame
    the reference instance came from; it never reaches the pair file and only
    feeds the exclusion window of static negative sampling.
    """

    ref: int
    ctx: int
    t_ref: int | None
    delta: float
    kind: str = "positive"
    ref_frame: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ContextConfig:
    mechanisms: tuple[str, ...] = (SAME_FRAME,)
    w_f: int = 1
    w_t: int = 1
    negatives_per_positive: int = 0
    frame_diffusion: bool = True

    def __post_init__(self):
        for m in self.mechanisms:
            if m not in MECHANISMS:
                raise ValueError(f"unknown context mechanism {m!r}")
        if SURROUNDING_FRAMES in self.mechanisms and self.w_f < 1:
            raise ValueError("surrounding_frames requires w_f >= 1")
        if NEIGHBOR_TIMESTAMPS in self.mechanisms and self.w_t < 1:
            raise ValueError("neighbor_timestamps requires w_t >= 1")
        if self.w_f < 0 or self.w_t < 0:
            raise ValueError("window radii cannot be negative")
        if self.negatives_per_positive < 0:
            raise ValueError("negatives_per_positive cannot be negative")


def pairs_same_frame(corpus: Corpus, scorer: DiscrepancyScorer, *,
                     temporal: bool = True) -> list[TrainingPair]:
    """Ordered pairs of distinct-label instances sharing a frame."""
    out: list[TrainingPair] = []
    for f, insts in enumerate(corpus.frames):
        t = corpus.timestamp_of(f) if temporal else None
        for o_r in insts:
            for o_c in insts:
                if o_c.label == o_r.label:
                    continue
                out.append(TrainingPair(o_r.label, o_c.label, t,
                                        scorer.pair(o_r, o_c), ref_frame=f))
    return out


def pairs_surrounding_frames(corpus: Corpus, w_f: int, scorer: DiscrepancyScorer, *,
                             frame_diffusion: bool = True,
                             sigma_t: float = DEFAULT_SIGMA_T,
                             temporal: bool = True) -> list[TrainingPair]:
    """Pairs against instances of nearby frames, skipping labels the
    reference frame already holds.

    Distances overlay both normalized frames on one unit square.  With
    frame_diffusion on, delta is damped by (1 - gamma) over the frame offset
    so pairs from closer frames read as more contextual.
    """
    if w_f < 0:
        raise ValueError("w_f cannot be negative")
    if w_f == 0:
        return []
    kernel = DiffusionKernel(sigma_t)
    out: list[TrainingPair] = []
    n = corpus.n_frames
    for f, insts in enumerate(corpus.frames):
        if not insts:
            continue
        t = corpus.timestamp_of(f) if temporal else None
        local = corpus.frame_labels(f)
        lo, hi = max(0, f - w_f), min(n - 1, f + w_f)
        window = [(g, [o for o in corpus.frames[g] if o.label not in local])
                  for g in range(lo, hi + 1) if g != f]
        for o_r in insts:
            for g, cands in window:
                if not cands:
                    continue
                damp = kernel.inverse_factor(f, g) if frame_diffusion else 1.0
                for o_c in cands:
                    delta = scorer.pair(o_r, o_c) * damp
                    out.append(TrainingPair(o_r.label, o_c.label, t,
                                            min(max(delta, 0.0), 1.0), ref_frame=f))
    return out


def pairs_neighbor_timestamps(corpus: Corpus, w_t: int, scorer: DiscrepancyScorer, *,
                              sigma_t: float = DEFAULT_SIGMA_T) -> list[TrainingPair]:
    """Pairs against instances of nearby timestamps, skipping labels present
    anywhere in the reference timestamp.

    delta = score * (1 - gamma(t_r, t_c)), clamped to [0, 1].  Always
    temporal: the mechanism is defined on the timestamp partition.
    """
    if w_t < 0:
        raise ValueError("w_t cannot be negative")
    if corpus.n_timestamps < 2:
        raise ValueError("neighbor-timestamp pairs need at least 2 timestamps")
    if w_t == 0:
        return []
    kernel = DiffusionKernel(sigma_t)
    out: list[TrainingPair] = []
    for t_r in range(corpus.n_timestamps):
        local = corpus.timestamp_labels(t_r)
        lo = max(0, t_r - w_t)
        hi = min(corpus.n_timestamps - 1, t_r + w_t)
        window: list[tuple[float, list]] = []
        for t_c in range(lo, hi + 1):
            if t_c == t_r:
                continue
            damp = kernel.inverse_factor(t_r, t_c)
            cands = [o for g in corpus.frames_of(t_c)
                     for o in corpus.frames[g] if o.label not in local]
            if cands:
                window.append((damp, cands))
        if not window:
            continue
        for f in corpus.frames_of(t_r):
            for o_r in corpus.frames[f]:
                for damp, cands in window:
                    for o_c in cands:
                        delta = scorer.pair(o_r, o_c) * damp
                        out.append(TrainingPair(o_r.label, o_c.label, t_r,
                                                min(max(delta, 0.0), 1.0),
                                                ref_frame=f))
    return out


def negative_samples(corpus: Corpus, positives: list[TrainingPair], n_neg: int,
                     rng_seed: int, *, w_f: int = 0) -> list[TrainingPair]:
    """Interleave each positive with n_neg frequency-weighted negatives.

    A candidate label i is drawn with probability proportional to its excess
    frequency outside the reference window: f(i) - f(i, t_r) for temporal
    positives, the global f(i) for static ones.  The reference label and
    every label inside the reference window (the reference timestamp, or the
    reference frame plus w_f neighbors for static data) are excluded.  When
    every candidate weight is zero the positive passes through alone.
    """
    if n_neg < 0:
        raise ValueError("n_neg cannot be negative")
    if n_neg == 0:
        return list(positives)
    rng = np.random.default_rng(rng_seed)
    total = corpus.freq.sum(axis=1).astype(np.float64)
    n_labels = corpus.n_labels

    t_weights: dict[int, np.ndarray] = {}
    f_weights: dict[int, np.ndarray] = {}

    def temporal_weights(t_r: int) -> np.ndarray:
        w = t_weights.get(t_r)
        if w is None:
            w = total - corpus.freq[:, t_r].astype(np.float64)
            w[list(corpus.timestamp_labels(t_r))] = 0.0
            t_weights[t_r] = w
        return w

    def static_weights(frame: int | None) -> np.ndarray:
        key = -1 if frame is None else frame
        w = f_weights.get(key)
        if w is None:
            w = total.copy()
            if frame is not None:
                lo, hi = max(0, frame - w_f), min(corpus.n_frames - 1, frame + w_f)
                for g in range(lo, hi + 1):
                    w[list(corpus.frame_labels(g))] = 0.0
            f_weights[key] = w
        return w

    out: list[TrainingPair] = []
    skipped = 0
    for pos in positives:
        out.append(pos)
        if pos.t_ref is not None:
            w = temporal_weights(pos.t_ref)
        else:
            w = static_weights(pos.ref_frame)
        # The window normally zeroes the reference label already; pairs loaded
        # from a file lose their window, so fall back to zeroing both ends.
        drop = [pos.ref] if pos.t_ref is not None or pos.ref_frame is not None \
            else [pos.ref, pos.ctx]
        drop = [i for i in drop if w[i] != 0.0]
        if drop:
            w = w.copy()
            w[drop] = 0.0
        s = w.sum()
        if s <= 0.0:
            skipped += 1
            continue
        draws = rng.choice(n_labels, size=n_neg, p=w / s)
        for ctx in draws:
            out.append(TrainingPair(pos.ref, int(ctx), pos.t_ref, 1.0,
                                    kind="negative", ref_frame=pos.ref_frame))
    if skipped:
        log.info("negative sampling skipped %d positives with no candidates", skipped)
    return out


def generate_pairs(corpus: Corpus, config: ContextConfig, scorer: DiscrepancyScorer, *,
                   sigma_t: float = DEFAULT_SIGMA_T, temporal: bool = True,
                   rng_seed: int = 0) -> list[TrainingPair]:
    """Run the configured mechanisms in fixed order and add negatives."""
    positives: list[TrainingPair] = []
    if SAME_FRAME in config.mechanisms:
        positives.extend(pairs_same_frame(corpus, scorer, temporal=temporal))
    if SURROUNDING_FRAMES in config.mechanisms:
        positives.extend(pairs_surrounding_frames(
            corpus, config.w_f, scorer, frame_diffusion=config.frame_diffusion,
            sigma_t=sigma_t, temporal=temporal))
    if NEIGHBOR_TIMESTAMPS in config.mechanisms:
        if not temporal:
            raise ValueError("neighbor-timestamp pairs only apply to temporal data")
        positives.extend(pairs_neighbor_timestamps(
            corpus, config.w_t, scorer, sigma_t=sigma_t))
    exclusion_w_f = config.w_f if SURROUNDING_FRAMES in config.mechanisms else 0
    return negative_samples(corpus, positives, config.negatives_per_positive,
                            rng_seed, w_f=exclusion_w_f)


PAIR_HEADER = ("ref", "ctx", "t_ref", "delta", "kind")


def write_pairs(pairs: list[TrainingPair], path: str | os.PathLike) -> None:
    """CSV with header ref,ctx,t_ref,delta,kind; t_ref -1 marks static pairs."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PAIR_HEADER)
        for p in pairs:
            t = -1 if p.t_ref is None else p.t_ref
            w.writerow((p.ref, p.ctx, t, repr(p.delta), p.kind))


def read_pairs(path: str | os.PathLike) -> list[TrainingPair]:
    pairs: list[TrainingPair] = []
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or tuple(h.strip() for h in header) != PAIR_HEADER:
            raise ValueError(f"{path}: missing or wrong pair-file header")
        for lineno, row in enumerate(r, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 columns")
            ref, ctx, t = int(row[0]), int(row[1]), int(row[2])
            delta, kind = float(row[3]), row[4]
            if kind not in ("positive", "negative"):
                raise ValueError(f"{path}:{lineno}: bad kind {kind!r}")
            if not 0.0 <= delta <= 1.0:
                raise ValueError(f"{path}:{lineno}: delta {delta} outside [0,1]")
            if kind == "negative" and delta != 1.0:
                raise ValueError(f"{path}:{lineno}: negative pair must carry delta 1")
            pairs.append(TrainingPair(ref, ctx, None if t < 0 else t, delta, kind))
    return pairs
