"""Training-pair extraction: the three context mechanisms plus negatives."""

import collections
import math

import numpy as np
import pytest

from scenevec.context import (
    ContextConfig,
    TrainingPair,
    generate_pairs,
    negative_samples,
    pairs_neighbor_timestamps,
    pairs_same_frame,
    pairs_surrounding_frames,
    read_pairs,
    write_pairs,
)
from scenevec.corpus import Corpus, ObjectInstance
from scenevec.scoring import DiscrepancyScorer, temporal_weight

GAUSS = DiscrepancyScorer("gaussian")


def corpus_from(frame_specs, n_timestamps=1):
    """frame_specs: list of frames, each a list of (label_name, cx, cy)."""
    labels = sorted({name for frame in frame_specs for name, _, _ in frame})
    ids = {name: i for i, name in enumerate(labels)}
    frames = [
        [ObjectInstance(label=ids[name], frame=f, cx=cx, cy=cy)
         for name, cx, cy in frame]
        for f, frame in enumerate(frame_specs)
    ]
    return Corpus(labels=labels, frames=frames, n_timestamps=n_timestamps)


class TestSameFrame:
    def test_two_instances_symmetric(self):
        c = corpus_from([[("a", 0.2, 0.2), ("b", 0.6, 0.2)]])
        pairs = pairs_same_frame(c, GAUSS)
        assert {(p.ref, p.ctx) for p in pairs} == {(0, 1), (1, 0)}
        for p in pairs:
            assert p.delta == pytest.approx(GAUSS.score(0.4))
            assert p.t_ref == 0
            assert p.kind == "positive"

    def test_singleton_frame_empty(self):
        c = corpus_from([[("a", 0.5, 0.5)]])
        assert pairs_same_frame(c, GAUSS) == []

    def test_three_instances_six_pairs(self):
        c = corpus_from([[("a", 0.1, 0.1), ("b", 0.5, 0.5), ("c", 0.9, 0.9)]])
        assert len(pairs_same_frame(c, GAUSS)) == 6

    def test_same_label_twice_not_paired_with_itself(self):
        c = corpus_from([[("a", 0.1, 0.1), ("a", 0.9, 0.9), ("b", 0.5, 0.5)]])
        pairs = pairs_same_frame(c, GAUSS)
        # both a-instances pair with b and vice versa; no (a, a)
        assert all(p.ref != p.ctx for p in pairs)
        assert len(pairs) == 4

    def test_count_matches_formula(self):
        specs = [
            [("a", 0.1, 0.1), ("b", 0.2, 0.2), ("c", 0.3, 0.3)],
            [("a", 0.4, 0.4)],
            [("b", 0.5, 0.5), ("c", 0.6, 0.6)],
        ]
        c = corpus_from(specs)
        expected = sum(m * (m - 1) for m in (3, 1, 2))
        assert len(pairs_same_frame(c, GAUSS)) == expected

    def test_static_mode_drops_timestamp(self):
        c = corpus_from([[("a", 0.2, 0.2), ("b", 0.6, 0.2)]])
        pairs = pairs_same_frame(c, GAUSS, temporal=False)
        assert all(p.t_ref is None for p in pairs)


class TestSurroundingFrames:
    def specs(self):
        return [
            [("a", 0.2, 0.2), ("b", 0.6, 0.2)],
            [("c", 0.4, 0.4)],
            [("a", 0.8, 0.8)],
        ]

    def test_reference_frame_label_excluded(self):
        c = corpus_from(self.specs())
        pairs = pairs_surrounding_frames(c, 1, GAUSS, sigma_t=1.0)
        for p in pairs:
            assert c.labels[p.ctx] not in {c.labels[i.label] for i in
                                           c.frames[p.ref_frame]}

    def test_window_reaches_adjacent_frames_only(self):
        c = corpus_from(self.specs())
        pairs = pairs_surrounding_frames(c, 1, GAUSS, sigma_t=1.0)
        refs_from_frame0 = {(p.ref, p.ctx) for p in pairs if p.ref_frame == 0}
        # frame 0 refs a, b see only c in frame 1; frame 2's a is out of reach
        assert refs_from_frame0 == {(0, 2), (1, 2)}

    def test_frame_damping_applied(self):
        c = corpus_from(self.specs())
        damped = pairs_surrounding_frames(c, 1, GAUSS, sigma_t=1.0)
        plain = pairs_surrounding_frames(c, 1, GAUSS, sigma_t=1.0,
                                         frame_diffusion=False)
        # with w_f=1 every context frame sits exactly one frame away
        factor = 1.0 - temporal_weight(0, 1, 1.0)
        assert len(damped) == len(plain)
        for d, p in zip(damped, plain):
            assert (d.ref, d.ctx, d.ref_frame) == (p.ref, p.ctx, p.ref_frame)
            assert d.delta == pytest.approx(p.delta * factor)

    def test_boundary_clamp(self):
        c = corpus_from(self.specs())
        pairs = pairs_surrounding_frames(c, 5, GAUSS, sigma_t=1.0)
        assert all(0 <= p.ref_frame < 3 for p in pairs)

    def test_deltas_in_range(self):
        c = corpus_from(self.specs())
        for p in pairs_surrounding_frames(c, 2, GAUSS, sigma_t=0.5):
            assert 0.0 <= p.delta <= 1.0


class TestNeighborTimestamps:
    def specs(self):
        # 4 frames, 2 timestamps: d only in t0, c only in t1
        return [
            [("a", 0.2, 0.2), ("d", 0.6, 0.6)],
            [("a", 0.3, 0.3)],
            [("a", 0.4, 0.4), ("c", 0.8, 0.8)],
            [("b", 0.5, 0.5)],
        ]

    def test_exclusion_by_timestamp(self):
        c = corpus_from(self.specs(), n_timestamps=2)
        pairs = pairs_neighbor_timestamps(c, 1, GAUSS, sigma_t=1.0)
        for p in pairs:
            assert p.ctx not in c.timestamp_labels(p.t_ref)

    def test_damping_formula(self):
        c = corpus_from(self.specs(), n_timestamps=2)
        pairs = pairs_neighbor_timestamps(c, 1, GAUSS, sigma_t=1.0)
        # reference a@frame0 (t0) with context c@frame2 (t1)
        d = math.hypot(0.8 - 0.2, 0.8 - 0.2)
        expected = GAUSS.score(d) * (1 - temporal_weight(0, 1, 1.0))
        match = [p for p in pairs if p.ref == 0 and c.labels[p.ctx] == "c"
                 and p.t_ref == 0]
        assert match and any(p.delta == pytest.approx(expected) for p in match)

    def test_known_half_score_example(self):
        # base score 0.5 at adjacent timestamp, sigma 1: 0.5 * (1 - 0.24197)
        c = corpus_from(
            [[("a", 0.25, 0.25), ("x", 0.25, 0.75)],
             [("b", 0.25, 0.25), ("a", 0.6, 0.6)]],
            n_timestamps=2)
        scorer = DiscrepancyScorer("minmax")
        pairs = pairs_neighbor_timestamps(c, 1, scorer, sigma_t=1.0)
        # b@t1 vs x@t0 at distance 0.5: minmax gives 0.5/sqrt(2) = 0.35355
        target = (0.5 / math.sqrt(2)) * (1 - 0.2419707245)
        got = [p for p in pairs if c.labels[p.ref] == "b" and c.labels[p.ctx] == "x"]
        assert got and got[0].delta == pytest.approx(target, abs=1e-9)

    def test_requires_two_timestamps(self):
        c = corpus_from([[("a", 0.1, 0.1), ("b", 0.2, 0.2)]], n_timestamps=1)
        with pytest.raises(ValueError):
            pairs_neighbor_timestamps(c, 1, GAUSS, sigma_t=1.0)

    def test_window_zero_empty(self):
        c = corpus_from(self.specs(), n_timestamps=2)
        assert pairs_neighbor_timestamps(c, 0, GAUSS, sigma_t=1.0) == []


class TestNegativeSampling:
    def corpus(self):
        # label frequencies over 2 timestamps engineered for the 0.75/0.25 check
        specs = []
        # t0: 2 frames; t1: 2 frames
        # ref appears everywhere; cand1 3 times outside t0; cand2 1 time outside t0
        specs.append([("ref", 0.1, 0.1), ("other", 0.9, 0.9)])
        specs.append([("ref", 0.1, 0.1)])
        specs.append([("ref", 0.1, 0.1), ("cand1", 0.5, 0.5), ("cand2", 0.6, 0.6)])
        specs.append([("cand1", 0.5, 0.5), ("cand1", 0.55, 0.55),
                      ("ref", 0.2, 0.2)])
        return corpus_from(specs, n_timestamps=2)

    def test_probabilities_follow_excess_frequency(self):
        c = self.corpus()
        ref = c.label_id("ref")
        positive = TrainingPair(ref=ref, ctx=c.label_id("other"), t_ref=0,
                                delta=0.5)
        counts = collections.Counter()
        n = 4000
        out = negative_samples(c, [positive] * n, 1, rng_seed=9)
        for p in out:
            if p.kind == "negative":
                counts[c.labels[p.ctx]] += 1
        # candidates: cand1 excess 3, cand2 excess 1 -> 0.75 / 0.25
        assert counts["cand1"] + counts["cand2"] == n
        assert counts["cand1"] / n == pytest.approx(0.75, abs=0.03)

    def test_negative_shape(self):
        c = self.corpus()
        positive = TrainingPair(ref=c.label_id("ref"), ctx=c.label_id("other"),
                                t_ref=0, delta=0.5)
        out = negative_samples(c, [positive], 2, rng_seed=0)
        assert len(out) == 3
        assert out[0] is positive
        for neg in out[1:]:
            assert neg.kind == "negative"
            assert neg.delta == 1.0
            assert neg.t_ref == 0
            assert neg.ref == positive.ref

    def test_reference_never_drawn(self):
        c = self.corpus()
        ref = c.label_id("ref")
        positive = TrainingPair(ref=ref, ctx=c.label_id("other"), t_ref=0, delta=0.5)
        out = negative_samples(c, [positive] * 500, 1, rng_seed=3)
        assert all(p.ctx != ref for p in out if p.kind == "negative")

    def test_timestamp_resident_never_drawn(self):
        c = self.corpus()
        # "other" occurs only inside t0: excess frequency 0 for t0 references
        positive = TrainingPair(ref=c.label_id("ref"), ctx=c.label_id("cand1"),
                                t_ref=0, delta=0.5)
        out = negative_samples(c, [positive] * 500, 1, rng_seed=4)
        names = {c.labels[p.ctx] for p in out if p.kind == "negative"}
        assert "other" not in names

    def test_all_zero_weights_skips(self):
        # only two labels; the non-ref one lives inside t_ref: nothing to draw
        c = corpus_from([[("ref", 0.1, 0.1), ("other", 0.9, 0.9)]], n_timestamps=1)
        positive = TrainingPair(ref=c.label_id("ref"), ctx=c.label_id("other"),
                                t_ref=0, delta=0.5)
        out = negative_samples(c, [positive], 3, rng_seed=0)
        assert out == [positive]

    def test_deterministic(self):
        c = self.corpus()
        positive = TrainingPair(ref=c.label_id("ref"), ctx=c.label_id("other"),
                                t_ref=0, delta=0.5)
        a = negative_samples(c, [positive] * 50, 2, rng_seed=7)
        b = negative_samples(c, [positive] * 50, 2, rng_seed=7)
        assert a == b

    def test_zero_negatives_pass_through(self):
        c = self.corpus()
        positive = TrainingPair(ref=0, ctx=1, t_ref=0, delta=0.5)
        assert negative_samples(c, [positive], 0, rng_seed=0) == [positive]

    def test_static_pairs_use_global_frequency(self):
        c = self.corpus()
        positive = TrainingPair(ref=c.label_id("ref"), ctx=c.label_id("other"),
                                t_ref=None, delta=0.5, ref_frame=0)
        out = negative_samples(c, [positive] * 300, 1, rng_seed=5)
        names = collections.Counter(c.labels[p.ctx] for p in out
                                    if p.kind == "negative")
        # global counts: cand1=3, cand2=1; "other" is in the reference frame
        assert "other" not in names
        assert names["cand1"] / 300 == pytest.approx(0.75, abs=0.06)


class TestGeneratePairs:
    def specs(self):
        return [
            [("a", 0.2, 0.2), ("b", 0.6, 0.2)],
            [("c", 0.4, 0.4)],
            [("a", 0.8, 0.8), ("c", 0.3, 0.3)],
            [("b", 0.5, 0.5)],
        ]

    def test_mechanism_union(self):
        c = corpus_from(self.specs(), n_timestamps=2)
        cfg = ContextConfig(mechanisms=("same_frame", "surrounding_frames",
                                        "neighbor_timestamps"), w_f=1, w_t=1)
        both = generate_pairs(c, cfg, GAUSS, sigma_t=1.0)
        only_frame = generate_pairs(
            c, ContextConfig(mechanisms=("same_frame",)), GAUSS, sigma_t=1.0)
        assert len(both) > len(only_frame)

    def test_unknown_mechanism_rejected(self):
        with pytest.raises(ValueError):
            ContextConfig(mechanisms=("same_framez",))

    def test_neighbor_timestamps_requires_temporal(self):
        c = corpus_from(self.specs(), n_timestamps=2)
        cfg = ContextConfig(mechanisms=("neighbor_timestamps",), w_t=1)
        with pytest.raises(ValueError):
            generate_pairs(c, cfg, GAUSS, sigma_t=1.0, temporal=False)

    def test_deterministic_with_negatives(self):
        c = corpus_from(self.specs(), n_timestamps=2)
        cfg = ContextConfig(mechanisms=("same_frame",), negatives_per_positive=2)
        a = generate_pairs(c, cfg, GAUSS, sigma_t=1.0, rng_seed=11)
        b = generate_pairs(c, cfg, GAUSS, sigma_t=1.0, rng_seed=11)
        assert a == b


class TestPairFile:
    def test_round_trip(self, tmp_path):
        pairs = [
            TrainingPair(ref=0, ctx=1, t_ref=2, delta=0.375, kind="positive"),
            TrainingPair(ref=1, ctx=0, t_ref=2, delta=1.0, kind="negative"),
            TrainingPair(ref=2, ctx=3, t_ref=None, delta=0.25, kind="positive"),
        ]
        path = tmp_path / "pairs.csv"
        write_pairs(pairs, path)
        assert read_pairs(path) == pairs

    def test_round_trip_preserves_delta_exactly(self, tmp_path):
        delta = 0.1234567890123456
        path = tmp_path / "pairs.csv"
        write_pairs([TrainingPair(ref=0, ctx=1, t_ref=0, delta=delta)], path)
        assert read_pairs(path)[0].delta == delta

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "pairs.csv"
        path.write_text("ref,ctx,delta\n0,1,0.5\n")
        with pytest.raises(ValueError):
            read_pairs(path)

    def test_negative_with_small_delta_rejected(self, tmp_path):
        path = tmp_path / "pairs.csv"
        path.write_text("ref,ctx,t_ref,delta,kind\n0,1,0,0.5,negative\n")
        with pytest.raises(ValueError):
            read_pairs(path)

    def test_out_of_range_delta_rejected(self, tmp_path):
        path = tmp_path / "pairs.csv"
        path.write_text("ref,ctx,t_ref,delta,kind\n0,1,0,1.5,positive\n")
        with pytest.raises(ValueError):
            read_pairs(path)

    def test_provenance_not_serialized(self, tmp_path):
        pair = TrainingPair(ref=0, ctx=1, t_ref=0, delta=0.5, ref_frame=7)
        path = tmp_path / "pairs.csv"
        write_pairs([pair], path)
        back = read_pairs(path)[0]
        assert back.ref_frame is None
        assert back == pair  # provenance is excluded from equality
