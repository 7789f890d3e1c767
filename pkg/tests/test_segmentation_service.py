"""Tests for timestamp quantization and silence segmentation."""

import numpy as np
import pytest

from errors import (
    InvalidInputError,
    NegativeTimeError,
    OverlappingTimestampsError,
    SegmentCountMismatchError,
    SpanOutOfRangeError,
)
from services.audio_service import Waveform
from services.segmentation_service import SegmentationService, WordSpan
from tests.conftest import sine


@pytest.fixture
def segmentation(frame_spec):
    return SegmentationService(frame_spec)


class TestSpansFromTimestamps:
    def test_quantization(self, segmentation):
        spans = segmentation.spans_from_timestamps([("word", 0.0, 0.2)])
        assert spans == [WordSpan(0, "word", 0, 10)]

    def test_zero_length_gets_one_frame(self, segmentation):
        spans = segmentation.spans_from_timestamps([("word", 0.1, 0.1)])
        assert (spans[0].start_frame, spans[0].end_frame) == (5, 6)

    def test_overlap_rejected(self, segmentation):
        with pytest.raises(OverlappingTimestampsError):
            segmentation.spans_from_timestamps([("a", 0.0, 0.3), ("b", 0.2, 0.5)])

    def test_negative_time_rejected(self, segmentation):
        with pytest.raises(NegativeTimeError):
            segmentation.spans_from_timestamps([("a", -0.1, 0.3)])

    def test_end_before_start_rejected(self, segmentation):
        with pytest.raises(NegativeTimeError):
            segmentation.spans_from_timestamps([("a", 0.3, 0.2)])

    def test_shared_frame_moves_later_word(self, segmentation):
        spans = segmentation.spans_from_timestamps([("a", 0.0, 0.01), ("b", 0.01, 0.015)])
        assert (spans[0].start_frame, spans[0].end_frame) == (0, 1)
        assert (spans[1].start_frame, spans[1].end_frame) == (1, 2)

    def test_clipped_to_audio(self, segmentation):
        spans = segmentation.spans_from_timestamps([("a", 0.0, 2.0)], n_frames=49)
        assert spans[0].end_frame == 49

    def test_word_past_end_of_audio(self, segmentation):
        with pytest.raises(SpanOutOfRangeError):
            segmentation.spans_from_timestamps([("a", 0.0, 0.98), ("b", 1.2, 1.4)], n_frames=49)

    def test_requantizing_frame_times_is_stable(self, segmentation, frame_spec):
        rng = np.random.default_rng(8)
        for _ in range(20):
            bounds = np.sort(rng.uniform(0.0, 3.0, size=12))
            word_times = [(None, float(bounds[k]), float(bounds[k + 1])) for k in range(0, 12, 2)]
            spans = segmentation.spans_from_timestamps(word_times)
            frame_times = [(None, s.start_frame * frame_spec.hop, s.end_frame * frame_spec.hop) for s in spans]
            assert segmentation.spans_from_timestamps(frame_times) == spans


class TestSegmentBySilence:
    def test_recovers_generated_words(self, segmentation, three_words):
        found = segmentation.segment_by_silence(three_words.waveform, 3)
        truth = segmentation.spans_from_timestamps([(w.token, w.start, w.end) for w in three_words.words])
        for got, want in zip(found, truth):
            assert abs(got.start_frame - want.start_frame) <= 1
            assert abs(got.end_frame - want.end_frame) <= 1

    def test_every_voice_round_trips(self, segmentation, synth):
        tokens = ["one", "two", "three", "four", "five"]
        for voice in range(4):
            utterance = synth.gen_utterance(tokens, [voice], voice)
            found = segmentation.segment_by_silence(utterance.waveform, len(tokens))
            truth = segmentation.spans_from_timestamps([(w.token, w.start, w.end) for w in utterance.words])
            starts = np.array([s.start_frame for s in found]) - np.array([s.start_frame for s in truth])
            ends = np.array([s.end_frame for s in found]) - np.array([s.end_frame for s in truth])
            assert np.all(np.abs(starts) <= 1) and np.all(np.abs(ends) <= 1)

    def test_continuous_tone(self, segmentation):
        with pytest.raises(SegmentCountMismatchError) as info:
            segmentation.segment_by_silence(sine(200.0), 2)
        assert (info.value.found, info.value.expected) == (1, 2)

    def test_pure_silence(self, segmentation):
        with pytest.raises(SegmentCountMismatchError) as info:
            segmentation.segment_by_silence(Waveform(np.zeros(16000)), 1)
        assert (info.value.found, info.value.expected) == (0, 1)

    def test_short_gap_does_not_split(self, segmentation):
        tone = sine(200.0, 0.3).samples
        gap = np.zeros(int(0.02 * 16000))
        waveform = Waveform(np.concatenate([np.zeros(1600), tone, gap, tone, np.zeros(1600)]))
        assert len(segmentation.segment_by_silence(waveform, 1)) == 1

    def test_needs_a_word(self, segmentation, three_words):
        with pytest.raises(InvalidInputError):
            segmentation.segment_by_silence(three_words.waveform, 0)
