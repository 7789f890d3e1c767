"""
Segmentation Service for turning word timestamps or silence gaps into frame spans
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import (
    InvalidInputError,
    NegativeTimeError,
    OverlappingTimestampsError,
    SegmentCountMismatchError,
    SpanOutOfRangeError,
)
from services.audio_service import AudioService, FrameSpec, Waveform
from services.feature_service import FLOOR_DB, FeatureService
import logging

logger = logging.getLogger(__name__)

TIME_TOLERANCE = 1e-9


@dataclass(frozen=True)
class WordSpan:
    """Frames [start_frame, end_frame) attributed to one transcript token."""

    token_index: int
    token: Optional[str]
    start_frame: int
    end_frame: int

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame


class SegmentationService:
    """Service for producing per-word frame spans"""

    def __init__(self, frame_spec: Optional[FrameSpec] = None):
        self.frame_spec = frame_spec or FrameSpec()

    def spans_from_timestamps(
        self,
        word_times: Sequence[Tuple[Optional[str], float, float]],
        n_frames: Optional[int] = None,
    ) -> List[WordSpan]:
        """
        Quantize word timestamps onto the frame clock

        Args:
            word_times: (token, start seconds, end seconds) per word, in order
            n_frames: Frame count of the audio; spans are clipped to it when given

        Returns:
            One WordSpan per word, at least one frame wide
        """
        spans: List[WordSpan] = []
        previous_end_time = 0.0
        previous_end_frame = 0
        for index, (token, start, end) in enumerate(word_times):
            if start < 0 or end < 0:
                raise NegativeTimeError(f"word {index} ({token!r}) has negative time ({start}, {end})")
            if end < start:
                raise NegativeTimeError(f"word {index} ({token!r}) ends before it starts ({start}, {end})")
            if start < previous_end_time - TIME_TOLERANCE:
                raise OverlappingTimestampsError(
                    f"word {index} ({token!r}) starts at {start}s before the previous word ends at {previous_end_time}s"
                )
            previous_end_time = end

            start_frame = AudioService.seconds_to_frame(start, self.frame_spec)
            end_frame = max(start_frame + 1, AudioService.seconds_to_frame(end, self.frame_spec))
            # two words quantized into the same frame: the later one moves right
            if start_frame < previous_end_frame:
                start_frame = previous_end_frame
                end_frame = max(end_frame, start_frame + 1)

            if n_frames is not None:
                if start_frame >= n_frames:
                    raise SpanOutOfRangeError(
                        f"word {index} ({token!r}) starts at frame {start_frame}, past the {n_frames} frames of the audio"
                    )
                end_frame = min(end_frame, n_frames)

            spans.append(WordSpan(index, token, start_frame, end_frame))
            previous_end_frame = end_frame
        return spans

    def segment_by_silence(
        self,
        waveform: Waveform,
        expected_n_words: int,
        gate_db: float = -40.0,
        min_gap: float = 0.050,
    ) -> List[WordSpan]:
        """
        Split an utterance into words at silent gaps

        A frame is gated when its level is at the -80 dB floor or more than
        ``gate_db`` below the loudest frame. A run of k gated frames spans
        (k - 1) * hop + window seconds and separates words when that is at
        least ``min_gap``; leading and trailing gated frames are dropped.

        Returns:
            Exactly ``expected_n_words`` spans with tokens unset
        """
        if expected_n_words < 1:
            raise InvalidInputError(f"expected_n_words must be >= 1, got {expected_n_words}")

        level = FeatureService(self.frame_spec).rms_energy_db(waveform)
        gate = float(np.max(level)) + gate_db
        active = (level > gate) & (level > FLOOR_DB)

        runs = self._active_runs(active)
        segments: List[List[int]] = []
        for start, end in runs:
            if segments:
                silent_frames = start - segments[-1][1]
                silent_seconds = (silent_frames - 1) * self.frame_spec.hop + self.frame_spec.window
                if silent_seconds < min_gap - TIME_TOLERANCE:
                    segments[-1][1] = end
                    continue
            segments.append([start, end])

        if len(segments) != expected_n_words:
            logger.debug(f"Silence segmentation found {len(segments)} words, expected {expected_n_words}")
            raise SegmentCountMismatchError(len(segments), expected_n_words)

        return [WordSpan(i, None, start, end) for i, (start, end) in enumerate(segments)]

    @staticmethod
    def _active_runs(active: np.ndarray) -> List[Tuple[int, int]]:
        padded = np.concatenate([[False], active, [False]]).astype(np.int8)
        edges = np.diff(padded)
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1)
        return [(int(s), int(e)) for s, e in zip(starts, ends)]
