"""
Audio Service for loading, writing and framing 16 kHz mono PCM audio
"""
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
import soundfile as sf
from scipy.signal import get_window

from errors import (
    AudioNotFoundError,
    InvalidInputError,
    StorageError,
    TooShortError,
    UnsupportedFormatError,
)
from settings import SAMPLE_RATE
import logging

logger = logging.getLogger(__name__)

PCM16_SCALE = 32768.0
# soundfile reports WAVE_FORMAT_EXTENSIBLE headers as WAVEX
WAV_FORMATS = ("WAV", "WAVEX")


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono samples in [-1, 1] plus their sample rate."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidInputError(f"waveform must be mono (1-D), got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise InvalidInputError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def scaled(self, factor: float) -> "Waveform":
        return Waveform(self.samples * factor, self.sample_rate)


@dataclass(frozen=True)
class FrameSpec:
    """Frame clock shared by every stage: hop, analysis window and window shape."""

    hop: float = 0.020
    window: float = 0.040
    window_function: str = "hann"
    sample_rate: int = field(default=SAMPLE_RATE)

    def __post_init__(self):
        if self.hop <= 0 or self.window <= 0:
            raise InvalidInputError(f"hop and window must be positive, got hop={self.hop}, window={self.window}")
        if self.window < self.hop:
            raise InvalidInputError(f"window ({self.window}s) must be >= hop ({self.hop}s)")
        for name, seconds in (("hop", self.hop), ("window", self.window)):
            samples = seconds * self.sample_rate
            if abs(samples - round(samples)) > 1e-6:
                raise InvalidInputError(f"{name}={seconds}s is not a whole number of samples at {self.sample_rate} Hz")

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop * self.sample_rate))

    @property
    def window_samples(self) -> int:
        return int(round(self.window * self.sample_rate))

    def fingerprint(self) -> str:
        return f"hop={self.hop_samples};window={self.window_samples};fn={self.window_function};sr={self.sample_rate}"

    def analysis_window(self) -> np.ndarray:
        return get_window(self.window_function, self.window_samples)


class AudioService:
    """Service for RIFF/WAVE PCM16 IO and fixed-stride framing"""

    @staticmethod
    def read_wav(path: Union[str, Path]) -> Waveform:
        """
        Read a 16 kHz mono PCM16 WAV file

        Args:
            path: File to read

        Returns:
            Waveform with samples normalized by 32768
        """
        path = Path(path)
        if not path.is_file():
            raise AudioNotFoundError(f"audio file not found: {path}")

        try:
            info = sf.info(str(path))
        except (RuntimeError, OSError) as e:
            raise UnsupportedFormatError(f"format=not RIFF/WAVE ({path}): {e}") from e

        if info.format not in WAV_FORMATS:
            raise UnsupportedFormatError(f"format={info.format}")
        if info.channels != 1:
            raise UnsupportedFormatError(f"channels={info.channels}")
        if info.subtype != "PCM_16":
            raise UnsupportedFormatError(f"subtype={info.subtype}")
        if info.samplerate != SAMPLE_RATE:
            raise UnsupportedFormatError(f"rate={info.samplerate}")

        try:
            data, _ = sf.read(str(path), dtype="int16", always_2d=False)
        except (RuntimeError, OSError) as e:
            raise StorageError(f"failed to read {path}: {e}") from e

        if data.shape[0] == 0:
            raise UnsupportedFormatError(f"frames=0 ({path})")

        return Waveform(data.astype(np.float64) / PCM16_SCALE, SAMPLE_RATE)

    @staticmethod
    def write_wav(path: Union[str, Path], waveform: Waveform) -> None:
        """
        Write a waveform as 16-bit PCM mono WAV

        Args:
            path: Destination file
            waveform: Samples in [-1, 1] at 16 kHz
        """
        if len(waveform) == 0:
            raise InvalidInputError("cannot write an empty waveform")
        if waveform.sample_rate != SAMPLE_RATE:
            raise InvalidInputError(f"rate={waveform.sample_rate}; only {SAMPLE_RATE} Hz is written")
        if np.max(np.abs(waveform.samples)) > 1.0:
            raise InvalidInputError("samples must lie within [-1.0, 1.0]")

        quantized = np.clip(np.round(waveform.samples * PCM16_SCALE), -32768, 32767).astype(np.int16)
        try:
            sf.write(str(path), quantized, SAMPLE_RATE, subtype="PCM_16", format="WAV")
        except (RuntimeError, OSError) as e:
            raise StorageError(f"failed to write {path}: {e}") from e

    @staticmethod
    def frame_count(n_samples: int, spec: FrameSpec) -> int:
        """Number of whole frames: floor((n - window) / hop) + 1."""
        window = spec.window_samples
        if n_samples < window:
            raise TooShortError(f"{n_samples} samples is shorter than one {window}-sample window")
        return (n_samples - window) // spec.hop_samples + 1

    @staticmethod
    def frame_signal(samples: np.ndarray, spec: FrameSpec) -> np.ndarray:
        """
        Slice a signal into overlapping frames

        Frame i covers samples [i*hop, i*hop + window).

        Returns:
            Array of shape (frame_count, window_samples); a read-only view
        """
        n_frames = AudioService.frame_count(len(samples), spec)
        view = np.lib.stride_tricks.sliding_window_view(np.asarray(samples, dtype=np.float64), spec.window_samples)
        return view[:: spec.hop_samples][:n_frames]

    @staticmethod
    def seconds_to_frame(seconds: float, spec: FrameSpec) -> int:
        """Index of the frame whose hop interval contains ``seconds``."""
        # tolerance keeps times that sit exactly on a hop boundary from flooring down
        return int(math.floor(seconds / spec.hop + 1e-9))
