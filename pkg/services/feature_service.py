"""
Feature Service for per-frame prosodic features (pitch, voicing, loudness)
"""
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from errors import DegenerateUtteranceError, InvalidInputError, StorageError, TooShortError
from services.audio_service import AudioService, FrameSpec, Waveform
from settings import SAMPLE_RATE
import logging

logger = logging.getLogger(__name__)

FLOOR_DB = -80.0
ZERO_STD = 1e-12
SILENT_FRAME_POWER = 1e-10

BASE_COLUMNS = ("f0_z", "voicing", "energy_z", "delta_f0", "delta_energy")
CONTEXT = 2
FEATURE_DIM = len(BASE_COLUMNS) * (2 * CONTEXT + 1)


@dataclass(frozen=True)
class PitchConfig:
    f0_min: float = 60.0
    f0_max: float = 400.0
    yin_threshold: float = 0.10

    def __post_init__(self):
        if not 0 < self.f0_min < self.f0_max < SAMPLE_RATE / 2:
            raise InvalidInputError(
                f"pitch range must satisfy 0 < f0_min < f0_max < {SAMPLE_RATE / 2}, "
                f"got f0_min={self.f0_min}, f0_max={self.f0_max}"
            )
        if not 0 < self.yin_threshold < 1:
            raise InvalidInputError(f"yin_threshold must lie in (0, 1), got {self.yin_threshold}")

    def fingerprint(self) -> str:
        return f"f0={self.f0_min:g}-{self.f0_max:g};yin={self.yin_threshold:g}"


def feature_column_names() -> List[str]:
    names = []
    for offset in range(-CONTEXT, CONTEXT + 1):
        names.extend(f"{name}[{offset:+d}]" for name in BASE_COLUMNS)
    return names


@dataclass(frozen=True, eq=False)
class FrameFeatureMatrix:
    """One row of stacked prosodic features per frame."""

    values: np.ndarray
    frame_spec: FrameSpec

    @property
    def n_frames(self) -> int:
        return int(self.values.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.values.shape[1])

    def base(self) -> np.ndarray:
        """The five unstacked columns (centre of the context window)."""
        start = CONTEXT * len(BASE_COLUMNS)
        return self.values[:, start:start + len(BASE_COLUMNS)]


def _zscore(values: np.ndarray) -> np.ndarray:
    std = float(np.std(values))
    if std < ZERO_STD:
        return np.zeros_like(values)
    return (values - float(np.mean(values))) / std


def _stack_context(base: np.ndarray, context: int) -> np.ndarray:
    n = base.shape[0]
    padded = np.pad(base, ((context, context), (0, 0)), mode="edge")
    return np.hstack([padded[k:k + n] for k in range(2 * context + 1)])


class FeatureService:
    """Service for extracting frame-level prosodic feature matrices"""

    def __init__(self, frame_spec: Optional[FrameSpec] = None, pitch_cfg: Optional[PitchConfig] = None):
        self.frame_spec = frame_spec or FrameSpec()
        self.pitch_cfg = pitch_cfg or PitchConfig()

    def fingerprint(self) -> str:
        """Identifies everything a trained model depends on."""
        return (
            f"{self.frame_spec.fingerprint()};{self.pitch_cfg.fingerprint()};"
            f"columns={','.join(BASE_COLUMNS)};context={CONTEXT};dim={FEATURE_DIM}"
        )

    def estimate_f0(self, waveform: Waveform) -> Tuple[np.ndarray, np.ndarray]:
        """
        Estimate per-frame F0 with a YIN-style difference function

        Args:
            waveform: Input audio

        Returns:
            (f0 in Hz, voiced flags); unvoiced frames report f0 = 0
        """
        frames = AudioService.frame_signal(waveform.samples, self.frame_spec)
        n_frames, width = frames.shape
        sr = waveform.sample_rate
        cfg = self.pitch_cfg

        tau_min = max(2, int(math.floor(sr / cfg.f0_max)))
        tau_max = min(int(math.ceil(sr / cfg.f0_min)), width - 2)
        if tau_max <= tau_min:
            raise TooShortError(f"{width}-sample window leaves no lag range for f0 >= {cfg.f0_min} Hz")

        # mean squared difference over the overlapping part of the window
        diff = np.zeros((n_frames, tau_max + 2))
        for tau in range(1, tau_max + 2):
            delta = frames[:, : width - tau] - frames[:, tau:]
            diff[:, tau] = np.einsum("ij,ij->i", delta, delta) / (width - tau)

        running = np.cumsum(diff[:, 1:], axis=1)
        taus = np.arange(1, tau_max + 2)
        cmnd = np.ones_like(diff)
        with np.errstate(divide="ignore", invalid="ignore"):
            normalized = diff[:, 1:] * taus / running
        cmnd[:, 1:] = np.where(running > 0, normalized, 1.0)

        power = np.mean(frames * frames, axis=1)
        f0 = np.zeros(n_frames)
        voiced = np.zeros(n_frames, dtype=bool)

        for i in range(n_frames):
            if power[i] < SILENT_FRAME_POWER:
                continue
            row = cmnd[i]
            candidates = np.flatnonzero(row[tau_min:tau_max + 1] < cfg.yin_threshold)
            if candidates.size == 0:
                continue
            tau = tau_min + int(candidates[0])
            while tau < tau_max and row[tau + 1] < row[tau]:
                tau += 1

            left, centre, right = diff[i, tau - 1], diff[i, tau], diff[i, tau + 1]
            curvature = left - 2.0 * centre + right
            shift = 0.5 * (left - right) / curvature if curvature > 0 else 0.0
            shift = min(max(shift, -1.0), 1.0)

            f0[i] = min(max(sr / (tau + shift), cfg.f0_min), cfg.f0_max)
            voiced[i] = True

        return f0, voiced

    def rms_energy_db(self, waveform: Waveform) -> np.ndarray:
        """
        Per-frame RMS level in dB, floored at -80 dB

        The windowed RMS is divided by the window's own RMS gain so a
        full-scale sine reads 20*log10(1/sqrt(2)).
        """
        frames = AudioService.frame_signal(waveform.samples, self.frame_spec)
        window = self.frame_spec.analysis_window()
        window_gain = math.sqrt(float(np.mean(window * window)))
        windowed = frames * window
        rms = np.sqrt(np.mean(windowed * windowed, axis=1)) / window_gain
        with np.errstate(divide="ignore"):
            level = 20.0 * np.log10(rms)
        return np.maximum(level, FLOOR_DB)

    def build_features(self, waveform: Waveform) -> FrameFeatureMatrix:
        """
        Assemble the stacked feature matrix for one utterance

        Log-F0 is z-scored over voiced frames and energy over frames above
        the floor; everything else in those columns is 0.

        Returns:
            FrameFeatureMatrix with FEATURE_DIM columns
        """
        f0, voiced = self.estimate_f0(waveform)
        level = self.rms_energy_db(waveform)
        audible = level > FLOOR_DB

        if not voiced.any() and not audible.any():
            raise DegenerateUtteranceError("no voiced frames and no frames above the -80 dB floor")

        f0_z = np.zeros(len(f0))
        if voiced.any():
            f0_z[voiced] = _zscore(np.log(f0[voiced]))

        energy_z = np.zeros(len(level))
        if audible.any():
            energy_z[audible] = _zscore(level[audible])

        delta_f0 = np.diff(f0_z, prepend=f0_z[0])
        delta_energy = np.diff(energy_z, prepend=energy_z[0])

        base = np.column_stack([f0_z, voiced.astype(np.float64), energy_z, delta_f0, delta_energy])
        values = _stack_context(base, CONTEXT)
        values.setflags(write=False)

        logger.debug(
            f"Built {values.shape[0]}x{values.shape[1]} features "
            f"({int(voiced.sum())} voiced, {int(audible.sum())} audible frames)"
        )
        return FrameFeatureMatrix(values=values, frame_spec=self.frame_spec)

    @staticmethod
    def dump_tsv(features: FrameFeatureMatrix, path: Union[str, Path]) -> None:
        """Write one tab-separated line per frame, with a header row."""
        try:
            np.savetxt(
                str(path),
                features.values,
                delimiter="\t",
                fmt="%.6f",
                header="\t".join(feature_column_names()),
                comments="",
            )
        except OSError as e:
            raise StorageError(f"failed to write features to {path}: {e}") from e
