"""Shared fixtures: tones, generated utterances and a small generated dataset."""

import numpy as np
import pytest

from services.audio_service import FrameSpec, Waveform
from services.synth_service import DEFAULT_VOCAB, SimLanguage, SynthService
from settings import SAMPLE_RATE

SMALL_VOCAB = list(DEFAULT_VOCAB[:10])


def sine(freq: float, seconds: float = 1.0, amplitude: float = 0.5) -> Waveform:
    t = np.arange(int(round(seconds * SAMPLE_RATE))) / SAMPLE_RATE
    return Waveform(amplitude * np.sin(2.0 * np.pi * freq * t))


def interior_frames(start: float, end: float, spec: FrameSpec, n_frames: int) -> np.ndarray:
    """Indices of frames whose whole window lies inside [start, end) seconds."""
    first = int(np.ceil(start * spec.sample_rate / spec.hop_samples - 1e-9))
    last = int(np.floor((end * spec.sample_rate - spec.window_samples) / spec.hop_samples + 1e-9))
    return np.arange(max(first, 0), min(last, n_frames - 1) + 1)


@pytest.fixture
def frame_spec():
    return FrameSpec()


@pytest.fixture
def synth():
    return SynthService()


@pytest.fixture
def three_words(synth):
    """Three words, the middle one emphasised, in voice 0."""
    return synth.gen_utterance(["alpha", "bravo", "charlie"], [1], voice=0, utt_id="three")


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Four sentence versions in four voices with reversed simulated translations."""
    out_dir = tmp_path_factory.mktemp("dataset")
    sim_lang = SimLanguage.build(SMALL_VOCAB, seed=3, order="reverse")
    return SynthService().gen_dataset(4, SMALL_VOCAB, out_dir, seed=3, sim_lang=sim_lang, parallel_lines=60)
