import numpy as np
import pytest

from voiceclass import synth
from voiceclass.evaluation import extract_corpus_features
from voiceclass.spectra import AudioSignal


@pytest.fixture(scope="session")
def tiny_corpus():
    """3 subjects per group, enough for split/labeling mechanics."""
    return synth.generate_corpus(synth.small_corpus_spec(3), seed=42)


@pytest.fixture(scope="session")
def tiny_features(tiny_corpus):
    return extract_corpus_features(tiny_corpus)


@pytest.fixture(scope="session")
def small_corpus():
    """6 subjects per group: large enough for meaningful folds."""
    return synth.generate_corpus(synth.small_corpus_spec(6), seed=7)


@pytest.fixture(scope="session")
def small_features(small_corpus):
    return extract_corpus_features(small_corpus)


def tone(freq_hz: float, duration: float = 1.5, sample_rate: int = 48_000,
         amplitude: float = 0.5) -> AudioSignal:
    t = np.arange(int(round(duration * sample_rate))) / sample_rate
    return AudioSignal(samples=amplitude * np.sin(2 * np.pi * freq_hz * t),
                       sample_rate=sample_rate)
