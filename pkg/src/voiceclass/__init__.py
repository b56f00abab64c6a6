"""voiceclass: voice-quality classification from short sound spectra.

Pipeline: 0.1 s segments -> normalized FFT power spectra -> log-grid
resampling -> Gaussian discriminant analysis on a handful of probe
frequencies chosen by Bayes-risk minimization.
"""

from .errors import VoiceClassError
from .gda import ClassModel, FrequencySet, load_model, save_model
from .riskopt import SelectConfig, estimate_bayes_risk, random_frequencies, select_frequencies
from .spectra import AudioSignal, LogGrid, PipelineConfig, decode_audio
from .synth import CorpusSpec, generate_corpus, scale_fundamentals

__version__ = "0.1.0"

__all__ = [
    "AudioSignal",
    "ClassModel",
    "CorpusSpec",
    "FrequencySet",
    "LogGrid",
    "PipelineConfig",
    "SelectConfig",
    "VoiceClassError",
    "decode_audio",
    "estimate_bayes_risk",
    "generate_corpus",
    "load_model",
    "random_frequencies",
    "save_model",
    "scale_fundamentals",
    "select_frequencies",
    "__version__",
]
