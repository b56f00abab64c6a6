"""Per-connection session state and the chunk inference pipeline.

A session holds one posterior ring per task, capped at 10 entries: the
sliding version of the 10-interval averaging the batch pipeline uses.
Silent chunks are reported but never enter the ring.  Models are shared
read-only across sessions; all mutable state lives in the session.
"""

from __future__ import annotations

import uuid
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .. import gda
from ..errors import SilenceError
from ..spectra import Segment, log_resample, normalize, power_spectrum

RING_CAPACITY = 10
SILENCE_RMS = 1e-4


@dataclass
class Session:
    sample_rate: int
    tasks: list[str]
    models: dict[str, gda.ClassModel]
    session_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    rings: dict[str, deque] = field(init=False)
    chunk_counter: int = 0

    def __post_init__(self):
        self.rings = {t: deque(maxlen=RING_CAPACITY) for t in self.tasks}

    def expected_chunk_len(self, delta: float) -> int:
        return int(round(delta * self.sample_rate))


@dataclass(frozen=True)
class ChunkResult:
    task: str
    instant: np.ndarray
    averaged: np.ndarray
    map_index: int


def decode_chunk(payload: bytes) -> np.ndarray:
    """Little-endian int16 PCM to float amplitudes in [-1, 1]."""
    return np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0


def ingest_chunk(session: Session, samples: np.ndarray) -> list[ChunkResult] | None:
    """Run the full pipeline on one 0.1 s chunk for every session task.

    Returns None for a silent chunk (ring untouched).  Raises ValueError
    on a chunk whose length is off by more than one sample.
    """
    session.chunk_counter += 1
    for task in session.tasks:
        expected = session.expected_chunk_len(session.models[task].pipeline.delta)
        if abs(len(samples) - expected) > 1:
            raise ValueError(f"chunk must be {expected} samples (got {len(samples)})")
    rms = float(np.sqrt(np.mean(samples ** 2))) if len(samples) else 0.0
    if rms < SILENCE_RMS:
        return None
    results = []
    for task in session.tasks:
        model = session.models[task]
        cfg = model.pipeline
        seg = Segment(samples=samples, duration=cfg.delta, rms_intensity=rms)
        try:
            raw = power_spectrum(seg, cfg.f_min, cfg.f_max, cfg.bin_width,
                                 window=cfg.window, spectrum_mode=cfg.spectrum_mode)
            spec = log_resample(normalize(raw), cfg.grid)
        except SilenceError:
            return None
        x = gda.extract_features(spec, model.frequencies, cfg.feature_mode)
        instant = gda.posterior(model, x)
        ring = session.rings[task]
        ring.append(instant)
        averaged = gda.average_posteriors(list(ring))
        results.append(ChunkResult(
            task=task, instant=instant, averaged=averaged,
            map_index=gda.map_class(averaged),
        ))
    return results
