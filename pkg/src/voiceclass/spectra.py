"""Audio-to-spectrum pipeline.

A recording is cut into 0.1 s segments, the loudest segments are kept,
each is turned into a binned FFT power spectrum on a linear 10 Hz grid,
normalized to unit spectral mass (so loudness drops out), and finally
re-sampled onto a uniform log-frequency grid by interpolating the
log-intensities.  All downstream learning operates on the log-grid
representation.

Every function here is pure; there is no shared mutable state.
"""

from __future__ import annotations

import io
import struct
import wave
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import get_window

from .errors import (
    ConfigError,
    FormatError,
    InsufficientAudioError,
    RangeError,
    SilenceError,
    UnsupportedError,
)

REFERENCE_SAMPLE_RATE = 48_000
DEFAULT_DELTA = 0.1           # segment length, seconds
DEFAULT_F_MIN = 0.0           # Hz
DEFAULT_F_MAX = 20_000.0      # Hz
DEFAULT_BIN_WIDTH = 10.0      # Hz
DEFAULT_N_LOG_POINTS = 2_000
DEFAULT_LOG_F_LO = float(np.log10(50.0))
DEFAULT_LOG_F_HI = float(np.log10(20_000.0))
DEFAULT_TOP_SEGMENTS = 10

# Relative floor applied to zero-power bins before taking logs.
LOG_FLOOR_RATIO = 1e-12


@dataclass(frozen=True)
class AudioSignal:
    """Mono audio, amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ConfigError("audio samples must be finite")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class Segment:
    """One fixed-length analysis piece of a recording."""

    samples: np.ndarray
    duration: float
    rms_intensity: float


@dataclass(frozen=True)
class RawSpectrum:
    """Un-normalized binned power spectrum on a linear frequency grid."""

    intensities: np.ndarray
    bin_width: float
    f_min: float
    f_max: float

    @property
    def bin_centers(self) -> np.ndarray:
        n = len(self.intensities)
        return self.f_min + (np.arange(n) + 0.5) * self.bin_width


@dataclass(frozen=True)
class PowerSpectrum:
    """Normalized spectrum: sum(intensities) * bin_width == 1."""

    intensities: np.ndarray
    bin_width: float
    f_min: float
    f_max: float

    @property
    def bin_centers(self) -> np.ndarray:
        n = len(self.intensities)
        return self.f_min + (np.arange(n) + 0.5) * self.bin_width


@dataclass(frozen=True)
class LogGrid:
    """Uniform grid in log10(frequency/Hz)."""

    n_points: int = DEFAULT_N_LOG_POINTS
    log_f_lo: float = DEFAULT_LOG_F_LO
    log_f_hi: float = DEFAULT_LOG_F_HI

    def __post_init__(self):
        if self.n_points < 2:
            raise ConfigError("log grid needs at least 2 points")
        if not self.log_f_lo < self.log_f_hi:
            raise ConfigError("log_f_lo must be below log_f_hi")

    @property
    def log_frequencies(self) -> np.ndarray:
        return np.linspace(self.log_f_lo, self.log_f_hi, self.n_points)

    @property
    def frequencies_hz(self) -> np.ndarray:
        return 10.0 ** self.log_frequencies


@dataclass(frozen=True)
class LogSpectrum:
    """log10 intensities sampled on a uniform log10-frequency grid."""

    log_frequencies: np.ndarray
    log_intensities: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.log_frequencies)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to turn raw audio into feature-ready log spectra.

    Stored verbatim in model files so classification always replays the
    exact training-time pipeline.
    """

    delta: float = DEFAULT_DELTA
    f_min: float = DEFAULT_F_MIN
    f_max: float = DEFAULT_F_MAX
    bin_width: float = DEFAULT_BIN_WIDTH
    window: str = "hann"          # "hann" | "rectangular"
    spectrum_mode: str = "power"  # "power" | "amplitude"
    top_segments: int = DEFAULT_TOP_SEGMENTS
    feature_mode: str = "log"     # "log" | "raw"
    grid: LogGrid = field(default_factory=LogGrid)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "f_min": self.f_min,
            "f_max": self.f_max,
            "bin_width": self.bin_width,
            "window": self.window,
            "spectrum_mode": self.spectrum_mode,
            "top_segments": self.top_segments,
            "feature_mode": self.feature_mode,
            "log_grid": {
                "n_points": self.grid.n_points,
                "log_f_lo": self.grid.log_f_lo,
                "log_f_hi": self.grid.log_f_hi,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        g = d["log_grid"]
        return cls(
            delta=d["delta"],
            f_min=d["f_min"],
            f_max=d["f_max"],
            bin_width=d["bin_width"],
            window=d["window"],
            spectrum_mode=d["spectrum_mode"],
            top_segments=d["top_segments"],
            feature_mode=d["feature_mode"],
            grid=LogGrid(g["n_points"], g["log_f_lo"], g["log_f_hi"]),
        )

    def with_grid(self, grid: LogGrid) -> "PipelineConfig":
        return replace(self, grid=grid)


# ---------------------------------------------------------------------------
# WAV decode / encode
# ---------------------------------------------------------------------------

def decode_audio(data: bytes) -> AudioSignal:
    """Parse a 16-bit PCM WAV byte string into an AudioSignal.

    Stereo input keeps channel 0.  Non-PCM encodings, sample widths other
    than 16 bits and more than two channels raise UnsupportedError;
    structural problems raise FormatError.
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError("not a RIFF/WAVE container")
    pos = 12
    fmt = None
    frames = None
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise FormatError("fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise FormatError("data chunk truncated")
            frames = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned
    if fmt is None or frames is None:
        raise FormatError("missing fmt or data chunk")

    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if audio_format != 1:
        raise UnsupportedError(f"only PCM (format 1) supported, got format {audio_format}")
    if bits != 16:
        raise UnsupportedError(f"only 16-bit samples supported, got {bits}")
    if n_channels not in (1, 2):
        raise UnsupportedError(f"only mono or stereo supported, got {n_channels} channels")
    if sample_rate <= 0:
        raise FormatError("non-positive sample rate in header")

    n_values = len(frames) // 2
    raw = np.frombuffer(frames[:n_values * 2], dtype="<i2")
    if n_channels == 2:
        raw = raw[0::2]
    samples = raw.astype(np.float64) / 32768.0
    return AudioSignal(samples=samples, sample_rate=sample_rate)


def encode_wav(signal: AudioSignal) -> bytes:
    """Serialize an AudioSignal as 16-bit mono PCM WAV bytes."""
    ints = np.clip(np.rint(signal.samples * 32768.0), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(signal.sample_rate)
        w.writeframes(ints.tobytes())
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Segmentation
# ---------------------------------------------------------------------------

def segment(signal: AudioSignal, delta: float = DEFAULT_DELTA) -> list[Segment]:
    """Cut a signal into consecutive non-overlapping pieces of `delta` seconds.

    The trailing remainder shorter than one segment is discarded.
    """
    if delta <= 0:
        raise ConfigError("delta must be positive")
    seg_len = int(round(delta * signal.sample_rate))
    if seg_len < 1 or len(signal.samples) < seg_len:
        raise InsufficientAudioError(
            f"need at least {delta} s of audio ({seg_len} samples), "
            f"got {len(signal.samples)}"
        )
    n_seg = len(signal.samples) // seg_len
    out = []
    for i in range(n_seg):
        chunk = signal.samples[i * seg_len:(i + 1) * seg_len]
        rms = float(np.sqrt(np.mean(chunk ** 2)))
        out.append(Segment(samples=chunk, duration=delta, rms_intensity=rms))
    return out


def select_top_segments(segments: list[Segment], n: int = DEFAULT_TOP_SEGMENTS) -> list[Segment]:
    """Keep the n loudest segments (by RMS), preserving temporal order.

    Ties prefer the earlier segment.  Fewer than n available: all returned.
    """
    if n < 1:
        raise ConfigError("n must be at least 1")
    if not segments:
        raise InsufficientAudioError("no segments to select from")
    order = sorted(range(len(segments)), key=lambda i: (-segments[i].rms_intensity, i))
    keep = sorted(order[:n])
    return [segments[i] for i in keep]


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

def _window(name: str, n: int) -> np.ndarray:
    if name == "hann":
        return get_window("hann", n, fftbins=True)
    if name == "rectangular":
        return np.ones(n)
    raise ConfigError(f"unknown window {name!r}")


def power_spectrum(
    seg: Segment,
    f_min: float = DEFAULT_F_MIN,
    f_max: float = DEFAULT_F_MAX,
    bin_width: float = DEFAULT_BIN_WIDTH,
    window: str = "hann",
    spectrum_mode: str = "power",
) -> RawSpectrum:
    """Windowed FFT power, accumulated into linear bins of `bin_width` Hz.

    FFT bins whose center falls in [f_min, f_max) are summed into the
    output bin containing them (energy-preserving aggregation).  With the
    defaults this yields 2,000 bins of 10 Hz covering 0-20 kHz.
    """
    n = len(seg.samples)
    if n == 0:
        raise InsufficientAudioError("empty segment")
    if not (0 <= f_min < f_max):
        raise RangeError(f"need 0 <= f_min < f_max, got [{f_min}, {f_max})")
    if bin_width <= 0:
        raise RangeError("bin_width must be positive")
    sample_rate = n / seg.duration
    nyquist = sample_rate / 2.0
    if f_max > nyquist + 1e-9:
        raise RangeError(f"f_max {f_max} Hz above Nyquist {nyquist} Hz")
    n_bins_f = (f_max - f_min) / bin_width
    n_bins = int(round(n_bins_f))
    if abs(n_bins_f - n_bins) > 1e-9 or n_bins < 1:
        raise ConfigError("(f_max - f_min) must be an integer multiple of bin_width")

    w = _window(window, n)
    coeffs = np.fft.rfft(seg.samples * w)
    if spectrum_mode == "power":
        values = np.abs(coeffs) ** 2
    elif spectrum_mode == "amplitude":
        values = np.abs(coeffs)
    else:
        raise ConfigError(f"unknown spectrum_mode {spectrum_mode!r}")
    freqs = np.fft.rfftfreq(n, d=seg.duration / n)

    in_range = (freqs >= f_min) & (freqs < f_max)
    # FFT frequencies can sit a few ULPs below an exact bin edge; nudge before
    # flooring so boundary frequencies land in the bin that starts at them.
    idx = np.floor((freqs[in_range] - f_min) / bin_width + 1e-9).astype(np.int64)
    idx = np.clip(idx, 0, n_bins - 1)
    intensities = np.bincount(idx, weights=values[in_range], minlength=n_bins)
    return RawSpectrum(intensities=intensities, bin_width=bin_width, f_min=f_min, f_max=f_max)


def normalize(raw: RawSpectrum) -> PowerSpectrum:
    """Divide by total spectral mass so that sum(I) * bin_width == 1."""
    total = float(np.sum(raw.intensities))
    if total <= 0.0:
        raise SilenceError("all-zero spectrum")
    return PowerSpectrum(
        intensities=raw.intensities / (total * raw.bin_width),
        bin_width=raw.bin_width,
        f_min=raw.f_min,
        f_max=raw.f_max,
    )


def log_resample(spec: PowerSpectrum, grid: LogGrid | None = None) -> LogSpectrum:
    """Re-sample log10(intensity) onto a uniform log10(frequency) grid.

    Interpolation is linear in (log10 f, log10 I) between linear-grid bin
    centers; queries beyond the outermost centers clamp to the edge value.
    Zero-power bins are floored at LOG_FLOOR_RATIO x the max bin first so
    every output is finite.
    """
    grid = grid or LogGrid()
    if 10.0 ** grid.log_f_lo < spec.f_min + spec.bin_width - 1e-9:
        raise RangeError(
            "log grid reaches below the first usable linear bin "
            f"(10^{grid.log_f_lo:.3f} < {spec.f_min + spec.bin_width})"
        )
    if grid.log_f_hi > np.log10(spec.f_max) + 1e-12:
        raise RangeError("log grid extends beyond the spectrum's upper bound")

    centers = spec.bin_centers
    peak = float(np.max(spec.intensities))
    if peak <= 0.0:
        raise SilenceError("all-zero spectrum")
    floored = np.maximum(spec.intensities, peak * LOG_FLOOR_RATIO)
    log_i = np.interp(grid.log_frequencies, np.log10(centers), np.log10(floored))
    return LogSpectrum(log_frequencies=grid.log_frequencies, log_intensities=log_i)


# ---------------------------------------------------------------------------
# Convenience pipeline + CSV export
# ---------------------------------------------------------------------------

def signal_to_log_spectra(signal: AudioSignal, cfg: PipelineConfig) -> list[LogSpectrum]:
    """Full front end: segment, keep loudest, FFT, normalize, log-resample."""
    segs = select_top_segments(segment(signal, cfg.delta), cfg.top_segments)
    out = []
    for s in segs:
        raw = power_spectrum(
            s, cfg.f_min, cfg.f_max, cfg.bin_width,
            window=cfg.window, spectrum_mode=cfg.spectrum_mode,
        )
        out.append(log_resample(normalize(raw), cfg.grid))
    return out


def spectrum_to_csv(spec: PowerSpectrum | RawSpectrum) -> str:
    """CSV rendering (`frequency_hz,intensity`), one row per linear bin."""
    lines = ["frequency_hz,intensity"]
    for f, v in zip(spec.bin_centers, spec.intensities):
        lines.append(f"{float(f)!r},{float(v)!r}")
    return "\n".join(lines) + "\n"
