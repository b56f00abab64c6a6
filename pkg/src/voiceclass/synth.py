"""Deterministic synthetic voice corpus generator.

Stands in for unavailable human recordings.  Each take is a vibrato'd
harmonic series at the (detuned) scale fundamental over a resonance-
shaped noise pedestal.  The class structure lives in the spectrum, which
is the point: male voices sing one octave below female voices and carry
low-band energy on every key; trained singers add a formant bump (males
near 3 kHz, females near 10 kHz); every subject also gets personal
resonances and their own rolloff, pitch error and noisiness, so the
classes are learnable but not trivially so.

Everything is reproducible: the corpus seed fans out to per-take seeds
through numpy SeedSequence, so generation order (or parallelism) cannot
change the output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Take
from .errors import ConfigError
from .spectra import AudioSignal
from .tasks import SCALE_LABELS

GENERATOR_VERSION = 1

# Equal temperament, A4 = 440 Hz.  C major do..do over one octave.
_C_MAJOR_MIDI = [60, 62, 64, 65, 67, 69, 71, 72]  # C4..C5


def _midi_to_hz(note: int) -> float:
    return 440.0 * 2.0 ** ((note - 69) / 12.0)


def scale_fundamentals(gender: str) -> np.ndarray:
    """Fundamentals of do..do in C major; males one octave below females."""
    base = np.array([_midi_to_hz(n) for n in _C_MAJOR_MIDI])
    if gender == "F":
        return base
    if gender == "M":
        return base / 2.0
    raise ConfigError(f"gender must be 'M' or 'F', got {gender!r}")


@dataclass(frozen=True)
class VoiceProfile:
    """Spectral recipe for one subject singing one note."""

    fundamental_hz: float
    n_harmonics: int
    harmonic_decay: float
    formant_bumps: tuple = ()   # (center_hz, bandwidth_hz, power_gain) triples
    jitter: float = 0.0         # relative per-harmonic frequency perturbation std
    noise_floor: float = 0.0    # broadband noise power relative to harmonic power
    vibrato_rate_hz: float = 0.0
    vibrato_extent: float = 0.0  # relative frequency sweep; smears high harmonics
    gender: str = "M"
    choral: str = "N"

    def __post_init__(self):
        if self.fundamental_hz <= 0:
            raise ConfigError("fundamental must be positive")
        if not (0 <= self.jitter < 1) or not (0 <= self.noise_floor < 1):
            raise ConfigError("jitter and noise_floor must lie in [0, 1)")
        if any(g < 0 for _, _, g in self.formant_bumps):
            raise ConfigError("bump gains must be non-negative")


def _bump_gain(freqs_hz: np.ndarray, bumps) -> np.ndarray:
    gain = np.ones_like(freqs_hz)
    for center, bandwidth, g in bumps:
        gain += g * np.exp(-0.5 * ((freqs_hz - center) / bandwidth) ** 2)
    return gain


NOISE_PERIOD = 0.1  # seconds; matches the analysis segment length


def _pedestal_noise(profile: VoiceProfile, n: int, sample_rate: int,
                    harmonic_power: float, rng: np.random.Generator) -> np.ndarray:
    """Formant-shaped voiced-source noise, periodic at the segment length.

    The vocal-tract resonances shape everything the voice emits, breath
    noise included, so the bump gains filter the noise spectrum.  Real
    voice-quality cues are stable resonances, not sample noise, so the
    pedestal is synthesized as one 0.1 s period of a dense random partial
    cloud and tiled: every analysis window then sees the same levels,
    while per-take bin levels stay random across takes and subjects.
    """
    period = max(2, int(round(sample_rate * NOISE_PERIOD)))
    f_bins = np.fft.rfftfreq(period, 1.0 / sample_rate)
    shape = _bump_gain(f_bins, profile.formant_bumps)
    shape[0] = 0.0
    # Random phases, deterministic magnitudes: per-bin levels are a stable
    # property of the voice, not a sample-noise lottery.
    u = np.exp(2j * np.pi * rng.uniform(size=len(f_bins)))
    one_period = np.fft.irfft(u * np.sqrt(shape), n=period)
    cur = float(np.mean(one_period ** 2))
    if cur <= 0:
        return np.zeros(n)
    one_period *= np.sqrt(profile.noise_floor * harmonic_power / cur)
    reps = int(np.ceil(n / period))
    return np.tile(one_period, reps)[:n]


def generate_take(
    profile: VoiceProfile, duration: float, sample_rate: int, seed: int
) -> AudioSignal:
    """Synthesize one take; deterministic given the seed, peak at 0.9."""
    rng = np.random.default_rng([seed])
    n = int(round(duration * sample_rate))
    k = np.arange(1, profile.n_harmonics + 1)
    freqs = k * profile.fundamental_hz * (
        1.0 + profile.jitter * rng.standard_normal(len(k))
    )
    keep = freqs < sample_rate / 2.0
    freqs, k = freqs[keep], k[keep]
    powers = k.astype(np.float64) ** (-profile.harmonic_decay)
    powers *= _bump_gain(freqs, profile.formant_bumps)
    amps = np.sqrt(powers)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(k))
    t = np.arange(n) / sample_rate
    if profile.vibrato_extent > 0 and profile.vibrato_rate_hz > 0:
        # Coherent frequency wobble: instantaneous frequency follows
        # f_k * (1 + extent*sin(2*pi*rate*t + psi)) for every harmonic.
        rate = profile.vibrato_rate_hz
        psi = rng.uniform(0.0, 2.0 * np.pi)
        t_warp = t + profile.vibrato_extent / (2.0 * np.pi * rate) * (
            np.cos(psi) - np.cos(2.0 * np.pi * rate * t + psi)
        )
    else:
        t_warp = t
    # Accumulate harmonics in small blocks: keeps the working set in cache
    # instead of materializing an (n_harmonics, n) array.
    x = np.zeros(n)
    block = 8
    buf = np.empty((block, n))
    for i in range(0, len(k), block):
        f, a, p = freqs[i:i + block], amps[i:i + block], phases[i:i + block]
        b = buf[:len(f)]
        np.multiply.outer(2.0 * np.pi * f, t_warp, out=b)
        b += p[:, None]
        np.sin(b, out=b)
        b *= a[:, None]
        x += b.sum(axis=0)
    if profile.noise_floor > 0:
        x = x + _pedestal_noise(profile, n, sample_rate, float(np.sum(powers)) / 2.0, rng)
    peak = float(np.max(np.abs(x)))
    if peak > 0:
        x = x * (0.9 / peak)
    return AudioSignal(samples=x, sample_rate=sample_rate)


@dataclass(frozen=True)
class CorpusSpec:
    """Composition and voice-parameter ranges for a synthetic corpus.

    The default composition mirrors a 50-subject study population:
    23 singers (11 male, 12 female) and 27 non-singers (14 male, 13 female).
    """

    n_male_singers: int = 11
    n_female_singers: int = 12
    n_male_nonsingers: int = 14
    n_female_nonsingers: int = 13
    take_duration: float = 1.5
    sample_rate: int = 48_000
    decay_range: tuple = (1.0, 1.4)
    jitter_range: tuple = (0.001, 0.003)
    noise_range: tuple = (0.004, 0.006)
    detune_range: tuple = (-0.02, 0.02)      # subjects do not sing exactly on pitch
    take_detune_range: tuple = (-0.02, 0.02)  # and not the same way on every take
    vibrato_rate_range: tuple = (4.5, 6.5)   # Hz
    vibrato_extent_range: tuple = (0.004, 0.012)
    male_formant: tuple = (3000.0, 300.0)    # center, bandwidth
    female_formant: tuple = (10000.0, 800.0)
    formant_gain_range: tuple = (22.0, 36.0)
    # Voiced-source noise rides under the register: males carry low-band
    # energy on every key, females one octave up (the gender cue).
    male_register: tuple = (175.0, 45.0)
    female_register: tuple = (420.0, 100.0)
    register_gain_range: tuple = (12.0, 20.0)
    # Individual vocal-tract resonances, placed away from the class cues.
    # They randomize each subject's total spectral mass, so normalization
    # offsets cannot betray class membership.
    personal_bumps: tuple = (1, 2)           # min/max count per subject
    personal_center_range: tuple = (700.0, 7000.0)
    personal_q: tuple = (0.06, 0.12)         # bandwidth as fraction of center
    personal_gain_range: tuple = (5.0, 15.0)
    # Harmonic energy fades into shaped aspiration noise above this point,
    # so the high bands carry resonance structure rather than comb hits.
    harmonics_to_hz: float = 6_000.0
    max_harmonics: int = 200

    def groups(self):
        return [
            ("M", "S", self.n_male_singers),
            ("M", "N", self.n_male_nonsingers),
            ("F", "S", self.n_female_singers),
            ("F", "N", self.n_female_nonsingers),
        ]


def _subject_profile_params(spec: CorpusSpec, rng: np.random.Generator,
                            gender: str, choral: str) -> dict:
    params = {
        "harmonic_decay": float(rng.uniform(*spec.decay_range)),
        "jitter": float(rng.uniform(*spec.jitter_range)),
        "noise_floor": float(rng.uniform(*spec.noise_range)),
        "detune": float(rng.uniform(*spec.detune_range)),
        "vibrato_rate_hz": float(rng.uniform(*spec.vibrato_rate_range)),
        "vibrato_extent": float(rng.uniform(*spec.vibrato_extent_range)),
    }
    reg_center, reg_bw = spec.male_register if gender == "M" else spec.female_register
    bumps = [(float(reg_center), float(reg_bw),
              float(rng.uniform(*spec.register_gain_range)))]
    lo_c, hi_c = spec.personal_center_range
    for _ in range(int(rng.integers(spec.personal_bumps[0], spec.personal_bumps[1] + 1))):
        center = float(np.exp(rng.uniform(np.log(lo_c), np.log(hi_c))))
        bumps.append((center, center * float(rng.uniform(*spec.personal_q)),
                      float(rng.uniform(*spec.personal_gain_range))))
    if choral == "S":
        center, bandwidth = spec.male_formant if gender == "M" else spec.female_formant
        bumps.append((float(center), float(bandwidth),
                      float(rng.uniform(*spec.formant_gain_range))))
    params["formant_bumps"] = tuple(bumps)
    return params


def generate_corpus(spec: CorpusSpec | None = None, seed: int = 0) -> Corpus:
    """Build the full synthetic corpus: every subject sings all 8 scales."""
    spec = spec or CorpusSpec()
    root = np.random.SeedSequence(seed)
    takes: list[Take] = []
    profiles: dict[str, dict] = {}
    subject_idx = 0
    for gender, choral, count in spec.groups():
        for _ in range(count):
            sid = f"s{subject_idx:03d}"
            subj_seq = np.random.SeedSequence(entropy=seed, spawn_key=(subject_idx,))
            subj_rng = np.random.default_rng(subj_seq)
            params = _subject_profile_params(spec, subj_rng, gender, choral)
            profiles[sid] = {"gender": gender, "choral": choral, **params}
            detune = params.pop("detune")
            fundamentals = scale_fundamentals(gender) * (1.0 + detune)
            for scale_idx, f0 in enumerate(fundamentals):
                take_seq = np.random.SeedSequence(
                    entropy=seed, spawn_key=(subject_idx, scale_idx)
                )
                state = take_seq.generate_state(2)
                take_seed = int(state[0])
                take_rng = np.random.default_rng([int(state[1])])
                f0_take = float(f0) * (1.0 + take_rng.uniform(*spec.take_detune_range))
                n_harm = min(spec.max_harmonics, int(spec.harmonics_to_hz // f0_take))
                profile = VoiceProfile(
                    fundamental_hz=f0_take,
                    n_harmonics=n_harm,
                    gender=gender,
                    choral=choral,
                    **params,
                )
                signal = generate_take(profile, spec.take_duration,
                                       spec.sample_rate, take_seed)
                takes.append(Take(
                    subject_id=sid, gender=gender, choral=choral,
                    scale=scale_idx, signal=signal, seed=take_seed,
                ))
            subject_idx += 1
    corpus = Corpus(takes=takes, manifest={
        "generator_version": GENERATOR_VERSION,
        "seed": seed,
        "n_subjects": subject_idx,
        "scales": list(SCALE_LABELS),
        "spec": {k: getattr(spec, k) for k in (
            "n_male_singers", "n_female_singers", "n_male_nonsingers",
            "n_female_nonsingers", "take_duration", "sample_rate",
        )},
        "profiles": profiles,
    })
    corpus.validate()
    return corpus


def small_corpus_spec(per_group: int = 6) -> CorpusSpec:
    """A reduced corpus with the same class structure, for fast experiments."""
    return CorpusSpec(
        n_male_singers=per_group, n_female_singers=per_group,
        n_male_nonsingers=per_group, n_female_nonsingers=per_group,
    )
