"""Gaussian discriminant classification.

Each class is modeled as a multivariate Gaussian over the feature vector
(the spectral log-intensities at the selected probe frequencies).  The
posterior over classes comes from Bayes' theorem with equal priors, and
the reported label is the posterior argmax.  Posteriors computed from
several 0.1 s segments are combined by arithmetic averaging before the
argmax.

All density arithmetic stays in the log domain: normalized spectra span
many decades and naive densities overflow or underflow well before D=8.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridError, InsufficientDataError, ModelCorruptError, FormatError
from .spectra import LogSpectrum, PipelineConfig

MODEL_FORMAT_VERSION = 1

# Ridge applied to each class covariance, relative to its mean diagonal.
DEFAULT_EPSILON_RATIO = 1e-6
MIN_EPSILON = 1e-12


@dataclass(frozen=True)
class FrequencySet:
    """The D probe positions on the log-frequency grid, sorted ascending."""

    indices: np.ndarray        # distinct grid indices, ascending
    frequencies_hz: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if len(np.unique(idx)) != len(idx):
            raise GridError("duplicate grid indices in frequency set")
        if np.any(np.diff(idx) <= 0):
            raise GridError("frequency set indices must be sorted ascending")

    @property
    def d(self) -> int:
        return len(self.indices)

    @staticmethod
    def from_indices(indices, grid) -> "FrequencySet":
        idx = np.sort(np.asarray(indices, dtype=np.int64))
        return FrequencySet(indices=idx, frequencies_hz=grid.frequencies_hz[idx])


@dataclass(frozen=True)
class ClassModel:
    """Fitted per-class Gaussians plus everything needed to reuse them."""

    task: str
    class_names: list[str]
    means: np.ndarray       # (C, D)
    covs: np.ndarray        # (C, D, D), symmetric positive definite
    priors: np.ndarray      # (C,), sums to 1
    epsilon: float
    frequencies: FrequencySet | None = None
    pipeline: PipelineConfig | None = None

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def d(self) -> int:
        return self.means.shape[1]


def extract_features(spec: LogSpectrum, freqs: FrequencySet, mode: str = "log") -> np.ndarray:
    """Feature vector: the (log) intensities at the probe grid indices."""
    idx = np.asarray(freqs.indices)
    if np.any(idx < 0) or np.any(idx >= spec.n_points):
        raise GridError("frequency index outside the log grid")
    on_grid = np.isclose(
        spec.log_frequencies[idx], np.log10(freqs.frequencies_hz), atol=1e-9
    )
    if not np.all(on_grid):
        raise GridError("frequency set does not lie on this spectrum's grid")
    values = spec.log_intensities[idx]
    if mode == "raw":
        return 10.0 ** values
    return values.copy()


def fit(
    features: np.ndarray,
    labels: np.ndarray,
    task: str,
    class_names: list[str],
    epsilon: float | None = None,
    frequencies: FrequencySet | None = None,
    pipeline: PipelineConfig | None = None,
) -> ClassModel:
    """Fit per-class mean and covariance (ML divisor N_c) with a ridge.

    epsilon=None picks 1e-6 x the mean covariance diagonal across classes,
    floored so duplicated samples still yield a positive definite ridge.
    Priors are equal (1/C).
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2:
        raise InsufficientDataError("features must be a 2-D array (N, D)")
    n_c = len(class_names)
    d = X.shape[1]
    means = np.empty((n_c, d))
    covs = np.empty((n_c, d, d))
    for c in range(n_c):
        Xc = X[y == c]
        if len(Xc) < 2:
            raise InsufficientDataError(
                f"class {class_names[c]!r} has {len(Xc)} samples; need at least 2"
            )
        mu = Xc.mean(axis=0)
        centered = Xc - mu
        means[c] = mu
        covs[c] = centered.T @ centered / len(Xc)
    if epsilon is None:
        epsilon = max(DEFAULT_EPSILON_RATIO * float(np.mean(np.trace(covs, axis1=1, axis2=2)) / d),
                      MIN_EPSILON)
    covs += epsilon * np.eye(d)
    priors = np.full(n_c, 1.0 / n_c)
    return ClassModel(
        task=task, class_names=list(class_names), means=means, covs=covs,
        priors=priors, epsilon=float(epsilon), frequencies=frequencies,
        pipeline=pipeline,
    )


def _cholesky_factors(model: ClassModel) -> tuple[np.ndarray, np.ndarray]:
    """Lower Cholesky factors and log-determinants of the class covariances."""
    try:
        chol = np.linalg.cholesky(model.covs)
    except np.linalg.LinAlgError as exc:
        raise ModelCorruptError("class covariance not positive definite") from exc
    logdets = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
    return chol, logdets


def log_densities(model: ClassModel, x: np.ndarray) -> np.ndarray:
    """log P(x|c) for every class; x may be (D,) or (N, D). Returns (N, C)."""
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if X.shape[1] != model.d:
        raise GridError(f"feature dimension {X.shape[1]} != model D {model.d}")
    chol, logdets = _cholesky_factors(model)
    n, d = X.shape
    out = np.empty((n, model.n_classes))
    for c in range(model.n_classes):
        delta = X - model.means[c]
        z = np.linalg.solve(chol[c], delta.T)  # lower-triangular solve
        maha = np.sum(z ** 2, axis=0)
        out[:, c] = -0.5 * (d * np.log(2.0 * np.pi) + logdets[c] + maha)
    return out


def class_conditional_density(model: ClassModel, x: np.ndarray, c: int) -> float:
    """The multivariate Gaussian density P(x|c) (computed in log space)."""
    return float(np.exp(log_densities(model, x)[0, c]))


def posterior(model: ClassModel, x: np.ndarray) -> np.ndarray:
    """P(c|x) by Bayes' theorem, log-sum-exp stabilized; sums to 1 exactly."""
    scores = log_densities(model, x)[0] + np.log(model.priors)
    scores -= np.max(scores)
    p = np.exp(scores)
    return p / p.sum()


def posteriors(model: ClassModel, X: np.ndarray) -> np.ndarray:
    """Row-wise posterior for a batch of feature vectors; returns (N, C)."""
    scores = log_densities(model, X) + np.log(model.priors)
    scores -= scores.max(axis=1, keepdims=True)
    p = np.exp(scores)
    return p / p.sum(axis=1, keepdims=True)


def average_posteriors(posts) -> np.ndarray:
    """Arithmetic mean of posterior vectors; still a distribution."""
    posts = list(posts)
    if not posts:
        raise InsufficientDataError("no posteriors to average")
    return np.mean(np.stack(posts), axis=0)


def map_class(post: np.ndarray) -> int:
    """Argmax of the posterior; ties break toward the lowest index."""
    return int(np.argmax(post))


# ---------------------------------------------------------------------------
# Serialization (versioned JSON; see docs/model_format.md)
# ---------------------------------------------------------------------------

def _model_payload(model: ClassModel) -> dict:
    if model.frequencies is None or model.pipeline is None:
        raise ModelCorruptError("only pipeline-complete models can be serialized")
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "task": model.task,
        "class_names": model.class_names,
        "d": model.d,
        "grid_indices": model.frequencies.indices.tolist(),
        "frequencies_hz": model.frequencies.frequencies_hz.tolist(),
        "means": model.means.tolist(),
        "covs": model.covs.tolist(),
        "priors": model.priors.tolist(),
        "epsilon": model.epsilon,
        "pipeline": model.pipeline.to_dict(),
    }


def model_fingerprint(model: ClassModel) -> str:
    """Stable hash of the full parameter payload."""
    blob = json.dumps(_model_payload(model), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_model(model: ClassModel, path: str | Path) -> None:
    payload = _model_payload(model)
    payload["fingerprint"] = model_fingerprint(model)
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def load_model(path: str | Path) -> ClassModel:
    try:
        payload = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"not a model file: {path}") from exc
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise FormatError(
            f"unsupported model format version {payload.get('format_version')}"
        )
    freqs = FrequencySet(
        indices=np.asarray(payload["grid_indices"], dtype=np.int64),
        frequencies_hz=np.asarray(payload["frequencies_hz"]),
    )
    return ClassModel(
        task=payload["task"],
        class_names=list(payload["class_names"]),
        means=np.asarray(payload["means"]),
        covs=np.asarray(payload["covs"]),
        priors=np.asarray(payload["priors"]),
        epsilon=payload["epsilon"],
        frequencies=freqs,
        pipeline=PipelineConfig.from_dict(payload["pipeline"]),
    )


def models_equal(a: ClassModel, b: ClassModel) -> bool:
    """Bit-exact equality of all parameters (round-trip check)."""
    return (
        a.task == b.task
        and a.class_names == b.class_names
        and np.array_equal(a.means, b.means)
        and np.array_equal(a.covs, b.covs)
        and np.array_equal(a.priors, b.priors)
        and a.epsilon == b.epsilon
        and a.frequencies is not None and b.frequencies is not None
        and np.array_equal(a.frequencies.indices, b.frequencies.indices)
        and np.array_equal(a.frequencies.frequencies_hz, b.frequencies.frequencies_hz)
        and a.pipeline == b.pipeline
    )
