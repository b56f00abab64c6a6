"""Probe-frequency selection by Bayes-risk minimization.

The theoretical performance of a fitted Gaussian discriminant model is
1 - R, the prior-weighted probability that a point drawn from a class's
own Gaussian is assigned back to that class by the MAP rule.  We estimate
it by Monte Carlo: draw from each class-conditional, classify, count.

Frequencies are chosen by sequential coordinate descent on the
log-frequency grid: holding D-1 probes fixed, every unoccupied grid
index is tried in place of the remaining one, the model is re-fitted
from cached sufficient statistics, and the index with the lowest risk
wins.  Full passes repeat until the improvement falls below tolerance.

Determinism: one set of standard-normal draws, derived from the config
seed, is shared by every candidate evaluation in a run, so ranking noise
is common across candidates, restarts and passes; ties resolve by lowest
grid index.  Candidate evaluation always orders features canonically
(ascending grid index) so reported risks are reproducible by refitting
the returned set and calling estimate_bayes_risk with the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InsufficientDataError, ModelCorruptError, RangeError
from .gda import ClassModel, FrequencySet
from .spectra import LogGrid, LogSpectrum


@dataclass(frozen=True)
class RiskEstimate:
    """Monte-Carlo estimate of the Bayes risk R of a fitted model."""

    risk: float
    mc_samples: int
    seed: int

    def __post_init__(self):
        if not (0.0 <= self.risk <= 1.0):
            raise ConfigError(f"risk must lie in [0, 1], got {self.risk}")

    @property
    def performance(self) -> float:
        return 1.0 - self.risk


@dataclass(frozen=True)
class SelectConfig:
    """Knobs for the coordinate-descent frequency search."""

    mc_samples: int = 4000
    seed: int = 0
    tol: float = 1e-4
    max_passes: int = 10
    restarts: int = 3
    scan_stride: int = 1          # >1 scans coarsely, then refines around the best
    risk_mode: str = "mc"         # "mc" | "empirical"
    epsilon: float | None = None  # covariance ridge; None derives it from the data
    chunk: int = 128              # candidates per vectorized block
    # Screening: rank all candidates on a quarter of the draws, then
    # re-evaluate the best screen_top_k (plus the incumbent) on the full set.
    # Only fully-evaluated candidates can win, so results stay deterministic.
    screen_top_k: int = 32


@dataclass(frozen=True)
class SelectionResult:
    frequencies: FrequencySet
    risk: RiskEstimate
    epsilon: float
    coordinate_risks: np.ndarray  # risk after re-optimizing each coordinate, final pass
    passes: int
    initial_risk: float


def _draw_z(seed: int, n_classes: int, n_per: int, d: int) -> np.ndarray:
    rng = np.random.default_rng([seed])
    return rng.standard_normal((n_classes, n_per, d))


def _safe_cholesky(covs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched Cholesky; singular entries get a flag instead of an exception."""
    try:
        return np.linalg.cholesky(covs), np.ones(covs.shape[:-2], dtype=bool)
    except np.linalg.LinAlgError:
        chol = np.zeros_like(covs)
        ok = np.ones(covs.shape[:-2], dtype=bool)
        it = np.ndindex(covs.shape[:-2])
        for ix in it:
            try:
                chol[ix] = np.linalg.cholesky(covs[ix])
            except np.linalg.LinAlgError:
                ok[ix] = False
                chol[ix] = np.eye(covs.shape[-1])
        return chol, ok


def _factorize(covs: np.ndarray, d: int):
    """Cholesky, its inverse and log-determinants for a (..., D, D) stack."""
    chol, ok = _safe_cholesky(covs)
    linv = np.linalg.inv(np.where(ok[..., None, None], chol, np.eye(d)))
    diag = np.abs(np.diagonal(chol, axis1=-2, axis2=-1)) + np.where(ok[..., None], 0.0, 1.0)
    logdet = 2.0 * np.sum(np.log(diag), axis=-1)
    return chol, linv, logdet, ok


def _mc_risk_batch(
    means: np.ndarray, covs: np.ndarray, priors: np.ndarray, z: np.ndarray,
    chunk: int = 128,
) -> np.ndarray:
    """Risk for a batch of models sharing one set of normal draws.

    means (B, C, D); covs (B, C, D, D); z (C, n, D).  Returns (B,).
    """
    n_batch, n_classes, d = means.shape
    logpri = np.log(priors)
    risks = np.empty(n_batch)
    for start in range(0, n_batch, chunk):
        m = means[start:start + chunk]
        chol, linv, logdet, ok = _factorize(covs[start:start + chunk], d)
        b = len(m)
        acc = np.zeros(b)
        for cg in range(n_classes):
            x = m[:, cg, None, :] + z[cg] @ chol[:, cg].transpose(0, 2, 1)
            best = np.full((b, z.shape[1]), np.inf)
            pred = np.zeros((b, z.shape[1]), dtype=np.int64)
            for ce in range(n_classes):
                w = (x - m[:, ce, None, :]) @ linv[:, ce].transpose(0, 2, 1)
                # negated log-density up to shared constants; lower is better
                score = (w * w).sum(axis=2) + logdet[:, ce, None] - 2.0 * logpri[ce]
                better = score < best
                pred = np.where(better, ce, pred)
                best = np.where(better, score, best)
            acc += priors[cg] * np.mean(pred == cg, axis=1)
        block = 1.0 - acc
        block[~np.all(ok, axis=1)] = np.inf
        risks[start:start + chunk] = block
    return risks


def _empirical_risk_batch(
    means: np.ndarray, covs: np.ndarray, priors: np.ndarray,
    feats: np.ndarray, labels: np.ndarray,
) -> np.ndarray:
    """Prior-weighted training error for a batch of models.

    feats (B, N, D) aligned with each batch model's feature order.
    """
    n_batch, n_classes, d = means.shape
    chol, linv, logdet, ok = _factorize(covs, d)
    logpri = np.log(priors)
    best = np.full((n_batch, feats.shape[1]), np.inf)
    pred = np.zeros((n_batch, feats.shape[1]), dtype=np.int64)
    for ce in range(n_classes):
        w = (feats - means[:, ce, None, :]) @ linv[:, ce].transpose(0, 2, 1)
        score = (w * w).sum(axis=2) + logdet[:, ce, None] - 2.0 * logpri[ce]
        better = score < best
        pred = np.where(better, ce, pred)
        best = np.where(better, score, best)
    acc = np.zeros(n_batch)
    for c in range(n_classes):
        mask = labels == c
        acc += priors[c] * np.mean(pred[:, mask] == c, axis=1)
    risks = 1.0 - acc
    risks[~np.all(ok, axis=1)] = np.inf
    return risks


def estimate_bayes_risk(model: ClassModel, mc_samples: int, seed: int) -> RiskEstimate:
    """Monte-Carlo risk of a fitted model: sample each class, classify, count.

    mc_samples is split evenly across classes; deterministic given seed.
    """
    if mc_samples < 1:
        raise ConfigError("mc_samples must be at least 1")
    n_per = max(1, mc_samples // model.n_classes)
    z = _draw_z(seed, model.n_classes, n_per, model.d)
    risk = _mc_risk_batch(model.means[None], model.covs[None], model.priors, z)[0]
    if not np.isfinite(risk):
        raise ModelCorruptError("class covariance not positive definite")
    return RiskEstimate(risk=float(risk), mc_samples=mc_samples, seed=seed)


def random_frequencies(d: int, seed: int, grid: LogGrid) -> FrequencySet:
    """D distinct indices drawn uniformly from the log grid; seeded."""
    if d < 1:
        raise ConfigError("d must be at least 1")
    if d > grid.n_points:
        raise RangeError(f"cannot draw {d} distinct indices from a {grid.n_points}-point grid")
    rng = np.random.default_rng([seed])
    idx = rng.choice(grid.n_points, size=d, replace=False)
    return FrequencySet.from_indices(idx, grid)


# ---------------------------------------------------------------------------
# Coordinate-descent selector
# ---------------------------------------------------------------------------

class _TrainStats:
    """Per-class sufficient statistics over the full log grid."""

    def __init__(self, feats: np.ndarray, labels: np.ndarray, n_classes: int):
        self.n_classes = n_classes
        self.feats = feats
        self.labels = labels
        self.by_class = [np.ascontiguousarray(feats[labels == c]) for c in range(n_classes)]
        self.counts = np.array([len(a) for a in self.by_class])
        if np.any(self.counts < 2):
            raise InsufficientDataError("every class needs at least 2 training spectra")
        self.mean = np.stack([a.mean(axis=0) for a in self.by_class])      # (C, G)
        self.sq_mean = np.stack([(a ** 2).mean(axis=0) for a in self.by_class])
        self.priors = np.full(n_classes, 1.0 / n_classes)

    @property
    def n_grid(self) -> int:
        return self.feats.shape[1]

    def default_epsilon(self) -> float:
        var = self.sq_mean - self.mean ** 2
        return max(1e-6 * float(np.mean(var)), 1e-12)

    def cross_moments(self, cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """E[x_g x_j] for all g and the selected j, plus the j-block, per class."""
        n_cols = len(cols)
        q = np.empty((self.n_classes, self.n_grid, n_cols))
        f = np.empty((self.n_classes, n_cols, n_cols))
        for c, a in enumerate(self.by_class):
            sub = a[:, cols]
            q[c] = a.T @ sub / self.counts[c]
            f[c] = sub.T @ sub / self.counts[c]
        return q, f

    def model_params(self, cols: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
        """Means and ridged covariances for one feature subset (canonical order)."""
        d = len(cols)
        means = self.mean[:, cols]
        covs = np.empty((self.n_classes, d, d))
        for c, a in enumerate(self.by_class):
            sub = a[:, cols]
            centered = sub - means[c]
            covs[c] = centered.T @ centered / self.counts[c]
        covs += eps * np.eye(d)
        return means, covs


def _candidate_params(
    stats: _TrainStats, fixed: np.ndarray, cands: np.ndarray, eps: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fitted (means, covs) for every candidate set, plus the column order.

    Features are ordered canonically (candidate inserted into the sorted
    fixed set), so risks match what a refit of the final sorted set yields.
    """
    d = len(fixed) + 1
    n_cand = len(cands)
    means = np.empty((n_cand, stats.n_classes, d))
    covs = np.empty((n_cand, stats.n_classes, d, d))
    cols = np.empty((n_cand, d), dtype=np.int64)
    q, f_block = stats.cross_moments(fixed) if len(fixed) else (None, None)
    positions = np.searchsorted(fixed, cands)
    for p in np.unique(positions):
        sub = np.flatnonzero(positions == p)
        g = cands[sub]
        b = len(g)
        others = np.r_[0:p, p + 1:d]
        cols[np.ix_(sub, [p])] = g[:, None]
        cols[np.ix_(sub, others)] = fixed
        for c in range(stats.n_classes):
            m_g = stats.mean[c, g]
            var_g = stats.sq_mean[c, g] - m_g ** 2
            means[sub, c, p] = m_g
            covs[sub, c, p, p] = var_g + eps
            if len(fixed):
                m_f = stats.mean[c, fixed]
                cov_gf = q[c][g] - m_g[:, None] * m_f[None, :]
                f_cov = f_block[c] - np.outer(m_f, m_f) + eps * np.eye(d - 1)
                means[np.ix_(sub, [c], others)] = m_f[None, None, :]
                covs[np.ix_(sub, [c], [p], others)] = cov_gf[:, None, None, :]
                covs[np.ix_(sub, [c], others, [p])] = cov_gf[:, None, :, None]
                covs[np.ix_(sub, [c], others, others)] = f_cov[None, None, :, :]
    return means, covs, cols


def _candidate_risks(
    stats: _TrainStats,
    fixed: np.ndarray,
    cands: np.ndarray,
    eps: float,
    z: np.ndarray | None,
    cfg: "SelectConfig",
    must_keep=(),
) -> np.ndarray:
    """Risk of swapping each candidate into the open coordinate.

    With screening enabled, candidates outside the shortlist come back as
    +inf: they were only ranked on the cheap draws, so they are never
    allowed to win against fully evaluated ones.
    """
    means, covs, cols = _candidate_params(stats, fixed, cands, eps)
    if cfg.risk_mode != "mc":
        feats = stats.feats[:, cols].transpose(1, 0, 2)
        return _empirical_risk_batch(means, covs, stats.priors, feats, stats.labels)

    top_k = cfg.screen_top_k
    if top_k and len(cands) > 4 * top_k and z.shape[1] >= 64:
        z_small = z[:, :max(16, z.shape[1] // 4)]
        coarse = _mc_risk_batch(means, covs, stats.priors, z_small, cfg.chunk)
        keep = np.lexsort((cands, coarse))[:top_k]
        keep = np.union1d(keep, [int(np.flatnonzero(cands == m)[0])
                                 for m in must_keep if m in cands])
        risks = np.full(len(cands), np.inf)
        risks[keep] = _mc_risk_batch(means[keep], covs[keep], stats.priors, z, cfg.chunk)
        return risks
    return _mc_risk_batch(means, covs, stats.priors, z, cfg.chunk)


def _set_risk(stats, indices, eps, z, mode) -> float:
    cols = np.sort(np.asarray(indices))
    means, covs = stats.model_params(cols, eps)
    if mode == "mc":
        return float(_mc_risk_batch(means[None], covs[None], stats.priors, z)[0])
    feats = stats.feats[:, cols][None]
    return float(_empirical_risk_batch(means[None], covs[None], stats.priors,
                                       feats, stats.labels)[0])


def _scan_coordinate(stats, sel, i, eps, z, cfg) -> tuple[int, float]:
    """Try every allowed grid index at coordinate i; return the best (index, risk)."""
    fixed = np.sort(np.delete(np.asarray(sel), i))
    occupied = set(fixed.tolist())

    def run(cands: np.ndarray) -> np.ndarray:
        return _candidate_risks(stats, fixed, cands, eps, z, cfg, must_keep=(sel[i],))

    if cfg.scan_stride <= 1:
        cands = np.array([g for g in range(stats.n_grid) if g not in occupied],
                         dtype=np.int64)
        risks = run(cands)
    else:
        coarse = sorted((set(range(0, stats.n_grid, cfg.scan_stride)) | {sel[i]}) - occupied)
        coarse = np.array(coarse, dtype=np.int64)
        coarse_risks = run(coarse)
        best = coarse[np.lexsort((coarse, coarse_risks))[0]]
        lo = max(0, int(best) - cfg.scan_stride + 1)
        hi = min(stats.n_grid, int(best) + cfg.scan_stride)
        extra = np.array(
            [g for g in range(lo, hi) if g not in occupied and g not in set(coarse.tolist())],
            dtype=np.int64,
        )
        if len(extra):
            cands = np.concatenate([coarse, extra])
            risks = np.concatenate([coarse_risks, run(extra)])
        else:
            cands, risks = coarse, coarse_risks
    j = np.lexsort((cands, risks))[0]
    return int(cands[j]), float(risks[j])


def _initial_indices(d: int, n_grid: int, restart: int, seed: int) -> np.ndarray:
    if restart == 0:
        idx = np.unique(np.round(np.linspace(0, n_grid - 1, d + 2)[1:-1]).astype(np.int64))
        k = 0
        while len(idx) < d:  # collisions only on very coarse grids
            if k not in idx:
                idx = np.sort(np.append(idx, k))
            k += 1
        return idx
    rng = np.random.default_rng([seed, restart])
    return np.sort(rng.choice(n_grid, size=d, replace=False))


def select_frequencies(
    train, d: int, config: SelectConfig | None = None, grid: LogGrid | None = None
) -> SelectionResult:
    """Greedy coordinate-descent search for the D lowest-risk probe frequencies.

    `train` is a sequence of (LogSpectrum, class index) pairs, or a
    pre-stacked (features, labels) tuple where features is (N, G).
    """
    config = config or SelectConfig()
    if isinstance(train, tuple) and len(train) == 2 and isinstance(train[0], np.ndarray):
        feats, labels = train
        feats = np.asarray(feats, dtype=np.float64)
        labels = np.asarray(labels)
        if grid is None:
            raise ConfigError("grid is required with pre-stacked features")
    else:
        pairs = list(train)
        if not pairs:
            raise InsufficientDataError("empty training set")
        feats = np.stack([s.log_intensities for s, _ in pairs])
        labels = np.array([c for _, c in pairs])
        first = pairs[0][0]
        if grid is None:
            grid = LogGrid(
                n_points=first.n_points,
                log_f_lo=float(first.log_frequencies[0]),
                log_f_hi=float(first.log_frequencies[-1]),
            )
    classes = np.unique(labels)
    if len(classes) < 2:
        raise InsufficientDataError("need at least 2 classes to separate")
    n_classes = int(classes.max()) + 1
    stats = _TrainStats(feats, labels, n_classes)
    if d < 1:
        raise ConfigError("d must be at least 1")
    if d >= stats.counts.min():
        raise InsufficientDataError(
            f"d={d} must be below the smallest class count {stats.counts.min()}"
        )
    if d > stats.n_grid:
        raise RangeError("d exceeds the grid size")

    eps = config.epsilon if config.epsilon is not None else stats.default_epsilon()
    n_per = max(1, config.mc_samples // n_classes)
    z = _draw_z(config.seed, n_classes, n_per, d) if config.risk_mode == "mc" else None

    best_run = None
    for restart in range(max(1, config.restarts)):
        sel = list(_initial_indices(d, stats.n_grid, restart, config.seed))
        risk_cur = _set_risk(stats, sel, eps, z, config.risk_mode)
        init_risk = risk_cur
        coord_risks = np.full(d, risk_cur)
        passes = 0
        for _ in range(config.max_passes):
            passes += 1
            risk_at_pass_start = risk_cur
            for i in range(d):
                idx, risk = _scan_coordinate(stats, sel, i, eps, z, config)
                if (risk, idx) <= (risk_cur, sel[i]):
                    sel[i] = idx
                    risk_cur = risk
                coord_risks[i] = risk_cur
            if risk_at_pass_start - risk_cur < config.tol:
                break
        final = np.sort(np.asarray(sel, dtype=np.int64))
        final_risk = _set_risk(stats, final, eps, z, config.risk_mode)
        key = (final_risk, restart)
        if best_run is None or key < best_run[0]:
            best_run = (key, final, coord_risks.copy(), passes, init_risk)

    _, final, coord_risks, passes, init_risk = best_run
    freqs = FrequencySet.from_indices(final, grid)
    estimate = RiskEstimate(risk=float(best_run[0][0]), mc_samples=config.mc_samples,
                            seed=config.seed)
    return SelectionResult(
        frequencies=freqs, risk=estimate, epsilon=eps,
        coordinate_risks=coord_risks, passes=passes, initial_risk=init_risk,
    )


def selection_to_csv(result: SelectionResult) -> str:
    """CSV rendering of a selected set: rank, frequency, risk after its pass."""
    lines = ["rank,frequency_hz,risk_after"]
    for rank, (f, r) in enumerate(zip(result.frequencies.frequencies_hz,
                                      result.coordinate_risks), start=1):
        lines.append(f"{rank},{float(f)!r},{float(r)!r}")
    return "\n".join(lines) + "\n"
