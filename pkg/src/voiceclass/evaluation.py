"""Cross-validation harness and experiment protocols.

Splits are always by subject: all segments of a subject land on the same
side of a fold, and probe frequencies are re-selected inside each fold
from training subjects only, so nothing about a test subject can leak
into the model.  A classified unit is one take (a 1.5 s recording): its
ten loudest 0.1 s segments each yield a posterior, the posteriors are
averaged, and the argmax is the predicted label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as sps

from . import gda
from .corpus import Corpus
from .errors import ConfigError, InsufficientDataError, JoinError
from .riskopt import SelectConfig, random_frequencies, select_frequencies
from .spectra import LogGrid, PipelineConfig, signal_to_log_spectra
from .tasks import CHORAL_LABELS, GENDER_LABELS, task_labels

POPULATION_FILTERS = ("all", "M", "F", "S", "N")


@dataclass(frozen=True)
class TakeMeta:
    subject_id: str
    gender: str
    choral: str
    scale: int


@dataclass
class CorpusFeatures:
    """Log-grid features for every kept segment of every take."""

    matrix: np.ndarray            # (n_rows, G)
    take_meta: list[TakeMeta]
    take_rows: list[np.ndarray]   # rows per take, temporal order
    grid: LogGrid
    pipeline: PipelineConfig

    @property
    def n_takes(self) -> int:
        return len(self.take_meta)


def extract_corpus_features(corpus: Corpus, cfg: PipelineConfig | None = None) -> CorpusFeatures:
    """Run the full audio front end over a corpus once."""
    cfg = cfg or PipelineConfig()
    rows: list[np.ndarray] = []
    take_meta: list[TakeMeta] = []
    take_rows: list[np.ndarray] = []
    n = 0
    for take in corpus.takes:
        specs = signal_to_log_spectra(take.signal, cfg)
        block = np.stack([s.log_intensities for s in specs])
        rows.append(block)
        take_meta.append(TakeMeta(take.subject_id, take.gender, take.choral, take.scale))
        take_rows.append(np.arange(n, n + len(block)))
        n += len(block)
    return CorpusFeatures(
        matrix=np.concatenate(rows, axis=0),
        take_meta=take_meta,
        take_rows=take_rows,
        grid=cfg.grid,
        pipeline=cfg,
    )


@dataclass(frozen=True)
class FoldSpec:
    """How to draw test subjects for one task.

    n_test maps a subject group to the number of test subjects drawn from
    it; the group "*" draws from the whole (filtered) population.  The
    population filter restricts by gender or choral status (e.g. the
    male-only choral experiment).
    """

    task: str
    n_test: tuple
    n_repeats: int = 20
    seed: int = 0
    population: str = "all"

    def __post_init__(self):
        if self.population not in POPULATION_FILTERS:
            raise ConfigError(f"population must be one of {POPULATION_FILTERS}")


def default_fold_spec(task: str, n_repeats: int = 20, seed: int = 0,
                      population: str | None = None) -> FoldSpec:
    """Paper-style fold sizes: scale 5/23 singers; gender 5+5; choral 5+5;
    male-only choral 3+3."""
    if task == "scale":
        return FoldSpec(task, (("*", 5),), n_repeats, seed, population or "S")
    if task == "gender":
        return FoldSpec(task, (("M", 5), ("F", 5)), n_repeats, seed, population or "all")
    if task in ("choral", "joint"):
        if population in ("M", "F"):
            return FoldSpec(task, (("S", 3), ("N", 3)), n_repeats, seed, population)
        return FoldSpec(task, (("S", 5), ("N", 5)), n_repeats, seed, population or "all")
    raise ConfigError(f"unknown task {task!r}")


def scaled_fold_spec(task: str, features: "CorpusFeatures", n_repeats: int = 20,
                     seed: int = 0, population: str | None = None,
                     fraction: float = 0.25) -> FoldSpec:
    """Fold sizes proportional to a (possibly reduced) corpus."""
    base = default_fold_spec(task, n_repeats, seed, population)
    groups = _group_subjects(features, base)
    n_test = tuple(
        (g, max(1, int(math.floor(len(groups[g]) * fraction)))) for g, _ in base.n_test
    )
    return replace(base, n_test=n_test)


@dataclass
class PerformanceReport:
    task: str
    d: int
    mode: str
    mean_accuracy: float
    std_accuracy: float
    fold_accuracies: list[float]
    frequency_sets: list[list[float]]
    config: dict = field(default_factory=dict)
    duration_s: float | None = None
    skipped_folds: int = 0


# ---------------------------------------------------------------------------
# Split machinery
# ---------------------------------------------------------------------------

def _population_mask(meta: TakeMeta, population: str) -> bool:
    if population == "all":
        return True
    if population in GENDER_LABELS:
        return meta.gender == population
    return meta.choral == population


def _group_subjects(features: CorpusFeatures, fold: FoldSpec) -> dict[str, list[str]]:
    """Subject ids per test group, deterministic order."""
    subj_attrs: dict[str, TakeMeta] = {}
    for meta in features.take_meta:
        if _population_mask(meta, fold.population):
            subj_attrs.setdefault(meta.subject_id, meta)
    groups: dict[str, list[str]] = {g: [] for g, _ in fold.n_test}
    for sid in sorted(subj_attrs):
        meta = subj_attrs[sid]
        for g, _ in fold.n_test:
            if g == "*" or meta.gender == g or meta.choral == g:
                groups[g].append(sid)
    return groups


@dataclass
class _Split:
    train_rows: np.ndarray
    train_labels: np.ndarray
    test_takes: list[int]           # take indices
    test_labels: np.ndarray
    label_of_take: np.ndarray       # task label per take (after any shuffle)
    rng: np.random.Generator
    selection_seed: int


def _iter_splits(features: CorpusFeatures, fold: FoldSpec, task: str,
                 shuffle_labels: bool = False):
    """Yield one subject-level split per repeat, seeded and leakage-free."""
    root = np.random.SeedSequence(entropy=fold.seed)
    children = root.spawn(fold.n_repeats)
    base_groups = _group_subjects(features, fold)
    for g, count in fold.n_test:
        if count >= len(base_groups[g]):
            raise ConfigError(
                f"fold requests {count} test subjects from group {g!r} "
                f"of size {len(base_groups[g])}"
            )
    pop_subjects = sorted({s for ss in base_groups.values() for s in ss})
    n_takes = features.n_takes
    for child in children:
        rng = np.random.default_rng(child)
        selection_seed = int(child.generate_state(1, dtype=np.uint32)[0])

        # Optional permutation null: reassign labels across subjects.
        subj_label_override: dict[str, tuple[str, str]] = {}
        scale_perm: dict[str, np.ndarray] = {}
        if shuffle_labels:
            if task == "scale":
                for sid in pop_subjects:
                    scale_perm[sid] = rng.permutation(8)
            else:
                pairs = []
                for sid in pop_subjects:
                    meta = next(m for m in features.take_meta if m.subject_id == sid)
                    pairs.append((meta.gender, meta.choral))
                order = rng.permutation(len(pop_subjects))
                for sid, j in zip(pop_subjects, order):
                    subj_label_override[sid] = pairs[j]

        def meta_labels(meta: TakeMeta) -> tuple[str, str, int]:
            gender, choral = subj_label_override.get(
                meta.subject_id, (meta.gender, meta.choral)
            )
            scale = meta.scale
            if meta.subject_id in scale_perm:
                scale = int(scale_perm[meta.subject_id][meta.scale])
            return gender, choral, scale

        # Group subjects by (possibly shuffled) labels, then draw the test set.
        groups: dict[str, list[str]] = {g: [] for g, _ in fold.n_test}
        seen: set[str] = set()
        for ti, meta in enumerate(features.take_meta):
            if not _population_mask(meta, fold.population) or meta.subject_id in seen:
                continue
            seen.add(meta.subject_id)
            gender, choral, _ = meta_labels(meta)
            for g, _c in fold.n_test:
                if g == "*" or gender == g or choral == g:
                    groups[g].append(meta.subject_id)
        test_subjects: set[str] = set()
        for g, count in fold.n_test:
            members = sorted(groups[g])
            picked = rng.choice(len(members), size=count, replace=False)
            test_subjects.update(members[i] for i in picked)

        label_of_take = np.full(n_takes, -1, dtype=np.int64)
        train_rows_parts, train_label_parts, test_takes = [], [], []
        for ti, meta in enumerate(features.take_meta):
            if not _population_mask(meta, fold.population):
                continue
            gender, choral, scale = meta_labels(meta)
            shuffled = TakeMeta(meta.subject_id, gender, choral, scale)
            label = take_label(shuffled, task)
            label_of_take[ti] = label
            rows = features.take_rows[ti]
            if meta.subject_id in test_subjects:
                test_takes.append(ti)
            else:
                train_rows_parts.append(rows)
                train_label_parts.append(np.full(len(rows), label))
        yield _Split(
            train_rows=np.concatenate(train_rows_parts),
            train_labels=np.concatenate(train_label_parts),
            test_takes=test_takes,
            test_labels=label_of_take[test_takes],
            label_of_take=label_of_take,
            rng=rng,
            selection_seed=selection_seed,
        )


def take_label(meta: TakeMeta, task: str) -> int:
    if task == "scale":
        return meta.scale
    if task == "gender":
        return GENDER_LABELS.index(meta.gender)
    if task == "choral":
        return CHORAL_LABELS.index(meta.choral)
    if task == "joint":
        return GENDER_LABELS.index(meta.gender) * 2 + CHORAL_LABELS.index(meta.choral)
    raise ConfigError(f"unknown task {task!r}")


def _fit_on_rows(features: CorpusFeatures, rows: np.ndarray, labels: np.ndarray,
                 freq_set, task: str, epsilon: float | None) -> gda.ClassModel:
    X = features.matrix[np.ix_(rows, freq_set.indices)]
    return gda.fit(X, labels, task, task_labels(task), epsilon=epsilon,
                   frequencies=freq_set, pipeline=features.pipeline.with_grid(features.grid))


def _classify_takes(features: CorpusFeatures, model: gda.ClassModel,
                    take_indices, n_segments: int | None = None) -> np.ndarray:
    """Averaged-posterior MAP label per take; optionally only the first
    n_segments of each take's kept segments."""
    preds = np.empty(len(take_indices), dtype=np.int64)
    for j, ti in enumerate(take_indices):
        rows = features.take_rows[ti]
        if n_segments is not None:
            rows = rows[:n_segments]
        X = features.matrix[np.ix_(rows, model.frequencies.indices)]
        posts = gda.posteriors(model, X)
        preds[j] = gda.map_class(gda.average_posteriors(posts))
    return preds


def _select_on_split(features: CorpusFeatures, split: _Split, d: int,
                     cfg: SelectConfig):
    cfg = replace(cfg, seed=split.selection_seed)
    return select_frequencies(
        (features.matrix[split.train_rows], split.train_labels), d, cfg,
        grid=features.grid,
    )


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def cross_validate(
    features: CorpusFeatures | Corpus,
    fold: FoldSpec,
    d: int,
    mode: str = "optimized",
    select_config: SelectConfig | None = None,
    n_random_draws: int = 1,
    shuffle_labels: bool = False,
) -> PerformanceReport:
    """Subject-level cross-validated accuracy for one task and one D."""
    if isinstance(features, Corpus):
        features = extract_corpus_features(features)
    if mode not in ("optimized", "random"):
        raise ConfigError(f"mode must be 'optimized' or 'random', got {mode!r}")
    select_config = select_config or SelectConfig()
    accuracies, freq_sets = [], []
    for split in _iter_splits(features, fold, fold.task, shuffle_labels):
        if mode == "optimized":
            result = _select_on_split(features, split, d, select_config)
            sets = [(result.frequencies, result.epsilon)]
        else:
            draw_seeds = np.random.SeedSequence(
                entropy=split.selection_seed).generate_state(n_random_draws, dtype=np.uint32)
            sets = [(random_frequencies(d, int(s), features.grid), select_config.epsilon)
                    for s in draw_seeds]
        fold_acc = []
        for freq_set, eps in sets:
            model = _fit_on_rows(features, split.train_rows, split.train_labels,
                                 freq_set, fold.task, eps)
            preds = _classify_takes(features, model, split.test_takes)
            fold_acc.append(float(np.mean(preds == split.test_labels)))
            freq_sets.append([float(f) for f in freq_set.frequencies_hz])
        accuracies.append(float(np.mean(fold_acc)))
    return PerformanceReport(
        task=fold.task, d=d, mode=mode,
        mean_accuracy=float(np.mean(accuracies)),
        std_accuracy=float(np.std(accuracies)),
        fold_accuracies=accuracies,
        frequency_sets=freq_sets,
        config={"fold": fold.__dict__ | {"n_test": list(fold.n_test)},
                "select": select_config.__dict__,
                "n_random_draws": n_random_draws,
                "shuffle_labels": shuffle_labels},
    )


ORDERINGS = ("independent", "sn_then_mf", "mf_then_sn", "simultaneous")


def infer_joint(
    features: CorpusFeatures | Corpus,
    fold: FoldSpec,
    d: int,
    ordering: str,
    select_config: SelectConfig | None = None,
) -> PerformanceReport:
    """Four-way gender-by-choral inference under one of the four factorizations."""
    if isinstance(features, Corpus):
        features = extract_corpus_features(features)
    if ordering not in ORDERINGS:
        raise ConfigError(f"ordering must be one of {ORDERINGS}")
    select_config = select_config or SelectConfig()
    accuracies, freq_sets, skipped = [], [], 0
    for split in _iter_splits(features, fold, "joint", False):
        try:
            acc, sets = _joint_fold(features, split, d, ordering, select_config)
        except InsufficientDataError:
            skipped += 1
            continue
        accuracies.append(acc)
        freq_sets.extend(sets)
    if not accuracies:
        raise InsufficientDataError("all folds skipped")
    return PerformanceReport(
        task="joint", d=d, mode=ordering,
        mean_accuracy=float(np.mean(accuracies)),
        std_accuracy=float(np.std(accuracies)),
        fold_accuracies=accuracies,
        frequency_sets=freq_sets,
        skipped_folds=skipped,
        config={"fold": fold.__dict__ | {"n_test": list(fold.n_test)},
                "select": select_config.__dict__},
    )


def _joint_fold(features, split, d, ordering, cfg):
    meta = features.take_meta
    split_train_set = set(split.train_rows.tolist())
    train_take_idx = [ti for ti in range(len(meta))
                      if len(features.take_rows[ti])
                      and features.take_rows[ti][0] in split_train_set]

    def rows_and_labels(take_indices, task):
        rows = np.concatenate([features.take_rows[ti] for ti in take_indices])
        labels = np.concatenate([
            np.full(len(features.take_rows[ti]), take_label(meta[ti], task))
            for ti in take_indices
        ])
        return rows, labels

    def make_model(take_indices, task):
        rows, labels = rows_and_labels(take_indices, task)
        sub = replace(cfg, seed=split.selection_seed)
        present = np.unique(labels)
        if len(present) < 2:
            raise InsufficientDataError("conditional training subset lost a class")
        result = select_frequencies((features.matrix[rows], labels), d, sub,
                                    grid=features.grid)
        model = _fit_on_rows(features, rows, labels, result.frequencies,
                             task, result.epsilon)
        return model, result.frequencies

    sets = []
    if ordering == "simultaneous":
        model, fs = make_model(train_take_idx, "joint")
        sets.append([float(f) for f in fs.frequencies_hz])
        preds = _classify_takes(features, model, split.test_takes)
    elif ordering == "independent":
        gmodel, gfs = make_model(train_take_idx, "gender")
        cmodel, cfs = make_model(train_take_idx, "choral")
        sets += [[float(f) for f in gfs.frequencies_hz],
                 [float(f) for f in cfs.frequencies_hz]]
        gpred = _classify_takes(features, gmodel, split.test_takes)
        cpred = _classify_takes(features, cmodel, split.test_takes)
        preds = gpred * 2 + cpred
    else:
        first_task, second_task = (("choral", "gender") if ordering == "sn_then_mf"
                                   else ("gender", "choral"))
        first_model, ffs = make_model(train_take_idx, first_task)
        sets.append([float(f) for f in ffs.frequencies_hz])
        second_models = {}
        n_first = len(task_labels(first_task))
        for v in range(n_first):
            subset = [ti for ti in train_take_idx if take_label(meta[ti], first_task) == v]
            model, sfs = make_model(subset, second_task)
            second_models[v] = model
            sets.append([float(f) for f in sfs.frequencies_hz])
        first_pred = _classify_takes(features, first_model, split.test_takes)
        second_pred = np.empty_like(first_pred)
        for j, ti in enumerate(split.test_takes):
            second_pred[j] = _classify_takes(features, second_models[int(first_pred[j])],
                                             [ti])[0]
        if first_task == "choral":
            preds = second_pred * 2 + first_pred
        else:
            preds = first_pred * 2 + second_pred
    acc = float(np.mean(preds == split.test_labels))
    return acc, sets


def duration_sweep(
    features: CorpusFeatures | Corpus,
    fold: FoldSpec,
    d: int,
    durations,
    mode: str = "optimized",
    select_config: SelectConfig | None = None,
) -> list[PerformanceReport]:
    """Accuracy as a function of total analyzed duration T.

    Classification uses only the first ceil(T / delta) of each take's kept
    segments; selection and fitting happen once per fold at full length.
    """
    if isinstance(features, Corpus):
        features = extract_corpus_features(features)
    select_config = select_config or SelectConfig()
    delta = features.pipeline.delta
    durations = list(durations)
    for t in durations:
        if t < delta - 1e-12:
            raise ConfigError(f"duration {t} s is shorter than one segment ({delta} s)")
    per_duration: list[list[float]] = [[] for _ in durations]
    freq_sets = []
    for split in _iter_splits(features, fold, fold.task, False):
        if mode == "optimized":
            result = _select_on_split(features, split, d, select_config)
            freq_set, eps = result.frequencies, result.epsilon
        else:
            freq_set = random_frequencies(d, split.selection_seed, features.grid)
            eps = select_config.epsilon
        model = _fit_on_rows(features, split.train_rows, split.train_labels,
                             freq_set, fold.task, eps)
        freq_sets.append([float(f) for f in freq_set.frequencies_hz])
        for k, t in enumerate(durations):
            n_seg = max(1, math.ceil(t / delta - 1e-12))
            preds = _classify_takes(features, model, split.test_takes, n_segments=n_seg)
            per_duration[k].append(float(np.mean(preds == split.test_labels)))
    return [
        PerformanceReport(
            task=fold.task, d=d, mode=mode,
            mean_accuracy=float(np.mean(accs)),
            std_accuracy=float(np.std(accs)),
            fold_accuracies=accs,
            frequency_sets=freq_sets,
            duration_s=float(t),
            config={"fold": fold.__dict__ | {"n_test": list(fold.n_test)}},
        )
        for t, accs in zip(durations, per_duration)
    ]


@dataclass(frozen=True)
class CorrelationResult:
    pearson: float
    spearman: float
    n: int


def correlate_scores(posteriors: dict, scores: dict) -> CorrelationResult:
    """Correlation between the model's P(singer) and external expert scores."""
    if set(posteriors) != set(scores):
        missing = set(posteriors) ^ set(scores)
        raise JoinError(f"subject ids do not match; mismatched: {sorted(missing)[:5]}")
    if len(posteriors) < 3:
        raise InsufficientDataError("need at least 3 subjects to correlate")
    ids = sorted(posteriors)
    a = np.array([posteriors[i] for i in ids], dtype=np.float64)
    b = np.array([scores[i] for i in ids], dtype=np.float64)
    pearson = float(sps.pearsonr(a, b).statistic)
    spearman = float(sps.spearmanr(a, b).statistic)
    return CorrelationResult(pearson=pearson, spearman=spearman, n=len(ids))


def subject_singer_posteriors(features: CorpusFeatures, model: gda.ClassModel) -> dict:
    """Average P(singer) per subject over all of the subject's segments."""
    s_index = CHORAL_LABELS.index("S")
    by_subject: dict[str, list[np.ndarray]] = {}
    for ti, meta in enumerate(features.take_meta):
        rows = features.take_rows[ti]
        X = features.matrix[np.ix_(rows, model.frequencies.indices)]
        posts = gda.posteriors(model, X)
        by_subject.setdefault(meta.subject_id, []).append(posts)
    return {
        sid: float(gda.average_posteriors(np.concatenate(blocks))[s_index])
        for sid, blocks in by_subject.items()
    }


def read_scores_file(text: str) -> dict:
    """Parse `subject_id,score` lines (blank lines and # comments ignored)."""
    scores: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#") or line.lower().startswith("subject_id"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ConfigError(f"bad score line {lineno}: {line!r}")
        scores[parts[0].strip()] = float(parts[1])
    return scores


def fast_select_config(seed: int = 0, mc_samples: int = 2000) -> SelectConfig:
    """Throughput profile for fold sweeps: coarse scan with local refinement,
    one restart, three passes.  Full-fidelity selection is the default config."""
    return SelectConfig(mc_samples=mc_samples, seed=seed, tol=1e-3,
                        max_passes=3, restarts=1, scan_stride=4)
