"""Command-line entry point.

Subcommands: synth (generate a corpus), train (select frequencies and fit
a model), classify (label WAV files with a trained model), evaluate
(cross-validation sweeps), serve (run the live classification service).

Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 data or
model error.  All randomness flows from --seed; outputs embed their
effective configuration, so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, evaluation, gda, riskopt, synth
from .corpus import load_corpus, save_corpus
from .errors import (
    ConfigError,
    FormatError,
    InsufficientDataError,
    RangeError,
    SilenceError,
    UnsupportedError,
    VoiceClassError,
)
from .spectra import PipelineConfig, decode_audio, signal_to_log_spectra
from .tasks import TASKS, task_labels

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DATA = 3

_IO_ERRORS = (FormatError, UnsupportedError, OSError)
_DATA_ERRORS = (InsufficientDataError, SilenceError, RangeError, ConfigError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _select_config_from_args(args, seed: int) -> riskopt.SelectConfig:
    cfg = evaluation.fast_select_config(seed=seed) if args.fast else riskopt.SelectConfig(seed=seed)
    overrides = {
        "mc_samples": args.mc_samples or None,
        "epsilon": args.epsilon,
        "risk_mode": args.risk_mode,
        "tol": args.tol,
        "max_passes": args.max_passes,
        "restarts": args.restarts,
        "scan_stride": args.scan_stride,
    }
    return replace(cfg, **{k: v for k, v in overrides.items()
                           if v is not None or k == "epsilon"})


def _parse_d_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        values = list(range(int(lo), int(hi) + 1))
    else:
        values = [int(x) for x in text.split(",")]
    if not values or any(v < 1 for v in values):
        raise ValueError(f"bad D specification {text!r}")
    return values


def cmd_synth(args) -> int:
    spec = synth.CorpusSpec(
        n_male_singers=args.male_singers,
        n_female_singers=args.female_singers,
        n_male_nonsingers=args.male_nonsingers,
        n_female_nonsingers=args.female_nonsingers,
    )
    corpus = synth.generate_corpus(spec, seed=args.seed)
    out = Path(args.out)
    try:
        manifest = save_corpus(corpus, out)
    except OSError as exc:
        print(f"error: cannot write corpus: {exc}", file=sys.stderr)
        return EXIT_IO
    n_subjects = len(corpus.subject_ids)
    print(f"wrote {len(corpus.takes)} takes for {n_subjects} subjects to {out}")
    print(f"manifest: {manifest}")
    return EXIT_OK


def _load_features(manifest: str, cfg: PipelineConfig) -> evaluation.CorpusFeatures:
    corpus = load_corpus(manifest)
    return evaluation.extract_corpus_features(corpus, cfg)


def cmd_train(args) -> int:
    cfg = PipelineConfig()
    feats = _load_features(args.manifest, cfg)
    rows, labels = [], []
    for i, meta in enumerate(feats.take_meta):
        if args.task == "scale" and meta.choral != "S":
            continue
        label = evaluation.take_label(meta, args.task)
        rows.append(feats.take_rows[i])
        labels.append(np.full(len(feats.take_rows[i]), label))
    rows = np.concatenate(rows)
    labels = np.concatenate(labels)
    sel_cfg = _select_config_from_args(args, args.seed)
    result = riskopt.select_frequencies((feats.matrix[rows], labels), args.d,
                                        sel_cfg, grid=feats.grid)
    model = gda.fit(
        feats.matrix[np.ix_(rows, result.frequencies.indices)], labels,
        args.task, task_labels(args.task), epsilon=result.epsilon,
        frequencies=result.frequencies, pipeline=cfg,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    gda.save_model(model, out)
    csv_path = out.with_suffix(".frequencies.csv")
    csv_path.write_text(riskopt.selection_to_csv(result))
    print(f"model: {out} (task={args.task}, D={args.d}, "
          f"risk={result.risk.risk:.4f}, fingerprint={gda.model_fingerprint(model)})")
    print(f"frequencies: {csv_path}")
    for hz in result.frequencies.frequencies_hz:
        print(f"  {hz:.1f} Hz")
    return EXIT_OK


def cmd_classify(args) -> int:
    model = gda.load_model(args.model)
    cfg = model.pipeline
    status = EXIT_OK
    for path in args.wav:
        try:
            signal = decode_audio(Path(path).read_bytes())
            specs = signal_to_log_spectra(signal, cfg)
            feats = np.stack([
                gda.extract_features(s, model.frequencies, cfg.feature_mode)
                for s in specs
            ])
            avg = gda.average_posteriors(gda.posteriors(model, feats))
            label = model.class_names[gda.map_class(avg)]
            probs = ",".join(
                f"{name}={p:.6f}" for name, p in zip(model.class_names, avg)
            )
            print(f"{path}\t{probs}\t{label}")
        except SilenceError:
            print(f"{path}\tSILENCE\t-")
            status = EXIT_DATA
        except RangeError as exc:
            print(f"error: {path}: model/audio mismatch: {exc}", file=sys.stderr)
            return EXIT_DATA
    return status


def cmd_evaluate(args) -> int:
    cfg = PipelineConfig()
    feats = _load_features(args.manifest, cfg)
    d_values = _parse_d_range(args.d)
    modes = ["optimized", "random"] if args.mode == "both" else [args.mode]
    sel_cfg = _select_config_from_args(args, args.seed)
    lines = ["task,d,mode,mean,std,n_folds,ordering,duration_s"]

    def fold_for(task, population=None):
        fold = evaluation.default_fold_spec(
            task, n_repeats=args.folds, seed=args.seed, population=population)
        groups = evaluation._group_subjects(feats, fold)
        if all(count <= len(groups[g]) // 2 for g, count in fold.n_test):
            return fold
        # corpus smaller than the reference study: scale the fold down
        return evaluation.scaled_fold_spec(
            task, feats, n_repeats=args.folds, seed=args.seed,
            population=population)

    if args.ordering:
        for d in d_values:
            rep = evaluation.infer_joint(feats, fold_for("joint"), d,
                                         args.ordering, sel_cfg)
            lines.append(f"joint,{d},optimized,{rep.mean_accuracy!r},"
                         f"{rep.std_accuracy!r},{len(rep.fold_accuracies)},"
                         f"{args.ordering},")
    elif args.durations:
        durations = [float(x) for x in args.durations.split(",")]
        for d in d_values:
            reps = evaluation.duration_sweep(feats, fold_for(args.task), d,
                                             durations, "optimized", sel_cfg)
            for rep in reps:
                lines.append(f"{args.task},{d},optimized,{rep.mean_accuracy!r},"
                             f"{rep.std_accuracy!r},{len(rep.fold_accuracies)},"
                             f",{rep.duration_s!r}")
    else:
        for d in d_values:
            for mode in modes:
                rep = evaluation.cross_validate(
                    feats, fold_for(args.task), d, mode, sel_cfg,
                    n_random_draws=args.random_draws)
                lines.append(f"{args.task},{d},{mode},{rep.mean_accuracy!r},"
                             f"{rep.std_accuracy!r},{len(rep.fold_accuracies)},,")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out} ({len(lines) - 1} rows)")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    model_paths = {}
    for spec_item in args.model:
        task, _, path = spec_item.partition("=")
        if not path:
            print("error: --model expects task=path", file=sys.stderr)
            return EXIT_USAGE
        model_paths[task] = path
    app = create_app(model_paths)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> _Parser:
    p = _Parser(prog="voiceclass",
                description="Voice-quality classification from short sound spectra")
    p.add_argument("--version", action="version", version=f"voiceclass {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", help="generate a synthetic voice corpus")
    ps.add_argument("--out", required=True, help="output directory")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--male-singers", type=int, default=11)
    ps.add_argument("--female-singers", type=int, default=12)
    ps.add_argument("--male-nonsingers", type=int, default=14)
    ps.add_argument("--female-nonsingers", type=int, default=13)
    ps.set_defaults(func=cmd_synth)

    def add_select_args(parser):
        parser.add_argument("--mc-samples", type=int, default=0,
                            help="Monte-Carlo draws per risk estimate")
        parser.add_argument("--epsilon", type=float, default=None,
                            help="covariance ridge (default: derived from data)")
        parser.add_argument("--risk-mode", choices=["mc", "empirical"], default=None)
        parser.add_argument("--tol", type=float, default=None,
                            help="risk improvement needed to keep iterating")
        parser.add_argument("--max-passes", type=int, default=None)
        parser.add_argument("--restarts", type=int, default=None)
        parser.add_argument("--scan-stride", type=int, default=None,
                            help=">1 scans coarsely, then refines locally")
        parser.add_argument("--fast", action="store_true",
                            help="coarse-scan selection profile")

    pt = sub.add_parser("train", help="select frequencies and fit a model")
    pt.add_argument("--manifest", required=True)
    pt.add_argument("--task", choices=sorted(TASKS), required=True)
    pt.add_argument("--d", type=int, required=True, help="number of probe frequencies")
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--out", required=True, help="model file path")
    add_select_args(pt)
    pt.set_defaults(func=cmd_train)

    pc = sub.add_parser("classify", help="classify WAV files with a trained model")
    pc.add_argument("--model", required=True)
    pc.add_argument("wav", nargs="+", help="WAV file(s) to classify")
    pc.set_defaults(func=cmd_classify)

    pe = sub.add_parser("evaluate", help="cross-validated performance sweeps")
    pe.add_argument("--manifest", required=True)
    pe.add_argument("--task", choices=sorted(TASKS), default="gender")
    pe.add_argument("--d", default="4", help="D value, list (2,4) or range (1..8)")
    pe.add_argument("--mode", choices=["optimized", "random", "both"], default="optimized")
    pe.add_argument("--ordering", choices=list(evaluation.ORDERINGS), default=None,
                    help="evaluate a joint-inference ordering instead")
    pe.add_argument("--durations", default=None,
                    help="comma list of analysis durations in seconds")
    pe.add_argument("--folds", type=int, default=20)
    pe.add_argument("--random-draws", type=int, default=20,
                    help="random frequency sets per fold in random mode")
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--out", default=None, help="CSV output path")
    add_select_args(pe)
    pe.set_defaults(func=cmd_evaluate)

    pv = sub.add_parser("serve", help="run the live classification service")
    pv.add_argument("--model", action="append", required=True,
                    help="task=path; repeatable")
    pv.add_argument("--host", default="127.0.0.1")
    pv.add_argument("--port", type=int, default=8000)
    pv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if getattr(args, "d", None) is not None and isinstance(args.d, int) and args.d < 1:
            print("error: --d must be at least 1", file=sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VoiceClassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
