"""Command-line entry point.

Subcommands cover the full workflow: validate and analyze rating tables,
compute representative-value targets, extract spectrogram features from
WAV files, generate synthetic data, train and apply the frame-pooling
regressor, and run multi-trial evaluations.

Conventions shared by every subcommand: the resolved configuration is
printed as one `config:` line before any work, outputs land in --out-dir
and are written atomically only after all computation succeeded (no
partial outputs), each written file is announced with a `wrote:` line,
and failures exit nonzero with a single `error_code: message` line on
stderr. SQA_LAB_THREADS caps how many trials run concurrently.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .audio import StftConfig, read_wav, stft_magnitude
from .errors import SqaLabError
from .estimator import render_history_tsv
from .experiment import (
    TrainConfig,
    read_fixed_split,
    render_split_tsv,
    render_trials_report_json,
    render_trials_report_tsv,
    run_trials,
    split_ids,
    thread_budget,
    train_model,
)
from .features import read_features_csv, render_features_csv
from .ioutil import atomic_write_text
from .metrics import (
    evaluate,
    read_predictions_csv,
    render_predictions_csv,
    render_report_tsv,
)
from .model import forward, load_model, render_model_text
from .ratings import (
    RepValSpec,
    dataset_stats,
    extreme_usage_proportions,
    histogram,
    ingest_ratings,
    read_targets_csv,
    render_histogram_tsv,
    render_proportions_tsv,
    render_ratings_csv,
    render_repvals_csv,
    render_skew_counts_tsv,
    render_stats_tsv,
    render_summary_tsv,
    repval_batch,
    skew_sign_counts,
)
from .simulate import SimConfig, render_truth_tsv, simulate

# Histogram layouts for the analyze outputs. Bounds are half-open and
# chosen so every reachable value of 1..5 integer scores falls inside.
MEAN_HIST = (0.25, 1.0, 5.25)
STD_HIST = (0.25, 0.0, 3.25)
SKEW_HIST = (0.5, -3.0, 3.5)


class _Parser(argparse.ArgumentParser):
    """Argparse variant whose errors are one-line and machine-parsable."""

    def error(self, message):
        self.exit(2, f"usage_error: {message}\n")


def _announce(args: argparse.Namespace) -> None:
    skip = {"handler"}
    parts = []
    for key in sorted(vars(args)):
        if key in skip:
            continue
        value = getattr(args, key)
        if value is None:
            continue
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        parts.append(f"{key}={value}")
    print("config: " + " ".join(parts))


def _write_all(outputs: dict[Path, str]) -> None:
    for path, text in outputs.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        atomic_write_text(path, text)
        print(f"wrote: {path}")


def _out_path(args, name: str) -> Path:
    return Path(args.out_dir) / name


def _repval_spec(args) -> RepValSpec:
    return RepValSpec(
        kind=args.kind,
        n=args.n,
        n_low_trim=args.trim_low,
        n_high_trim=args.trim_high,
    )


def _parse_fractions(text: str) -> tuple[float, ...]:
    try:
        fracs = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise SqaLabError(f"cannot parse split fractions {text!r}",
                          code="split_format") from None
    return fracs


def _resolve_split(args, dataset) -> "Split":
    if args.fixed_split:
        return read_fixed_split(args.fixed_split)
    return split_ids(sorted(dataset.samples), _parse_fractions(args.split), args.seed)


def _train_config(args, spec: RepValSpec, trials: int = 1) -> TrainConfig:
    return TrainConfig(
        target_spec=spec,
        alpha=args.alpha,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        patience=args.patience,
        max_epochs=args.max_epochs,
        hidden_width=args.hidden_width,
        dropout_rate=args.dropout,
        trials=trials,
        seed=args.seed,
    )


def cmd_validate(args) -> None:
    dataset = ingest_ratings(args.ratings)
    n_ratings = sum(s.n_all for s in dataset.samples.values())
    print(
        f"ok: ratings samples={dataset.n_samples} "
        f"listeners={len(dataset.listeners)} ratings={n_ratings}"
    )
    if args.features:
        feats = read_features_csv(args.features)
        dim = next(iter(feats.values())).shape[1]
        frames = sum(m.shape[0] for m in feats.values())
        print(f"ok: features samples={len(feats)} dim={dim} frames={frames}")


def cmd_analyze(args) -> None:
    dataset = ingest_ratings(args.ratings)
    stats = dataset_stats(dataset, adjusted=args.adjusted_skewness)
    counts = skew_sign_counts(dataset, adjusted=args.adjusted_skewness)
    means = [s.mean for s in stats.values()]
    stds = [s.sample_std for s in stats.values()]
    skews = [s.skewness for s in stats.values() if s.skewness is not None]
    outputs = {
        _out_path(args, "stats.tsv"): render_stats_tsv(stats),
        _out_path(args, "skew_counts.tsv"): render_skew_counts_tsv(counts),
        _out_path(args, "summary.tsv"): render_summary_tsv(dataset.summary()),
        _out_path(args, "hist_mean.tsv"): render_histogram_tsv(
            histogram(means, *MEAN_HIST)
        ),
        _out_path(args, "hist_std.tsv"): render_histogram_tsv(
            histogram(stds, *STD_HIST)
        ),
        _out_path(args, "hist_skew.tsv"): render_histogram_tsv(
            histogram(skews, *SKEW_HIST)
        ),
        _out_path(args, "usage_low.tsv"): render_proportions_tsv(
            extreme_usage_proportions(dataset, "low")
        ),
        _out_path(args, "usage_high.tsv"): render_proportions_tsv(
            extreme_usage_proportions(dataset, "high")
        ),
    }
    _write_all(outputs)
    print(
        f"skew_signs: positive={counts.positive} negative={counts.negative} "
        f"zero={counts.zero} undefined={counts.undefined}"
    )


def cmd_repval(args) -> None:
    spec = _repval_spec(args)
    dataset = ingest_ratings(args.ratings)
    values = repval_batch(dataset, spec)
    _write_all({_out_path(args, args.out): render_repvals_csv(values)})


def cmd_eval(args) -> None:
    targets = read_targets_csv(args.targets)
    predictions = read_predictions_csv(args.predictions)
    values = evaluate(targets, predictions)
    if args.format == "json":
        text = json.dumps({k: round(v, 6) for k, v in values.items()},
                          sort_keys=True, indent=2) + "\n"
        name = args.out or "report.json"
    else:
        text = render_report_tsv(values)
        name = args.out or "report.tsv"
    _write_all({_out_path(args, name): text})
    print("metrics: " + " ".join(f"{k}={values[k]:.6f}" for k in ("mse", "lcc", "srcc")))


def cmd_features(args) -> None:
    cfg = StftConfig(window_length=args.window, hop_length=args.hop)
    features = {}
    for wav in args.wav:
        sid = Path(wav).stem
        if sid in features:
            raise SqaLabError(f"duplicate sample id {sid!r} from {wav}",
                              code="features_format")
        features[sid] = stft_magnitude(read_wav(wav), cfg)
    _write_all({_out_path(args, args.out): render_features_csv(features)})


def cmd_simulate(args) -> None:
    cfg = SimConfig(
        n_samples=args.n_samples,
        listeners_per_sample=args.listeners,
        segments_min=args.segments_min,
        segments_max=args.segments_max,
        overlook_prob=args.overlook_prob,
        score_noise_sigma=args.score_noise,
        frames_per_segment=args.frames_per_segment,
        feature_dim=args.feature_dim,
        feature_noise_sigma=args.feature_noise,
        seed=args.seed,
    )
    result = simulate(cfg)
    outputs = {
        _out_path(args, "ratings.csv"): render_ratings_csv(result.dataset),
        _out_path(args, "features.csv"): render_features_csv(result.features),
        _out_path(args, "truth.tsv"): render_truth_tsv(result.truths),
    }
    _write_all(outputs)


def cmd_train(args) -> None:
    spec = _repval_spec(args)
    dataset = ingest_ratings(args.ratings)
    targets = repval_batch(dataset, spec)
    features = read_features_csv(args.features)
    split = _resolve_split(args, dataset)
    config = _train_config(args, spec)
    reg = train_model(features, targets, split, config)
    outputs = {
        _out_path(args, "model.txt"): render_model_text(reg.params_),
        _out_path(args, "history.tsv"): render_history_tsv(reg.history_),
        _out_path(args, "split.tsv"): render_split_tsv(split),
    }
    _write_all(outputs)
    print(
        f"trained: epochs={reg.n_iter_} best_epoch={reg.best_epoch_} "
        f"best_val_loss={reg.best_val_loss_:.6f}"
    )


def cmd_predict(args) -> None:
    params = load_model(args.model)
    features = read_features_csv(args.features)
    predictions = {sid: forward(params, m)[1] for sid, m in sorted(features.items())}
    _write_all({_out_path(args, args.out): render_predictions_csv(predictions)})


def cmd_trials(args) -> None:
    spec = _repval_spec(args)
    dataset = ingest_ratings(args.ratings)
    targets = repval_batch(dataset, spec)
    features = read_features_csv(args.features)
    split = _resolve_split(args, dataset)
    config = _train_config(args, spec, trials=args.trials)
    report = run_trials(features, targets, split, config, n_jobs=thread_budget(1))
    if args.format == "json":
        outputs = {_out_path(args, args.out or "report.json"):
                   render_trials_report_json(report)}
    else:
        outputs = {_out_path(args, args.out or "report.tsv"):
                   render_trials_report_tsv(report)}
    _write_all(outputs)
    if report.summaries:
        line = " ".join(f"{name}={report.summaries[name].format()}"
                        for name in ("mse", "lcc", "srcc"))
    else:
        line = " ".join(f"{name}={report.per_trial[0][name]:.6f}"
                        for name in ("mse", "lcc", "srcc"))
    print(f"report: trials={report.trials} {line}")


def _add_repval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", required=True,
                   choices=("mos", "n_low", "n_high", "central"),
                   help="representative value to compute from each sample's scores")
    p.add_argument("--n", type=int, default=None,
                   help="N for n_low/n_high (mean of the N lowest/highest scores)")
    p.add_argument("--trim-low", type=int, default=None,
                   help="scores trimmed from the low end (central only)")
    p.add_argument("--trim-high", type=int, default=None,
                   help="scores trimmed from the high end (central only)")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--split", default="0.7,0.1,0.2",
                   help="train,validation,test fractions (must sum to 1)")
    p.add_argument("--fixed-split", default=None,
                   help="TSV 'sample_id\\tpartition' overriding --split")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="weight of the per-frame loss term")
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--patience", type=int, default=5,
                   help="non-improving validation epochs tolerated before stopping")
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--hidden-width", type=int, default=0,
                   help="hidden layer width; 0 trains the affine model")
    p.add_argument("--dropout", type=float, default=0.0,
                   help="hidden-unit dropout rate (training only)")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="master seed for anything randomized")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--format", choices=("tsv", "json"), default="tsv",
                        help="report format where applicable")

    parser = _Parser(prog="sqalab",
                     description="Speech-quality rating analysis and prediction lab")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")

    p = sub.add_parser("validate", parents=[common],
                       help="parse inputs and report their shape")
    p.add_argument("--ratings", required=True)
    p.add_argument("--features", default=None)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("analyze", parents=[common],
                       help="per-sample stats, skew-sign counts, histograms")
    p.add_argument("--ratings", required=True)
    p.add_argument("--adjusted-skewness", action="store_true",
                   help="apply the small-sample skewness correction")
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("repval", parents=[common],
                       help="write per-sample representative values (targets CSV)")
    p.add_argument("--ratings", required=True)
    _add_repval_flags(p)
    p.add_argument("--out", default="targets.csv")
    p.set_defaults(handler=cmd_repval)

    p = sub.add_parser("eval", parents=[common],
                       help="MSE/LCC/SRCC of predictions against targets")
    p.add_argument("--targets", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("features", parents=[common],
                       help="magnitude spectrogram features from WAV files")
    p.add_argument("--wav", required=True, nargs="+",
                   help="mono 16-bit PCM WAV files; sample id = file stem")
    p.add_argument("--window", type=int, default=512)
    p.add_argument("--hop", type=int, default=256)
    p.add_argument("--out", default="features.csv")
    p.set_defaults(handler=cmd_features)

    p = sub.add_parser("simulate", parents=[common],
                       help="synthetic ratings + features from the worst-segment model")
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--listeners", type=int, default=8)
    p.add_argument("--segments-min", type=int, default=3)
    p.add_argument("--segments-max", type=int, default=10)
    p.add_argument("--overlook-prob", type=float, default=0.3)
    p.add_argument("--score-noise", type=float, default=0.5)
    p.add_argument("--frames-per-segment", type=int, default=8)
    p.add_argument("--feature-dim", type=int, default=8)
    p.add_argument("--feature-noise", type=float, default=0.25)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("train", parents=[common],
                       help="train one model against a representative-value target")
    p.add_argument("--ratings", required=True)
    p.add_argument("--features", required=True)
    _add_repval_flags(p)
    _add_train_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", parents=[common],
                       help="apply a saved model to a features file")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", default="predictions.csv")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("trials", parents=[common],
                       help="train/evaluate several times and aggregate the metrics")
    p.add_argument("--ratings", required=True)
    p.add_argument("--features", required=True)
    _add_repval_flags(p)
    _add_train_flags(p)
    p.add_argument("--trials", type=int, default=8)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_trials)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "handler"):
        parser.error("a subcommand is required")
    _announce(args)
    try:
        args.handler(args)
    except SqaLabError as err:
        print(f"{err.code}: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"io_error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
