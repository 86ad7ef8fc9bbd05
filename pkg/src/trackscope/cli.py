"""Command-line entry point: ``trackscope <subcommand> ...``.

Every subcommand that takes ``--out`` writes its files there together with a
``manifest.json`` holding the parameters and counts of the run.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .clustering import ClusterParams, cluster_tracks
from .core import (
    Dataset,
    filter_days,
    load_annotations,
    load_dataset,
    load_exclusions,
    parse_date,
    write_dataset,
)
from .descriptive import accumulate_heatmap, compute_footmap, render_footmap, render_heatmap_log
from .evaluation import confusion, format_report, metrics, read_prediction_csv
from .ioutil import atomic_write_bytes, encode_ppm, write_csv, write_json
from .synthetic import SyntheticSpec, default_spec, generate_synthetic_dataset
from .timeseries import NNConfig, count_series, run_timeseries_pipeline, split_half
from .trajectory import DEFAULT_DELTA, DEFAULT_LAMBDA, run_trajectory_pipeline

log = logging.getLogger("trackscope")


class CLIError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _load(args) -> Dataset:
    dataset, diag = load_dataset(args.data, getattr(args, "labels", None))
    if diag.dropped_short_tracks:
        log.info("dropped %d track(s) with < 2 points", diag.dropped_short_tracks)
    if diag.out_of_bounds_points:
        log.warning("%d point(s) outside the scene bounds", diag.out_of_bounds_points)
    if getattr(args, "exclude", None):
        path = Path(args.exclude)
        dataset = filter_days(dataset, load_exclusions(path.read_text(encoding="utf-8"), str(path)))
    return dataset


def _manifest(args, out: Path, params: dict, counts: dict, outputs: list[Path], seed=None) -> None:
    write_json(
        out / "manifest.json",
        {
            "command": args.command,
            "version": __version__,
            "params": params,
            "seed": seed,
            "counts": counts,
            "outputs": sorted(p.name for p in outputs),
        },
    )


def _cluster_params(args) -> ClusterParams:
    return ClusterParams(
        eps=args.eps,
        min_lines=args.min_lines,
        mdl_partition=not args.no_mdl,
        smoothing_gamma=args.gamma,
    )


def _report(predictions: dict, truth: dict) -> dict | None:
    if not set(predictions) & set(truth):
        return None
    cm = confusion(predictions, truth)
    m = metrics(cm)
    print(format_report(cm, m), end="")
    return {"tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn,
            "precision": m.precision, "recall": m.recall, "f1": m.f1}


# -- subcommands -----------------------------------------------------------


def cmd_synth(args) -> int:
    if args.spec:
        spec = SyntheticSpec.from_json(Path(args.spec).read_text(encoding="utf-8"))
    else:
        spec = default_spec(args.days, _int_list(args.anomaly_days or ""), args.anomaly_kind, args.anomaly_magnitude)
    if args.start_date:
        spec = dataclasses.replace(spec, start_date=parse_date(args.start_date))
    dataset = generate_synthetic_dataset(spec, args.seed)
    out = Path(args.out)
    write_dataset(dataset, out)
    atomic_write_bytes(out / "synthetic_spec.json", (spec.to_json() + "\n").encode())
    labels = dataset.labels()
    _manifest(
        args, out, json.loads(spec.to_json()),
        {"days": len(dataset), "tracks": sum(len(d.tracks) for d in dataset.days),
         "anomalous_days": sum(labels.values())},
        [out / "scene.toml", out / "labels.csv", out / "synthetic_spec.json"],
        seed=args.seed,
    )
    print(f"wrote {len(dataset)} day files to {out}")
    return 0


def cmd_heatmap(args) -> int:
    dataset = _load(args)
    grid = accumulate_heatmap(dataset)
    out = Path(args.out)
    csv_path = Path(args.csv) if args.csv else out / "heatmap.csv"
    ppm_path = Path(args.ppm) if args.ppm else out / "heatmap.ppm"
    write_csv(csv_path, grid.counts.tolist())
    atomic_write_bytes(ppm_path, encode_ppm(render_heatmap_log(grid)))
    _manifest(args, out, {"data": str(args.data), "exclude": args.exclude},
              {"days": len(dataset), "points": grid.total, "out_of_bounds": grid.out_of_bounds},
              [csv_path, ppm_path])
    print(f"heatmap: {grid.total} points over {len(dataset)} days")
    return 0


def cmd_footmap(args) -> int:
    dataset = _load(args)
    fm = compute_footmap(dataset)
    out = Path(args.out)
    csv_path = Path(args.csv) if args.csv else out / "footmap.csv"
    ppm_path = Path(args.ppm) if args.ppm else out / "footmap.ppm"
    dates_path = Path(args.dates_csv) if args.dates_csv else out / "footmap_dates.csv"
    write_csv(csv_path, fm.values.tolist())
    write_csv(dates_path, [[i, d.isoformat()] for i, d in enumerate(fm.day_dates)], header=["column", "date"])
    atomic_write_bytes(ppm_path, encode_ppm(render_footmap(fm)))
    _manifest(args, out, {"data": str(args.data), "exclude": args.exclude, "patch_size": dataset.scene.patch_size},
              {"days": len(dataset), "pools": fm.pool_count, "points": int(fm.values.sum())},
              [csv_path, ppm_path, dates_path])
    print(f"footmap: {fm.pool_count} pools x {len(fm.day_dates)} days")
    return 0


def cmd_cluster(args) -> int:
    dataset = _load(args)
    wanted = {parse_date(d) for d in args.dates.split(",")} if args.dates else None
    days = [d for d in dataset.days if wanted is None or d.date in wanted]
    tracks = [t for d in days for t in d.tracks]
    owners = [(d.date, t.id) for d in days for t in d.tracks]
    clusters = cluster_tracks(tracks, _cluster_params(args), owners)
    out = Path(args.out)
    rep_rows, member_rows = [], []
    for j, c in enumerate(clusters):
        rep_rows += [[j, i, _fmt(p.x), _fmt(p.y)] for i, p in enumerate(c.representative.points)]
        member_rows += [[j, day.isoformat(), tid] for day, tid in c.owners]
    write_csv(out / "clusters.csv", rep_rows, header=["cluster_id", "seq", "x", "y"])
    write_csv(out / "membership.csv", member_rows, header=["cluster_id", "day", "track_id"])
    _manifest(args, out, {"data": str(args.data), "dates": args.dates, **_cluster_params(args).__dict__},
              {"days": len(days), "tracks": len(tracks), "clusters": len(clusters)},
              [out / "clusters.csv", out / "membership.csv"])
    print(f"{len(clusters)} cluster(s) from {len(tracks)} tracks")
    return 0


def cmd_predict_traj(args) -> int:
    dataset = _load(args)
    params = _cluster_params(args)
    run = run_trajectory_pipeline(dataset, params, args.delta, args.lam, args.omega, args.epsilon)
    if not run.predictions:
        log.warning("no test day could be scheduled (need 4 same-weekday dates)")
    labels = dataset.labels()
    out = Path(args.out)
    rows = [[p.date.isoformat(), p.weekday, p.total_tracks, p.anomalous_tracks, _fmt(p.psi), p.predicted,
             _fmt(labels.get(p.date))] for p in run.predictions]
    outputs = [out / "predictions.csv"]
    write_csv(outputs[0], rows, header=["date", "weekday", "n_total", "n_ano", "psi", "predicted", "label"])
    if args.verbose:
        track_rows = [
            [p.date.isoformat(), tid, int(d.anomalous), d.cluster, _fmt(d.likelihood), _fmt(d.distance)]
            for p in run.predictions for tid, d in p.track_decisions
        ]
        outputs.append(out / "tracks.csv")
        write_csv(outputs[-1], track_rows, header=["date", "track_id", "anomalous", "cluster", "likelihood", "distance"])
    scores = _report({p.date: p.predicted for p in run.predictions}, labels)
    _manifest(
        args, out,
        {"data": str(args.data), "exclude": args.exclude, "labels": args.labels, "lambda": args.lam,
         "delta": args.delta, "omega": args.omega, "epsilon": args.epsilon, **params.__dict__},
        {"days": len(dataset), "predicted_days": len(run.predictions),
         "skipped": [[d.isoformat(), why] for d, why in run.skipped], "metrics": scores},
        outputs,
    )
    return 0


def _series(args, dataset: Dataset):
    fps = args.frame_rate if args.frame_rate is not None else dataset.scene.frame_rate
    return [count_series(d, args.theta, fps, dataset.scene.video_duration_minutes) for d in dataset.days]


def cmd_predict_ts(args) -> int:
    dataset = _load(args)
    series = _series(args, dataset)
    config = NNConfig(args.k, args.radius)
    preds = run_timeseries_pipeline(series, config)
    out = Path(args.out)
    write_csv(out / "predictions.csv",
              [[p.date.isoformat(), p.predicted, _fmt(p.label), p.nn_date.isoformat(), _fmt(p.nn_distance)] for p in preds],
              header=["date", "predicted", "label", "nn_date", "nn_distance"])
    n = len(series[0]) if series else 0
    write_csv(out / "count_series.csv", [[s.date.isoformat(), *s.counts] for s in series],
              header=["date", *[f"c_{i}" for i in range(n)]])
    scores = _report({p.date: p.predicted for p in preds}, dataset.labels())
    _manifest(
        args, out,
        {"data": str(args.data), "exclude": args.exclude, "labels": args.labels, "theta": args.theta,
         "frame_rate": args.frame_rate, "k": args.k, "radius": args.radius},
        {"days": len(series), "train": sum(s.label is not None for s in split_half(series)[0]), "test": len(preds), "metrics": scores},
        [out / "predictions.csv", out / "count_series.csv"],
    )
    return 0


def cmd_sweep_ts(args) -> int:
    dataset = _load(args)
    series = _series(args, dataset)
    truth = dataset.labels()
    rows = []
    for r in range(args.max_radius + 1):
        preds = run_timeseries_pipeline(series, NNConfig(args.k, r))
        cm = confusion({p.date: p.predicted for p in preds}, truth)
        m = metrics(cm)
        rows.append([r, cm.tp, cm.fp, cm.fn, cm.tn, _fmt(m.precision), _fmt(m.recall), _fmt(m.f1)])
        print(f"r={r:2d}  precision {m.precision:.2f}  recall {m.recall:.2f}  f1 {m.f1:.2f}")
    out = Path(args.out)
    write_csv(out / "sweep.csv", rows, header=["radius", "tp", "fp", "fn", "tn", "precision", "recall", "f1"])
    _manifest(args, out,
              {"data": str(args.data), "exclude": args.exclude, "labels": args.labels, "theta": args.theta,
               "frame_rate": args.frame_rate, "k": args.k, "max_radius": args.max_radius},
              {"days": len(series)}, [out / "sweep.csv"])
    return 0


def cmd_eval(args) -> int:
    pred_path = Path(args.pred)
    preds, inline_labels = read_prediction_csv(pred_path.read_text(encoding="utf-8"), str(pred_path))
    if args.truth:
        truth_path = Path(args.truth)
        truth = load_annotations(truth_path.read_text(encoding="utf-8"), str(truth_path))
    else:
        truth = inline_labels
    cm = confusion(preds, truth)
    m = metrics(cm)
    print(format_report(cm, m), end="")
    if args.out:
        out = Path(args.out)
        p, r, f = m.rounded(2)
        write_json(out / "eval.json", {"tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn,
                                       "precision": m.precision, "recall": m.recall, "f1": m.f1,
                                       "rounded": {"precision": p, "recall": r, "f1": f}})
        _manifest(args, out, {"pred": args.pred, "truth": args.truth}, {"days": cm.total}, [out / "eval.json"])
    return 0


# -- parser ----------------------------------------------------------------


def _add_data(p: argparse.ArgumentParser, labels: bool = False) -> None:
    p.add_argument("--data", required=True, help="dataset directory (day CSVs + scene.toml)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--exclude", help="file listing dates to leave out, one YYYY-MM-DD per line")
    if labels:
        p.add_argument("--labels", help="annotation CSV (default: <data>/labels.csv if present)")


def _add_cluster(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, default=25.0, help="segment neighbourhood radius in pixels")
    p.add_argument("--min-lines", type=int, default=3)
    p.add_argument("--gamma", type=float, default=None, help="representative sweep spacing (default eps/2)")
    p.add_argument("--no-mdl", action="store_true", help="split tracks at every point instead of MDL")


def _add_series(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=int, default=15, help="seconds per count interval")
    p.add_argument("--frame-rate", type=float, default=None, help="override scene frame_rate")
    p.add_argument("--k", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trackscope", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a seeded synthetic dataset")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--days", type=int, default=28)
    p.add_argument("--out", required=True)
    p.add_argument("--spec", help="JSON synthetic spec (overrides --days/--anomaly-*)")
    p.add_argument("--anomaly-days", help="comma-separated 0-based day indices")
    p.add_argument("--anomaly-kind", default="event", choices=["offlane", "surge", "drop", "event"])
    p.add_argument("--anomaly-magnitude", type=float, default=2.0)
    p.add_argument("--start-date")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("heatmap", parents=[common], help="accumulate and render the heatmap")
    _add_data(p)
    p.add_argument("--csv")
    p.add_argument("--ppm")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("footmap", parents=[common], help="pool points per patch and day")
    _add_data(p)
    p.add_argument("--csv")
    p.add_argument("--ppm")
    p.add_argument("--dates-csv")
    p.set_defaults(func=cmd_footmap)

    p = sub.add_parser("cluster", parents=[common], help="cluster the tracks of selected days")
    _add_data(p)
    p.add_argument("--dates", help="comma-separated dates (default: all days)")
    _add_cluster(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("predict-traj", parents=[common], help="trajectory-statistics day predictor")
    _add_data(p, labels=True)
    _add_cluster(p)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--omega", type=int, default=28)
    p.add_argument("--epsilon", type=int, default=7)
    p.add_argument("--verbose", action="store_true", help="also write per-track diagnostics")
    p.set_defaults(func=cmd_predict_traj)

    p = sub.add_parser("predict-ts", parents=[common], help="count-series 1-NN day predictor")
    _add_data(p, labels=True)
    _add_series(p)
    p.add_argument("--radius", type=int, default=2, help="Sakoe-Chiba band radius")
    p.set_defaults(func=cmd_predict_ts)

    p = sub.add_parser("sweep-ts", parents=[common], help="run predict-ts for every band radius 0..max")
    _add_data(p, labels=True)
    _add_series(p)
    p.add_argument("--max-radius", type=int, default=10)
    p.set_defaults(func=cmd_sweep_ts)

    p = sub.add_parser("eval", parents=[common], help="score a prediction CSV")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", help="annotation CSV (default: label column of --pred)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, CLIError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
