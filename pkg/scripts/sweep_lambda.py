"""Day-decision threshold sweep for the trajectory predictor.

Track decisions do not depend on the day threshold, so every window is
clustered and scored once and the anomalous-track ratio is re-thresholded.

    python scripts/sweep_lambda.py --seed 2012 --days 91
"""
import argparse

import numpy as np

from trackscope.clustering import ClusterParams
from trackscope.evaluation import confusion, metrics
from trackscope.synthetic import benchmark_spec, generate_synthetic_dataset
from trackscope.trajectory import fit_window_model, predict_day, schedule_windows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=2012)
    ap.add_argument("--days", type=int, default=91)
    ap.add_argument("--delta", type=float, default=1000.0)
    args = ap.parse_args()

    dataset = generate_synthetic_dataset(benchmark_spec(args.days), args.seed)
    truth = dataset.labels()
    by_date = dataset.by_date()
    cache: dict = {}
    psi = {}
    for w in schedule_windows(dataset):
        model = fit_window_model([by_date[d] for d in w.training_dates], ClusterParams(), cache)
        if model and by_date[w.test_date].tracks:
            psi[w.test_date] = predict_day(by_date[w.test_date], model, args.delta, lam=1.0).psi

    print(f"{len(psi)} test days, {sum(truth[d] for d in psi)} anomalous")
    print("lambda   tp  fp  fn  tn  precision  recall  f1")
    for lam in np.round(np.linspace(0.0, 0.3, 16), 3):
        cm = confusion({d: int(v >= lam) for d, v in psi.items()}, truth)
        m = metrics(cm)
        print(f"{lam:6.3f}  {cm.tp:3d} {cm.fp:3d} {cm.fn:3d} {cm.tn:3d}  {m.precision:9.2f}  {m.recall:6.2f}  {m.f1:4.2f}")


if __name__ == "__main__":
    main()
