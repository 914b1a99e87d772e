"""Sliding-window streaming run over synthetic batches, printing the per-window lines.

    python3 scripts/stream_demo.py --task classification --num-batches 10
"""
import argparse

from spwnn.core import Activation, Task, default_hyperparams
from spwnn.data import Dataset, synth_classification, synth_regression
from spwnn.streaming import report_lines, run_stream, split_into_batches


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--task", choices=[t.value for t in Task], default="classification")
    ap.add_argument("--activation", choices=[a.value for a in Activation], default="gaussian")
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--num-batches", type=int, default=10)
    ap.add_argument("--window-size", type=int, default=2)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--pace-ms", type=float, default=0.0)
    args = ap.parse_args()

    task = Task(args.task)
    if task is Task.CLASSIFICATION:
        ds = synth_classification(args.rows, 4.0, seed=0)
    else:
        ds = synth_regression(args.rows, 0.01, seed=0)
        ds = Dataset((ds.features + 3.0) / 6.0, (ds.target + 1.0) / 2.0, ds.feature_names, ds.target_name)
    hp = default_hyperparams(task, streaming=True, epochs=args.epochs)
    reports = run_stream(split_into_batches(ds.features, ds.target, args.num_batches), args.window_size,
                         hp, Activation(args.activation), task, pace_ms=args.pace_ms)
    for line in report_lines(reports):
        print(line)


if __name__ == "__main__":
    main()
