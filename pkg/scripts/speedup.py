"""Time one-partition against multi-partition training on synthetic regression data.

    python3 scripts/speedup.py --rows 200000 --partitions 1,4 --target-seconds 20
"""
import argparse
import json
import math
import os

from spwnn.core import Activation, Hyperparams, Task
from spwnn.data import synth_regression
from spwnn.metrics import speedup
from spwnn.parallel import train


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=200_000)
    ap.add_argument("--partitions", default="1,4")
    ap.add_argument("--target-seconds", type=float, default=20.0,
                    help="size epochs so the single-partition run takes at least this long")
    ap.add_argument("--epochs", type=int, help="fixed epoch count; skips calibration")
    ap.add_argument("--backend", choices=("process", "thread"), default="process")
    args = ap.parse_args()

    ds = synth_regression(args.rows, 0.01, seed=0)
    base = dict(nhn=10, lr=0.05, momentum=0.9, batch_size=2048, seed=0)
    epochs = args.epochs
    if epochs is None:
        probe = train(ds.features, ds.target, Hyperparams(**base, epochs=1, partitions=1),
                      Activation.MORLET, Task.REGRESSION).wall_time_s
        epochs = max(1, math.ceil(1.1 * args.target_seconds / probe))
    print(json.dumps({"rows": args.rows, "epochs": epochs, "cores": len(os.sched_getaffinity(0))}))

    baseline = None
    for p in (int(v) for v in args.partitions.split(",")):
        rep = train(ds.features, ds.target, Hyperparams(**base, epochs=epochs, partitions=p),
                    Activation.MORLET, Task.REGRESSION, workers=p, backend=args.backend)
        baseline = baseline or rep.wall_time_s
        print(json.dumps({"partitions": p, "wall_time_s": rep.wall_time_s,
                          "final_loss": rep.per_epoch_loss[-1],
                          "speedup": round(speedup(baseline, rep.wall_time_s), 2)}))


if __name__ == "__main__":
    main()
