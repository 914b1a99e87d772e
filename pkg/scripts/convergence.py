"""Train and test both tasks on synthetic data with the acceptance configurations.

    python3 scripts/convergence.py [--seeds 0,1,2]

Prints one JSON line per (task, activation, seed) with the test metrics.
"""
import argparse
import json

from spwnn.core import Activation, Hyperparams, Task, default_hyperparams
from spwnn.data import normalize, split, synth_classification, synth_regression
from spwnn.metrics import evaluate
from spwnn.parallel import train


def run(task: Task, activation: Activation, seed: int) -> dict:
    if task is Task.REGRESSION:
        ds = synth_regression(2000, noise_sd=0.01, seed=seed)
        hp = Hyperparams(nhn=10, lr=0.05, momentum=0.9, batch_size=64, epochs=1000, partitions=2, seed=seed)
    else:
        ds = synth_classification(2000, separation=4.0, seed=seed)
        hp = default_hyperparams(task, lr=0.1, partitions=2, seed=seed)
    pair = split(ds, 0.8, seed=seed)
    tr, te = normalize(pair.train, pair.test, scale_target=task is Task.REGRESSION)
    rep = train(tr.features, tr.target, hp, activation, task)
    out = {"task": task.value, "activation": activation.value, "seed": seed, "train_s": round(rep.wall_time_s, 2)}
    out.update({k: v for k, v in evaluate(rep.final_model, te.features, te.target).as_dict().items()
                if k in ("mse", "auc", "sensitivity", "specificity")})
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="0")
    ap.add_argument("--task", choices=[t.value for t in Task])
    args = ap.parse_args()
    tasks = [Task(args.task)] if args.task else list(Task)
    for task in tasks:
        for activation in Activation:
            for seed in (int(s) for s in args.seeds.split(",")):
                print(json.dumps(run(task, activation, seed)), flush=True)


if __name__ == "__main__":
    main()
