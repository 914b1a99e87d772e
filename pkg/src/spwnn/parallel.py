"""Epoch-synchronous data-parallel training by model averaging.

Each epoch every partition starts from the same broadcast (model, momentum)
pair, runs a shuffled pass of mini-batch momentum SGD over its own rows, and
hands back its local copy. After all partitions finish, parameters and
momentum are averaged element-wise and the mean becomes the next broadcast.

Partitions are independent within an epoch, so they can run on a process
pool. Results are collected in partition order and every partition's work is
a pure function of its inputs, which keeps training bit-identical for any
worker count.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .core import (
    Activation,
    DivergenceError,
    Hyperparams,
    MomentumState,
    Task,
    WnnModel,
    apply_update,
    backward,
    clamp_dilation,
    forward_batch,
    init_model,
    loss,
)

# stream tags keep the RNG draws for partitioning and local shuffles disjoint
_PARTITION_STREAM = 1
_LOCAL_STREAM = 2


@dataclass(frozen=True, eq=False)
class Partition:
    rows: np.ndarray
    targets: np.ndarray
    partition_index: int
    seed: int

    def local_seed(self, epoch: int) -> int:
        """Shuffle seed for this partition in a given epoch."""
        ss = np.random.SeedSequence([self.seed, _LOCAL_STREAM, self.partition_index, epoch])
        return int(ss.generate_state(1, dtype=np.uint64)[0])

    def __len__(self) -> int:
        return self.rows.shape[0]


@dataclass
class TrainReport:
    per_epoch_loss: list[float]
    wall_time_s: float
    epochs_run: int
    final_model: WnnModel
    final_momentum: MomentumState = field(repr=False)


def default_workers(partitions: int) -> int:
    try:
        cores = len(os.sched_getaffinity(0))
    except AttributeError:  # not available on macOS
        cores = os.cpu_count() or 1
    return max(1, min(partitions, cores))


def partition_data(xs, ys, P: int, seed: int) -> list[Partition]:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64).ravel()
    n = xs.shape[0]
    if xs.ndim != 2 or ys.shape != (n,):
        raise ValueError(f"inconsistent shapes: xs {xs.shape}, ys {ys.shape}")
    if P < 1:
        raise ValueError(f"partition count must be >= 1, got {P}")
    if P > n:
        raise ValueError(f"cannot split {n} rows into {P} partitions")
    rng = np.random.default_rng(np.random.SeedSequence([seed, _PARTITION_STREAM]))
    order = rng.permutation(n)
    return [Partition(xs[idx], ys[idx], i, seed)
            for i, idx in enumerate(np.array_split(order, P))]


def local_epoch(model: WnnModel, mom: MomentumState, part: Partition, hp: Hyperparams,
                epoch: int) -> tuple[WnnModel, MomentumState, float]:
    """One shuffled pass of mini-batch SGD over a single partition."""
    order = np.random.default_rng(part.local_seed(epoch)).permutation(len(part))
    xs, ys = part.rows[order], part.targets[order]
    bs = hp.batch_size
    for start in range(0, len(part), bs):
        grads = backward(model, xs[start:start + bs], ys[start:start + bs])
        model, mom = apply_update(model, grads, mom, hp)
    local_loss = loss(model.task, forward_batch(model, part.rows)[0], part.targets)
    return model, mom, local_loss


def average_models(models: Sequence[WnnModel],
                   moms: Sequence[MomentumState]) -> tuple[WnnModel, MomentumState]:
    if not models:
        raise ValueError("need at least one model to average")
    if len(moms) != len(models):
        raise ValueError(f"{len(models)} models but {len(moms)} momentum states")
    first = models[0]
    for m in models[1:]:
        if not first.same_layout(m):
            raise ValueError("cannot average models with different configurations")
    for mom in moms:
        if any(x.shape != y.shape for x, y in zip(mom.arrays(), first.arrays())):
            raise ValueError("momentum state shape does not match the models")
    if len(models) == 1:
        return models[0], moms[0]

    def mean(stack):
        return np.mean(np.stack(stack), axis=0)

    params = [mean([m.arrays()[i] for m in models]) for i in range(4)]
    deltas = [mean([m.arrays()[i] for m in moms]) for i in range(4)]
    params[2] = clamp_dilation(params[2])
    avg = replace(first, input_weights=params[0], output_weights=params[1],
                  dilation=params[2], translation=params[3])
    return avg, MomentumState(*deltas)


# -- worker-side state --------------------------------------------------------
# Partitions are shipped to each worker process once; per-epoch tasks carry
# only the broadcast state and the partition index.

_WORKER_PARTS: list[Partition] = []


def _init_worker(parts: list[Partition]) -> None:
    global _WORKER_PARTS
    _WORKER_PARTS = parts


def _worker_epoch(model, mom, index, hp, epoch):
    return local_epoch(model, mom, _WORKER_PARTS[index], hp, epoch)


def _make_pool(parts: list[Partition], workers: int, backend: str) -> Executor | None:
    if workers <= 1:
        return None
    if backend == "process":
        return ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(parts,))
    if backend == "thread":
        return ThreadPoolExecutor(max_workers=workers)
    raise ValueError(f"unknown backend {backend!r}; use 'process' or 'thread'")


def train(xs, ys, hp: Hyperparams, activation: Activation, task: Task, *,
          model: WnnModel | None = None, momentum: MomentumState | None = None,
          workers: int | None = None, backend: str = "process",
          log: Callable[[dict], None] | None = None) -> TrainReport:
    """Train with epoch-synchronous model averaging over ``hp.partitions`` partitions.

    ``model``/``momentum`` warm-start training from an existing state; by default
    a fresh model is drawn from ``hp.seed``. ``workers`` sets the degree of
    actual parallelism and never changes the result.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if xs.ndim != 2 or ys.shape != (xs.shape[0],):
        raise ValueError(f"inconsistent shapes: xs {xs.shape}, ys {ys.shape}")
    if model is None:
        model = init_model(xs.shape[1], hp, activation, task)
    elif model.nin != xs.shape[1]:
        raise ValueError(f"model expects {model.nin} features, data has {xs.shape[1]}")
    if momentum is None:
        momentum = MomentumState.zeros_like(model)

    parts = partition_data(xs, ys, hp.partitions, hp.seed)
    workers = default_workers(hp.partitions) if workers is None else max(1, min(workers, hp.partitions))
    pool = _make_pool(parts, workers, backend)

    losses: list[float] = []
    t0 = time.perf_counter()
    try:
        for epoch in range(hp.epochs):
            try:
                if pool is None:
                    results = [local_epoch(model, momentum, p, hp, epoch) for p in parts]
                elif backend == "process":
                    futures = [pool.submit(_worker_epoch, model, momentum, p.partition_index, hp, epoch)
                               for p in parts]
                    results = [f.result() for f in futures]
                else:
                    futures = [pool.submit(local_epoch, model, momentum, p, hp, epoch) for p in parts]
                    results = [f.result() for f in futures]
            except DivergenceError as exc:
                raise DivergenceError(f"epoch {epoch + 1}: {exc}", epoch=epoch + 1) from exc
            # barrier: all partitions are done before aggregation
            model, momentum = average_models([r[0] for r in results], [r[1] for r in results])
            epoch_loss = loss(task, forward_batch(model, xs)[0], ys)
            if not np.isfinite(epoch_loss):
                raise DivergenceError(f"epoch {epoch + 1}: training loss is not finite", epoch=epoch + 1)
            losses.append(epoch_loss)
            if log is not None:
                log({"epoch": epoch + 1, "loss": epoch_loss, "elapsed_s": time.perf_counter() - t0})
    finally:
        if pool is not None:
            pool.shutdown()
    return TrainReport(losses, time.perf_counter() - t0, len(losses), model, momentum)


def predict(model: WnnModel, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0 and (xs.ndim < 2 or xs.shape[1] in (0, model.nin)):
        return np.empty(0)
    return forward_batch(model, xs)[0]
