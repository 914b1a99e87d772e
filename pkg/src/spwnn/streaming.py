"""Sliding-window training and evaluation over a stream of micro-batches.

A persistent model is trained on the oldest ``ws - 1`` batches of a full
window and then scored on the newest one, before the window slides by one
batch. The model is never re-initialised, so each test batch is predicted by
a model that has only seen strictly older data.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import Activation, Hyperparams, MomentumState, Task, init_model
from .metrics import EvalReport, evaluate
from .parallel import train


@dataclass(frozen=True, eq=False)
class MicroBatch:
    batch_id: int
    rows: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64).ravel()
        if rows.ndim != 2 or rows.shape[0] < 1 or targets.shape != (rows.shape[0],):
            raise ValueError(f"malformed batch {self.batch_id}: rows {rows.shape}, targets {targets.shape}")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "targets", targets)


@dataclass(frozen=True)
class StreamWindow:
    capacity: int
    buffer: tuple[MicroBatch, ...] = ()

    def __post_init__(self):
        if self.capacity < 2:
            raise ValueError(f"window size must be >= 2, got {self.capacity}")

    @property
    def full(self) -> bool:
        return len(self.buffer) == self.capacity

    def __len__(self) -> int:
        return len(self.buffer)


def enqueue(window: StreamWindow, batch: MicroBatch) -> StreamWindow:
    if window.full:
        raise ValueError("window is full; slide before enqueueing")
    if window.buffer and batch.batch_id <= window.buffer[-1].batch_id:
        raise ValueError(f"batch ids must increase: {batch.batch_id} after {window.buffer[-1].batch_id}")
    return StreamWindow(window.capacity, window.buffer + (batch,))


def slide(window: StreamWindow) -> StreamWindow:
    if not window.full:
        raise ValueError(f"can only slide a full window ({len(window)}/{window.capacity} batches)")
    return StreamWindow(window.capacity, window.buffer[1:])


@dataclass
class WindowReport:
    window_index: int
    metrics: EvalReport
    trained_on: list[int]
    tested_on: int
    elapsed_s: float = 0.0

    def as_dict(self) -> dict:
        out = {"window": self.window_index, "trained_on": self.trained_on, "tested_on": self.tested_on}
        metrics = self.metrics.as_dict()
        metrics.pop("elapsed_s")
        out.update(metrics)
        out["elapsed_s"] = self.elapsed_s
        return out


def split_into_batches(xs, ys, num_batches: int) -> list[MicroBatch]:
    """Contiguous, order-preserving blocks; the remainder goes to the earliest batches."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if num_batches < 1:
        raise ValueError(f"num_batches must be >= 1, got {num_batches}")
    if num_batches > xs.shape[0]:
        raise ValueError(f"cannot split {xs.shape[0]} rows into {num_batches} batches")
    bounds = np.cumsum([0] + [len(c) for c in np.array_split(np.arange(xs.shape[0]), num_batches)])
    return [MicroBatch(i + 1, xs[lo:hi], ys[lo:hi])
            for i, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:]))]


def run_stream(batches: Iterable[MicroBatch], ws: int, hp: Hyperparams,
               activation: Activation, task: Task, *, pace_ms: float = 0.0,
               workers: int | None = None, backend: str = "process",
               on_report: Callable[[WindowReport], None] | None = None) -> list[WindowReport]:
    """Prequential sliding-window run. Produces one report per full window.

    ``pace_ms`` sleeps between arrivals to mimic a live source; it never
    changes results.
    """
    window = StreamWindow(ws)
    model = None
    momentum: MomentumState | None = None
    reports: list[WindowReport] = []
    seen = 0
    for batch in batches:
        if pace_ms and seen:
            time.sleep(pace_ms / 1000.0)
        seen += 1
        window = enqueue(window, batch)
        if not window.full:
            continue
        t0 = time.perf_counter()
        train_part = window.buffer[:-1]
        test_batch = window.buffer[-1]
        xs = np.concatenate([b.rows for b in train_part])
        ys = np.concatenate([b.targets for b in train_part])
        if model is None:
            model = init_model(xs.shape[1], hp, activation, task)
        report = train(xs, ys, hp, activation, task, model=model, momentum=momentum,
                       workers=workers, backend=backend)
        model, momentum = report.final_model, report.final_momentum
        metrics = evaluate(model, test_batch.rows, test_batch.targets)
        wr = WindowReport(len(reports) + 1, metrics, [b.batch_id for b in train_part],
                          test_batch.batch_id, time.perf_counter() - t0)
        reports.append(wr)
        if on_report is not None:
            on_report(wr)
        window = slide(window)
    if seen < ws:
        raise ValueError(f"stream has {seen} batches, fewer than the window size {ws}")
    return reports


METRIC_KEYS = ("mse", "sensitivity", "specificity", "auc", "elapsed_s")


def average_reports(reports: Sequence[WindowReport]) -> dict:
    """Per-metric mean over windows; windows lacking a metric are skipped for it."""
    out: dict = {"average": True, "windows": len(reports)}
    for key in METRIC_KEYS:
        values = [r.as_dict().get(key) for r in reports]
        values = [v for v in values if v is not None]
        if values:
            out[key] = float(np.mean(values))
    return out


def report_lines(reports: Sequence[WindowReport]) -> list[str]:
    lines = [json.dumps(r.as_dict()) for r in reports]
    lines.append(json.dumps(average_reports(reports)))
    return lines
