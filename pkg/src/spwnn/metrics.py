"""Evaluation metrics for regression and binary classification."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .core import Task, WnnModel, loss
from .parallel import predict

THRESHOLD = 0.5


@dataclass
class EvalReport:
    task: Task
    n: int
    elapsed_s: float
    mse: float | None = None
    sensitivity: float | None = None
    specificity: float | None = None
    auc: float | None = None
    flags: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        out = {"task": Task(self.task).value}
        if Task(self.task) is Task.REGRESSION:
            out["mse"] = self.mse
        else:
            out.update(sensitivity=self.sensitivity, specificity=self.specificity, auc=self.auc)
        out.update(n=self.n, elapsed_s=self.elapsed_s)
        if self.flags:
            out["flags"] = list(self.flags)
        return out

    def to_line(self) -> str:
        return json.dumps(self.as_dict())


def _binary_labels(labels) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64).ravel()
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return y.astype(bool)


def confusion_rates(scores, labels, threshold: float = THRESHOLD,
                    flags: list[str] | None = None) -> tuple[float, float]:
    """Sensitivity and specificity with ``score >= threshold`` predicted positive.

    A rate whose class is absent is reported as 1.0; when ``flags`` is given,
    ``"no_positives"`` / ``"no_negatives"`` is appended to it.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = _binary_labels(labels)
    if s.shape != y.shape:
        raise ValueError(f"length mismatch: {s.size} scores vs {y.size} labels")
    pred = s >= threshold
    tp = np.sum(pred & y)
    fn = np.sum(~pred & y)
    tn = np.sum(~pred & ~y)
    fp = np.sum(pred & ~y)
    if tp + fn:
        sens = tp / (tp + fn)
    else:
        sens = 1.0
        if flags is not None:
            flags.append("no_positives")
    if tn + fp:
        spec = tn / (tn + fp)
    else:
        spec = 1.0
        if flags is not None:
            flags.append("no_negatives")
    return float(sens), float(spec)


class SingleClassError(ValueError):
    """AUC requested on data containing only one class."""


def auc(scores, labels) -> float:
    """Mann-Whitney AUC with midranks for ties."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = _binary_labels(labels)
    if s.shape != y.shape:
        raise ValueError(f"length mismatch: {s.size} scores vs {y.size} labels")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("AUC needs at least one positive and one negative label")
    ranks = rankdata(s, method="average")
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate(model: WnnModel, xs, ys) -> EvalReport:
    t0 = time.perf_counter()
    scores = predict(model, xs)
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if scores.shape != ys.shape:
        raise ValueError(f"{scores.size} predictions vs {ys.size} targets")
    n = int(ys.size)
    if model.task is Task.REGRESSION:
        mse = loss(Task.REGRESSION, scores, ys) if n else None
        return EvalReport(Task.REGRESSION, n, time.perf_counter() - t0, mse=mse)
    flags: list[str] = []
    sens, spec = confusion_rates(scores, ys, THRESHOLD, flags)
    try:
        area = auc(scores, ys)
    except SingleClassError:
        area = None
        flags.append("auc_undefined")
    return EvalReport(Task.CLASSIFICATION, n, time.perf_counter() - t0,
                      sensitivity=sens, specificity=spec, auc=area, flags=flags)


def speedup(t_sequential: float, t_parallel: float) -> float:
    """Sequential wall time over parallel wall time."""
    if t_parallel <= 0:
        raise ValueError("parallel time must be positive")
    return t_sequential / t_parallel
