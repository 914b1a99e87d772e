"""Dataset ingestion, preprocessing, feature selection and synthetic generators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Activation, activate


@dataclass(frozen=True)
class NormStats:
    """Train-only min/max statistics; ``target_*`` is set only when targets were scaled."""

    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float | None = None
    target_max: float | None = None

    def scale_features(self, xs: np.ndarray) -> np.ndarray:
        return _minmax(xs, self.feature_min, self.feature_max)

    def scale_target(self, ys: np.ndarray) -> np.ndarray:
        if self.target_min is None:
            return ys
        return _minmax(ys, self.target_min, self.target_max)

    def unscale_target(self, ys: np.ndarray) -> np.ndarray:
        if self.target_min is None or self.target_max == self.target_min:
            return ys
        return ys * (self.target_max - self.target_min) + self.target_min

    def to_json(self) -> dict:
        return {"feature_min": self.feature_min.tolist(), "feature_max": self.feature_max.tolist(),
                "target_min": self.target_min, "target_max": self.target_max}

    @classmethod
    def from_json(cls, obj: dict) -> "NormStats":
        return cls(np.asarray(obj["feature_min"], dtype=np.float64),
                   np.asarray(obj["feature_max"], dtype=np.float64),
                   obj.get("target_min"), obj.get("target_max"))


def _minmax(values, lo, hi):
    lo = np.asarray(lo, dtype=np.float64)
    span = np.asarray(hi, dtype=np.float64) - lo
    safe = np.where(span == 0, 1.0, span)
    # constant columns map to 0
    return np.where(span == 0, 0.0, (values - lo) / safe)


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    target: np.ndarray
    feature_names: list[str]
    target_name: str = "target"
    norm_stats: NormStats | None = None
    rejected_rows: int = 0

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.target, dtype=np.float64).ravel()
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise ValueError(f"inconsistent dataset shapes: features {x.shape}, target {y.shape}")
        if x.shape[1] != len(self.feature_names):
            raise ValueError(f"{x.shape[1]} feature columns but {len(self.feature_names)} names")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", list(self.feature_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def take(self, idx) -> "Dataset":
        return replace(self, features=self.features[idx], target=self.target[idx])

    def select_columns(self, names: Sequence[str]) -> "Dataset":
        pos = [self.feature_names.index(name) for name in names]
        stats = self.norm_stats
        if stats is not None:
            stats = replace(stats, feature_min=stats.feature_min[pos], feature_max=stats.feature_max[pos])
        return replace(self, features=self.features[:, pos], feature_names=list(names), norm_stats=stats)


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    ratio: float


# -- CSV ----------------------------------------------------------------------

def _resolve_column(header: list[str], col) -> int:
    if isinstance(col, int):
        idx = col
    elif isinstance(col, str) and col in header:
        return header.index(col)
    elif isinstance(col, str) and col.lstrip("-").isdigit():
        idx = int(col)
    else:
        raise KeyError(f"column {col!r} not found in header {header}")
    if not -len(header) <= idx < len(header):
        raise KeyError(f"column index {idx} out of range for {len(header)} columns")
    return idx % len(header)


def _parse_float(cell: str) -> float:
    value = float(cell)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {cell!r}")
    return value


def parse_target(cell: str, positive_label: str | None = None) -> float:
    """Numeric target, or 1.0/0.0 for match/non-match when ``positive_label`` is given."""
    cell = cell.strip()
    if positive_label is None:
        return _parse_float(cell)
    positive_label = str(positive_label).strip()
    if cell == positive_label:
        return 1.0
    # numeric labels match by value, so "1" and "1.0" agree
    if _looks_numeric(cell) and _looks_numeric(positive_label):
        return float(float(cell) == float(positive_label))
    return 0.0


def load_csv(path, target_column=-1, drop_columns: Sequence = (), positive_label: str | None = None,
             delimiter: str = ",", allow_empty: bool = False) -> Dataset:
    """Read a headed delimited file into a Dataset.

    With ``positive_label`` the target is binarised (that label -> 1, anything
    else -> 0); otherwise the target must be numeric. Rows with a malformed or
    non-finite cell are skipped and counted in ``rejected_rows``.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            if allow_empty:
                return Dataset(np.empty((0, 0)), np.empty(0), [])
            raise ValueError(f"{path}: file is empty")
        header = [h.strip() for h in header]
        t_idx = _resolve_column(header, target_column)
        dropped = {_resolve_column(header, c) for c in drop_columns}
        if t_idx in dropped:
            raise ValueError("the target column cannot also be dropped")
        keep = [i for i in range(len(header)) if i != t_idx and i not in dropped]

        rows, targets, rejected, text_targets = [], [], 0, 0
        for record in reader:
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                rejected += 1
                continue
            try:
                feats = [_parse_float(record[i]) for i in keep]
                y = parse_target(record[t_idx], positive_label)
            except ValueError:
                if positive_label is None and not _looks_numeric(record[t_idx]):
                    text_targets += 1
                rejected += 1
                continue
            rows.append(feats)
            targets.append(y)

    names = [header[i] for i in keep]
    if not rows and text_targets:
        raise ValueError(f"{path}: target column {header[t_idx]!r} is non-numeric; "
                         "pass a positive label to binarise it")
    if not rows:
        if allow_empty:
            return Dataset(np.empty((0, len(keep))), np.empty(0), names, header[t_idx], rejected_rows=rejected)
        raise ValueError(f"{path}: no valid data rows ({rejected} rejected)")
    return Dataset(np.array(rows, dtype=np.float64).reshape(len(rows), len(keep)),
                   np.array(targets), names, header[t_idx], rejected_rows=rejected)


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def save_csv(ds: Dataset, path, delimiter: str = ",") -> None:
    """Write a dataset with round-trip float precision (target last)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(ds.feature_names + [ds.target_name])
        for row, y in zip(ds.features, ds.target):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(y))])


# -- preprocessing ------------------------------------------------------------

def fit_norm_stats(ds: Dataset, scale_target: bool) -> NormStats:
    stats = NormStats(ds.features.min(axis=0), ds.features.max(axis=0))
    if scale_target:
        stats = replace(stats, target_min=float(ds.target.min()), target_max=float(ds.target.max()))
    return stats


def apply_norm(ds: Dataset, stats: NormStats) -> Dataset:
    return replace(ds, features=stats.scale_features(ds.features),
                   target=stats.scale_target(ds.target), norm_stats=stats)


def normalize(train: Dataset, test: Dataset, scale_target: bool = False) -> tuple[Dataset, Dataset]:
    """Min-max scale both sets with statistics from ``train`` only.

    ``scale_target`` applies the same rule to the target (used for regression).
    """
    if train.feature_names != test.feature_names:
        raise ValueError("train and test columns differ")
    stats = fit_norm_stats(train, scale_target)
    return apply_norm(train, stats), apply_norm(test, stats)


def split(ds: Dataset, ratio: float = 0.8, seed: int = 0, shuffle: bool = True) -> SplitPair:
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    n_train = int(round(ratio * ds.n))
    if n_train < 1 or n_train >= ds.n:
        raise ValueError(f"ratio {ratio} on {ds.n} rows leaves one side empty")
    order = np.random.default_rng(seed).permutation(ds.n) if shuffle else np.arange(ds.n)
    return SplitPair(ds.take(order[:n_train]), ds.take(order[n_train:]), ratio)


# -- feature selection --------------------------------------------------------

def welch_t(features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-column Welch two-sample t of class 1 against class 0; 0 where undefined."""
    y = np.asarray(labels).astype(bool)
    pos, neg = features[y], features[~y]
    n1, n0 = pos.shape[0], neg.shape[0]
    v1 = pos.var(axis=0, ddof=1) if n1 > 1 else np.zeros(features.shape[1])
    v0 = neg.var(axis=0, ddof=1) if n0 > 1 else np.zeros(features.shape[1])
    denom = np.sqrt(v1 / n1 + v0 / n0)
    diff = pos.mean(axis=0) - neg.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(denom > 0, diff / np.where(denom > 0, denom, 1.0), 0.0)
    return t


def t_value_select(ds: Dataset, k: int) -> tuple[Dataset, list[tuple[str, float]]]:
    """Keep the ``k`` features with the largest |Welch t|; ties keep column order."""
    y = ds.target
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("t-value selection needs a binary 0/1 target")
    if y.min() == y.max():
        raise ValueError("t-value selection needs both classes present")
    if not 1 <= k <= ds.d:
        raise ValueError(f"k must be in [1, {ds.d}], got {k}")
    t = welch_t(ds.features, y)
    order = np.argsort(-np.abs(t), kind="stable")
    ranked = [(ds.feature_names[i], float(t[i])) for i in order]
    return ds.select_columns([name for name, _ in ranked[:k]]), ranked


# -- synthetic data -----------------------------------------------------------

def synth_regression(n: int, noise_sd: float = 0.0, seed: int = 0) -> Dataset:
    """``y = morlet(x) + noise`` with ``x ~ U[-3, 3]``."""
    if n < 10:
        raise ValueError(f"n must be >= 10, got {n}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-3.0, 3.0, size=n)
    y = activate(Activation.MORLET, x)
    if noise_sd:
        y = y + rng.normal(0.0, noise_sd, size=n)
    return Dataset(x[:, None], y, ["x"], "y")


def synth_classification(n: int, separation: float = 4.0, seed: int = 0) -> Dataset:
    """Two unit-variance 2-D Gaussian blobs whose means are ``separation`` apart."""
    if n < 10:
        raise ValueError(f"n must be >= 10, got {n}")
    rng = np.random.default_rng(seed)
    labels = np.zeros(n)
    labels[n // 2:] = 1.0
    labels = rng.permutation(labels)
    direction = np.array([1.0, 1.0]) / np.sqrt(2.0)
    centers = np.where(labels[:, None] == 1, 0.5, -0.5) * separation * direction
    x = centers + rng.normal(size=(n, 2))
    return Dataset(x, labels, ["x1", "x2"], "label")
