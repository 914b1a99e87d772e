"""Command-line front end: ``spwnn {train,predict,stream,bench,select-features,synth}``.

Every command writes line-delimited JSON records to ``--metrics-out`` (stdout
by default). The first record echoes the fully resolved configuration and the
last one is ``{"record": "completed"}``; a file without that marker comes from
an interrupted or failed run.

A ``--config`` file holds flat ``key=value`` lines using the long flag names
(``batch-size=32``). A previous metrics file is also accepted, in which case
its echoed configuration is reused. Explicit flags override the file.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import data as dmod
from .core import Activation, Task, default_hyperparams, load_model, save_model
from .metrics import evaluate, speedup
from .parallel import predict, train
from .streaming import average_reports, run_stream, split_into_batches

MODES = ("train", "predict", "stream", "bench", "select-features", "synth")


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except (KeyboardInterrupt, StageError, BrokenPipeError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass
class RunConfig:
    mode: str
    data: str | None = None
    target: str = "-1"
    positive_label: str | None = None
    drop: list[str] = field(default_factory=list)
    delimiter: str = ","
    task: str = "regression"
    activation: str = "morlet"
    hidden: int | None = None
    lr: float | None = None
    momentum: float | None = None
    batch_size: int | None = None
    epochs: int | None = None
    partitions: list[int] = field(default_factory=lambda: [1])
    threads: int | None = None
    backend: str = "process"
    seed: int = 0
    split: float = 0.8
    top_k: int | None = None
    window_size: int = 2
    num_batches: int = 10
    pace_ms: float = 0.0
    rows: int = 2000
    noise_sd: float = 0.01
    separation: float = 4.0
    model_out: str | None = None
    model_in: str | None = None
    metrics_out: str | None = None
    out: str | None = None

    def hyperparams(self, streaming: bool = False, partitions: int | None = None):
        return default_hyperparams(
            Task(self.task), streaming, nhn=self.hidden, lr=self.lr, momentum=self.momentum,
            batch_size=self.batch_size, epochs=self.epochs,
            partitions=partitions if partitions is not None else self.partitions[0], seed=self.seed)

    def echo(self) -> dict:
        """Resolved settings keyed by long flag name; hyperparameter defaults made explicit."""
        out = {k.replace("_", "-"): v for k, v in asdict(self).items() if k != "mode"}
        if self.mode in ("train", "stream", "bench"):
            hp = self.hyperparams(streaming=self.mode == "stream")
            out.update({"hidden": hp.nhn, "lr": hp.lr, "momentum": hp.momentum,
                        "batch-size": hp.batch_size, "epochs": hp.epochs})
        return out


# -- argument handling --------------------------------------------------------

def _partition_list(text: str) -> list[int]:
    values = [int(tok) for tok in str(text).replace(" ", "").split(",") if tok]
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"invalid partition list {text!r}")
    return values


def _drop_list(text: str) -> list[str]:
    return [tok.strip() for tok in str(text).split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file (flags override it)")
    common.add_argument("--data", help="input CSV file")
    common.add_argument("--target", help="target column name or index (default: last)")
    common.add_argument("--positive-label", help="target value mapped to class 1")
    common.add_argument("--drop", type=_drop_list, help="comma-separated columns to drop")
    common.add_argument("--delimiter", help="field delimiter (default ',')")
    common.add_argument("--task", choices=[t.value for t in Task])
    common.add_argument("--activation", choices=[a.value for a in Activation])
    common.add_argument("--hidden", type=int, help="hidden wavelet nodes")
    common.add_argument("--lr", type=float)
    common.add_argument("--momentum", type=float)
    common.add_argument("--batch-size", type=int)
    common.add_argument("--epochs", type=int)
    common.add_argument("--partitions", type=_partition_list,
                        help="partition count; bench takes a comma-separated list")
    common.add_argument("--threads", type=int, help="worker count (default: min(partitions, cores))")
    common.add_argument("--backend", choices=["process", "thread"])
    common.add_argument("--seed", type=int)
    common.add_argument("--split", type=float, help="train fraction (default 0.8)")
    common.add_argument("--top-k", type=int, help="keep the top-k features by |t| (classification)")
    common.add_argument("--window-size", type=int)
    common.add_argument("--num-batches", type=int)
    common.add_argument("--pace-ms", type=float, help="delay between stream batches")
    common.add_argument("--rows", type=int, help="synth: number of rows")
    common.add_argument("--noise-sd", type=float, help="synth: regression noise")
    common.add_argument("--separation", type=float, help="synth: distance between class means")
    common.add_argument("--model-out")
    common.add_argument("--model-in")
    common.add_argument("--metrics-out")
    common.add_argument("--out", help="output file (predictions, selected data, synthetic data)")

    parser = argparse.ArgumentParser(prog="spwnn", description="Parallel wavelet neural network engine")
    sub = parser.add_subparsers(dest="mode", required=True)
    helps = {"train": "train and evaluate on an 80:20 split",
             "predict": "score a data file with a saved model",
             "stream": "sliding-window training over micro-batches",
             "bench": "time training for several partition counts",
             "select-features": "rank features by Welch t-value",
             "synth": "write a synthetic dataset"}
    for mode in MODES:
        sub.add_parser(mode, parents=[common], help=helps[mode])
    return parser


def read_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("{"):
            record = json.loads(line)
            if record.get("record") == "config":
                for key, val in record["config"].items():
                    if val is None:
                        continue
                    if isinstance(val, list):
                        val = ",".join(str(v) for v in val)
                    values[key] = str(val)
            continue
        if "=" not in line:
            raise ValueError(f"config line without '=': {raw!r}")
        key, val = line.split("=", 1)
        values[key.strip().lstrip("-")] = val.strip()
    return values


def resolve_config(argv: list[str]) -> RunConfig:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        file_values = read_config_file(args.config)
        file_values.pop("config", None)
        pre = []
        for key, val in file_values.items():
            pre += [f"--{key}", val]
        # file values first so explicit flags win
        args = parser.parse_args([args.mode] + pre + argv[1:])
    given = {k: v for k, v in vars(args).items() if v is not None and k not in ("config",)}
    if "task" not in given and args.mode != "predict":
        given["task"] = "classification" if args.positive_label is not None else "regression"
    if "num_batches" not in given and given.get("task") == "regression":
        given["num_batches"] = 20
    return RunConfig(**given)


# -- output -------------------------------------------------------------------

class RecordWriter:
    """Line-delimited JSON records, flushed as they are written."""

    def __init__(self, path: str | None):
        self._fh = open(path, "w") if path else sys.stdout
        self._owned = bool(path)

    def write(self, record: str, **fields):
        self._fh.write(json.dumps({"record": record, **fields}) + "\n")
        self._fh.flush()

    def close(self):
        if self._owned:
            self._fh.close()


def _open_out(path: str | None):
    return open(path, "w") if path else contextlib.nullcontext(sys.stdout)


def _meta_path(model_path: str) -> Path:
    return Path(str(model_path) + ".meta.json")


# -- commands -----------------------------------------------------------------

def _load(cfg: RunConfig) -> dmod.Dataset:
    if not cfg.data:
        raise ValueError("--data is required")
    ds = dmod.load_csv(cfg.data, cfg.target, cfg.drop, cfg.positive_label, cfg.delimiter)
    if Task(cfg.task) is Task.CLASSIFICATION and not np.all((ds.target == 0) | (ds.target == 1)):
        raise ValueError("classification targets must be 0/1; pass --positive-label")
    return ds


def _prepare_static(cfg: RunConfig, log: RecordWriter):
    with stage("load"):
        ds = _load(cfg)
        log.write("data", rows=ds.n, features=ds.d, rejected_rows=ds.rejected_rows)
    with stage("split"):
        pair = dmod.split(ds, cfg.split, cfg.seed, shuffle=True)
    with stage("normalize"):
        train_ds, test_ds = dmod.normalize(pair.train, pair.test,
                                           scale_target=Task(cfg.task) is Task.REGRESSION)
    if cfg.top_k:
        with stage("select-features"):
            train_ds, ranked = dmod.t_value_select(train_ds, cfg.top_k)
            test_ds = test_ds.select_columns(train_ds.feature_names)
            log.write("selected", features=[name for name, _ in ranked[:cfg.top_k]])
    return train_ds, test_ds


def cmd_train(cfg: RunConfig, log: RecordWriter) -> int:
    train_ds, test_ds = _prepare_static(cfg, log)
    hp = cfg.hyperparams()
    with stage("train"):
        report = train(train_ds.features, train_ds.target, hp, Activation(cfg.activation), Task(cfg.task),
                       workers=cfg.threads, backend=cfg.backend,
                       log=lambda rec: log.write("epoch", **rec))
        log.write("train", wall_time_s=report.wall_time_s, epochs_run=report.epochs_run,
                  final_loss=report.per_epoch_loss[-1])
    with stage("evaluate"):
        log.write("test", **evaluate(report.final_model, test_ds.features, test_ds.target).as_dict())
    if cfg.model_out:
        with stage("save"):
            save_model(report.final_model, cfg.model_out)
            meta = {"feature_names": train_ds.feature_names, "target_name": train_ds.target_name,
                    "positive_label": cfg.positive_label, "delimiter": cfg.delimiter,
                    "norm_stats": train_ds.norm_stats.to_json()}
            _meta_path(cfg.model_out).write_text(json.dumps(meta, indent=1) + "\n")
    return 0


def _load_for_model(path, meta: dict, nin: int):
    """Read feature columns (and the target, when present) that a saved model expects."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=meta.get("delimiter", ","))
        header = next(reader, None)
        if header is None:
            return np.empty((0, nin)), None
        header = [h.strip() for h in header]
        names = meta["feature_names"]
        target_name = meta["target_name"]
        t_idx = header.index(target_name) if target_name in header else None
        if all(name in header for name in names):
            cols = [header.index(name) for name in names]
        else:
            cols = [i for i in range(len(header)) if i != t_idx]
            if len(cols) != nin:
                raise ValueError(f"schema mismatch: model expects nin={nin} feature columns "
                                 f"({', '.join(names)}), data has {len(cols)}")
        positive = meta.get("positive_label")
        rows, targets = [], []
        for record in reader:
            if not record or all(not c.strip() for c in record):
                continue
            try:
                rows.append([float(record[i]) for i in cols])
                if t_idx is not None:
                    targets.append(dmod.parse_target(record[t_idx], positive))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"malformed data row {record!r}") from exc
    xs = np.array(rows, dtype=np.float64).reshape(len(rows), len(cols))
    return xs, (np.array(targets) if t_idx is not None else None)


def cmd_predict(cfg: RunConfig, log: RecordWriter) -> int:
    with stage("load-model"):
        if not cfg.model_in:
            raise ValueError("--model-in is required")
        model = load_model(cfg.model_in)
        meta = json.loads(_meta_path(cfg.model_in).read_text())
        stats = dmod.NormStats.from_json(meta["norm_stats"])
    with stage("load"):
        if not cfg.data:
            raise ValueError("--data is required")
        xs, ys = _load_for_model(cfg.data, meta, model.nin)
    with stage("predict"):
        scores = predict(model, stats.scale_features(xs))
    with stage("write"), _open_out(cfg.out) as fh:
        if model.task is Task.CLASSIFICATION:
            for s in scores:
                fh.write(f"{float(s)!r} {int(s >= 0.5)}\n")
        else:
            for v in stats.unscale_target(scores):
                fh.write(f"{float(v)!r}\n")
        if ys is not None and ys.size:
            report = evaluate(model, stats.scale_features(xs), stats.scale_target(ys))
            fh.write(report.to_line() + "\n")
            log.write("test", **report.as_dict())
    log.write("predict", rows=int(scores.size))
    return 0


def cmd_stream(cfg: RunConfig, log: RecordWriter) -> int:
    with stage("load"):
        ds = _load(cfg)
        log.write("data", rows=ds.n, features=ds.d, rejected_rows=ds.rejected_rows)
    with stage("batch"):
        if cfg.num_batches < cfg.window_size:
            raise ValueError(f"num-batches ({cfg.num_batches}) must be >= window-size ({cfg.window_size})")
        raw = split_into_batches(ds.features, ds.target, cfg.num_batches)
    with stage("normalize"):
        prefix = raw[:cfg.window_size - 1]
        head = dmod.Dataset(np.concatenate([b.rows for b in prefix]),
                            np.concatenate([b.targets for b in prefix]), ds.feature_names)
        stats = dmod.fit_norm_stats(head, scale_target=Task(cfg.task) is Task.REGRESSION)
        batches = [type(b)(b.batch_id, stats.scale_features(b.rows), stats.scale_target(b.targets))
                   for b in raw]
    hp = cfg.hyperparams(streaming=True)
    with stage("stream"):
        reports = run_stream(batches, cfg.window_size, hp, Activation(cfg.activation), Task(cfg.task),
                             pace_ms=cfg.pace_ms, workers=cfg.threads, backend=cfg.backend,
                             on_report=lambda r: log.write("window", **r.as_dict()))
        log.write("average", **average_reports(reports))
    return 0


def cmd_bench(cfg: RunConfig, log: RecordWriter) -> int:
    train_ds, _ = _prepare_static(cfg, log)
    act, task = Activation(cfg.activation), Task(cfg.task)
    with stage("bench"):
        base_hp = cfg.hyperparams(partitions=1)
        baseline = train(train_ds.features, train_ds.target, base_hp, act, task, workers=1)
        t_s = baseline.wall_time_s
        log.write("bench", partitions=1, workers=1, wall_time_s=t_s, speedup=1.0)
        for p in cfg.partitions:
            hp = cfg.hyperparams(partitions=p)
            run = train(train_ds.features, train_ds.target, hp, act, task,
                        workers=cfg.threads, backend=cfg.backend)
            rec = {"partitions": p, "workers": cfg.threads, "wall_time_s": run.wall_time_s,
                   "speedup": speedup(t_s, run.wall_time_s),
                   "speedup_text": format_speedup(t_s, run.wall_time_s)}
            if p == 1:
                rec["identical_to_baseline"] = run.final_model.equals(baseline.final_model)
            log.write("bench", **rec)
    return 0


def format_speedup(t_sequential: float, t_parallel: float) -> str:
    return f"{speedup(t_sequential, t_parallel):.2f}"


def cmd_select_features(cfg: RunConfig, log: RecordWriter) -> int:
    with stage("load"):
        ds = _load(cfg)
    with stage("select-features"):
        k = cfg.top_k or min(100, ds.d)
        selected, ranked = dmod.t_value_select(ds, k)
        for rank, (name, t) in enumerate(ranked, 1):
            log.write("feature", rank=rank, name=name, t_value=t, selected=rank <= k)
    if cfg.out:
        with stage("write"):
            dmod.save_csv(selected, cfg.out, cfg.delimiter)
    return 0


def cmd_synth(cfg: RunConfig, log: RecordWriter) -> int:
    with stage("synth"):
        if not cfg.out:
            raise ValueError("--out is required")
        if Task(cfg.task) is Task.REGRESSION:
            ds = dmod.synth_regression(cfg.rows, cfg.noise_sd, cfg.seed)
        else:
            ds = dmod.synth_classification(cfg.rows, cfg.separation, cfg.seed)
        dmod.save_csv(ds, cfg.out, cfg.delimiter)
        log.write("synth", rows=ds.n, features=ds.d, path=cfg.out)
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "stream": cmd_stream, "bench": cmd_bench,
            "select-features": cmd_select_features, "synth": cmd_synth}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = resolve_config(argv)
    except (OSError, ValueError) as exc:
        print(f"spwnn: error [config]: {exc}", file=sys.stderr)
        return 2
    # predictions go to stdout when no --out is given; keep records off it then
    log_path = cfg.metrics_out
    if cfg.mode == "predict" and not cfg.out and not log_path:
        log_path = "/dev/null"
    try:
        log = RecordWriter(log_path)
    except OSError as exc:
        print(f"spwnn: error [output]: {exc}", file=sys.stderr)
        return 1
    try:
        log.write("config", mode=cfg.mode, config=cfg.echo())
        t0 = time.perf_counter()
        status = COMMANDS[cfg.mode](cfg, log)
        log.write("completed", elapsed_s=time.perf_counter() - t0)
        return status
    except StageError as exc:
        print(f"spwnn: error [{exc.stage}]: {exc.__cause__}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("spwnn: interrupted; output is incomplete", file=sys.stderr)
        return 130
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the final flush
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 1
    finally:
        log.close()
