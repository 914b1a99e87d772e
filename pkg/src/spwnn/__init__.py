"""Data-parallel wavelet neural networks with model-averaging SGD and sliding-window streaming."""

from .core import (
    Activation,
    DivergenceError,
    GradientSet,
    Hyperparams,
    MomentumState,
    Task,
    WnnModel,
    activate,
    activate_deriv,
    apply_update,
    backward,
    default_hyperparams,
    forward,
    init_model,
    load_model,
    loss,
    save_model,
)
from .metrics import EvalReport, auc, confusion_rates, evaluate, speedup
from .parallel import TrainReport, average_models, local_epoch, partition_data, predict, train
from .streaming import MicroBatch, StreamWindow, WindowReport, enqueue, run_stream, slide, split_into_batches

__version__ = "0.1.0"
