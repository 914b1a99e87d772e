import numpy as np
import pytest

from spwnn.core import Activation, Hyperparams, Task, WnnModel, forward_batch, init_model, loss

ACTIVATIONS = list(Activation)
TASKS = list(Task)


def numeric_gradients(model: WnnModel, xs, ys, rel_step=1e-5):
    """Central finite differences of the batch loss w.r.t. every parameter entry."""
    grads = []
    for name in model.NAMES:
        base = getattr(model, name)
        out = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            h = rel_step * max(1.0, abs(base[idx]))
            vals = []
            for sign in (1.0, -1.0):
                arr = base.copy()
                arr[idx] += sign * h
                perturbed = WnnModel(**{**{n: getattr(model, n) for n in model.NAMES}, name: arr,
                                        "activation": model.activation, "task": model.task})
                vals.append(loss(model.task, forward_batch(perturbed, xs)[0], ys))
            out[idx] = (vals[0] - vals[1]) / (2 * h)
        grads.append(out)
    return grads


def gradients_agree(analytic, numeric, rtol=1e-4, atol=1e-8) -> bool:
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return bool(np.all((diff <= atol) | (diff <= rtol * scale)))


def random_problem(rng, activation, task, nin=None, nhn=None, n=None):
    nin = nin or int(rng.integers(1, 9))
    nhn = nhn or int(rng.integers(1, 11))
    n = n or int(rng.integers(1, 17))
    hp = Hyperparams(nhn=nhn, seed=int(rng.integers(2**32)))
    model = init_model(nin, hp, activation, task)
    xs = rng.uniform(-1.0, 1.0, size=(n, nin))
    if task is Task.CLASSIFICATION:
        ys = rng.integers(0, 2, size=n).astype(float)
    else:
        ys = rng.normal(size=n)
    return model, xs, ys


@pytest.fixture
def tiny_model():
    return WnnModel([[1.0]], [1.0], [1.0], [0.0], Activation.MORLET, Task.REGRESSION)


_CRITERION_LINES: list[str] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.outcome != "passed"):
        return
    status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
    title = mark.args[1] + (f" [{item.callspec.id}]" if hasattr(item, "callspec") else "")
    line = f"{status}  criterion {mark.args[0]:>3}  {title}  ({rep.duration:.2f}s)"
    if rep.outcome == "skipped" and isinstance(rep.longrepr, tuple):
        line += f"  [{rep.longrepr[2]}]"
    _CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
