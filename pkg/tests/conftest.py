import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Sequence

import numpy as np
import pytest

# Add the project root directory to the Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from mssd.data import SynthComponents, synth_seasonal  # noqa: E402
from mssd.models import MssdConfig, SDNetConfig  # noqa: E402
from mssd.numcore import GradTape, Module, Tensor, backward  # noqa: E402
from mssd.training import TrainConfig  # noqa: E402

GRAD_RTOL = 1e-4
FD_STEP = 1e-5


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_op_gradients(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], step: float = FD_STEP) -> float:
    """Largest relative error between analytic and central-difference gradients.

    ``fn`` maps tensors built from ``arrays`` to a scalar tensor.
    """
    inputs = [Tensor.parameter(a) for a in arrays]
    with GradTape() as tape:
        grads = backward(fn(*inputs), tape)
    worst = 0.0
    for index, array in enumerate(arrays):
        numeric = np.zeros_like(array, dtype=np.float64)
        for pos in np.ndindex(array.shape):
            plus, minus = [a.copy() for a in arrays], [a.copy() for a in arrays]
            plus[index][pos] += step
            minus[index][pos] -= step
            f_plus = fn(*[Tensor(a) for a in plus]).item()
            f_minus = fn(*[Tensor(a) for a in minus]).item()
            numeric[pos] = (f_plus - f_minus) / (2 * step)
        worst = max(worst, relative_error(grads[inputs[index]], numeric))
    return worst


def check_module_gradients(module: Module, loss_fn: Callable[[], Tensor], step: float = FD_STEP) -> Dict[str, float]:
    """Relative error per parameter of ``module`` for the scalar ``loss_fn()``."""
    with GradTape() as tape:
        grads = backward(loss_fn(), tape)
    params = module.parameters()
    errors = {}
    for name, tensor in params.items():
        base = tensor.numpy()
        numeric = np.zeros_like(base)
        for pos in np.ndindex(base.shape):
            shifted = base.copy()
            shifted[pos] = base[pos] + step
            module.set_parameter(name, shifted)
            f_plus = loss_fn().item()
            shifted[pos] = base[pos] - step
            module.set_parameter(name, shifted)
            f_minus = loss_fn().item()
            numeric[pos] = (f_plus - f_minus) / (2 * step)
        module.set_parameter(name, base)
        errors[name] = relative_error(grads[tensor], numeric)
    return errors


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_sdnet_config():
    return SDNetConfig(
        num_heads=1,
        kernel_scales=[2],
        tcn_layers=1,
        tcn_kernel=2,
        tcn_channels=2,
        grid_rows=2,
        global_kernel=3,
        dropout=0.0,
    )


@pytest.fixture
def tiny_mssd_config(tiny_sdnet_config):
    return MssdConfig(samples_per_hour=1, input_len=24, horizon=24, sdnet=tiny_sdnet_config, seed=7)


@pytest.fixture
def small_mssd_config():
    """Small enough to train in seconds."""
    return MssdConfig(
        samples_per_hour=1,
        input_len=48,
        horizon=24,
        seed=3,
        sdnet=SDNetConfig(
            num_heads=2, kernel_scales=[2, 4], tcn_layers=2, tcn_kernel=2, tcn_channels=4, grid_rows=2, dropout=0.0
        ),
    )


@pytest.fixture
def quick_train_config():
    return TrainConfig(epochs=3, batch_size=16, lr=1e-3, patience=5, seed=11)


@pytest.fixture
def periodic_frame():
    """40 noiseless days, exactly periodic."""
    return synth_seasonal(40, 1, SynthComponents(noise_std=0.0), seed=0, name="periodic")


@pytest.fixture
def noisy_frame():
    return synth_seasonal(40, 1, SynthComponents(noise_std=0.1), seed=5, name="noisy")


@pytest.fixture
def write_csv(tmp_path):
    """Write ``text`` to a CSV under the test's temporary directory."""
    def _write(text: str, name: str = "data.csv") -> Path:
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write


class ReadRecorder:
    """One-dimensional series that records every row index read from it.

    It is not an ndarray, so numpy can only reach the values through
    ``__getitem__``.
    """

    ndim = 1

    def __init__(self, values: np.ndarray):
        self._values = np.asarray(values, dtype=np.float64)
        self.rows_read = set()

    def __len__(self) -> int:
        return int(self._values.size)

    def __getitem__(self, key):
        self.rows_read.update(np.atleast_1d(np.arange(self._values.size)[key]).tolist())
        return self._values[key]


@pytest.fixture
def read_recorder():
    return ReadRecorder


@pytest.fixture
def output_dir(tmp_path):
    path = tmp_path / "out"
    path.mkdir()
    return path


@pytest.fixture
def caiso_csv():
    location = os.environ.get("MSSD_CAISO_CSV")
    if not location or not Path(location).exists():
        pytest.skip("MSSD_CAISO_CSV does not point at the CAISO hourly export")
    return Path(location)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep MSSD_* variables from the shell out of the tests."""
    for key in list(os.environ):
        if key.startswith("MSSD_") and key != "MSSD_CAISO_CSV":
            monkeypatch.delenv(key, raising=False)
    yield
