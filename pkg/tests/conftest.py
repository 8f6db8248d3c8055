import numpy as np
import pytest

from calocal.ndcore import MlpParams


def random_mlp(rng, dims, scale=0.5, alpha=0.2):
    weights = [rng.normal(0, scale, size=(o, i)) for i, o in zip(dims[:-1], dims[1:])]
    biases = [rng.normal(0, scale, size=o) for o in dims[1:]]
    return MlpParams(weights, biases, alpha)


def central_diff(f, x, step=1e-6):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        hi = f(x)
        x[idx] = orig - step
        lo = f(x)
        x[idx] = orig
        grad[idx] = (hi - lo) / (2 * step)
    return grad


def assert_grad_close(analytic, numeric, rel=1e-4, abs_=1e-8):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    err = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    ok = (err <= rel * scale) | (err <= abs_)
    assert ok.all(), f"max err {err.max()} at {np.unravel_index(np.argmax(err), err.shape)}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
