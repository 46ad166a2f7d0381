"""numba and numpy kernel paths must agree; the env flag must select numpy."""

import os
import subprocess
import sys

import numpy as np
import pytest

from anomaly import kernels
from anomaly._accel import HAS_NUMBA, kernel_path, numba_enabled
from anomaly.operators import l1_weights
from anomaly.stable import StableParams, sample

needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")


def both(fn):
    with kernel_path(False):
        a = fn()
    with kernel_path(True):
        b = fn()
    return a, b


@needs_numba
@pytest.mark.parametrize("alpha,beta", [(2.0, 0.0), (1.0, 0.5), (1.5, -0.7), (0.6, 1.0)])
def test_cms_paths_agree(alpha, beta):
    rng = np.random.default_rng(0)
    v = rng.uniform(-1.5, 1.5, 5000)
    w = rng.exponential(size=5000)
    a, b = both(lambda: kernels.cms_transform(alpha, beta, v, w))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


@needs_numba
def test_ctrw_paths_agree():
    rng = np.random.default_rng(1)
    waits = rng.exponential(0.1, (300, 16))
    jumps = rng.standard_normal((300, 16))

    def run():
        delta = np.zeros((300, 21))
        state = (np.zeros(300), np.zeros(300, dtype=np.int64))
        ev = np.zeros(300, dtype=np.int64)
        first = np.full(300, np.inf)
        rem = kernels.ctrw_chunk(waits, jumps, state[0], state[1], delta, 0.05, 1.0, ev, first)
        return np.concatenate([delta.ravel(), ev, first, [rem]])

    a, b = both(run)
    np.testing.assert_allclose(a, b, rtol=1e-13)


@needs_numba
def test_levy_walk_paths_agree():
    rng = np.random.default_rng(2)
    dur = rng.pareto(1.5, (200, 8))
    dirs = np.where(rng.random((200, 8)) < 0.5, -1.0, 1.0)

    def run():
        pos = np.zeros((200, 51))
        kernels.levy_walk_chunk(dur, dirs, 1.0, np.zeros(200), np.zeros(200), np.zeros(200, dtype=np.int64), pos, 0.1)
        return pos

    a, b = both(run)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


@needs_numba
def test_first_crossing_and_l1_paths_agree():
    rng = np.random.default_rng(3)
    paths = np.cumsum(rng.exponential(size=(50, 100)), axis=1)
    levels = np.linspace(0, 120, 40)
    a, b = both(lambda: kernels.first_crossing(paths, levels))
    np.testing.assert_array_equal(a, b)
    du = rng.standard_normal(300)
    w = np.array(l1_weights(0.4, 300))
    a, b = both(lambda: kernels.l1_series(du, w))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    dc = rng.standard_normal((60, 25))
    w2 = np.tile(np.array(l1_weights(0.7, 60)), (25, 1))
    a, b = both(lambda: kernels.l1_history(dc, w2, 59))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_sampling_deterministic_on_each_path():
    p = StableParams(1.6, 0.3)
    for flag in (False, True):
        with kernel_path(flag):
            assert np.array_equal(sample(p, 500, 9), sample(p, 500, 9))


def test_env_flag_disables_numba():
    code = "from anomaly._accel import numba_enabled; print(numba_enabled())"
    env = dict(os.environ, ANOMALY_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_kernel_path_restores_state():
    before = numba_enabled()
    with kernel_path(False):
        assert not numba_enabled()
    assert numba_enabled() == before
