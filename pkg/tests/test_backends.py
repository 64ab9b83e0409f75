import os
import subprocess
import sys

import numpy as np
import pytest

import qns
from qns import backend


def random_pair(K=10, seed=11, d=2):
    rng = np.random.default_rng(seed)
    shape = (2 * K + 1,) * d
    x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    y = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return x, y


THETA = np.array([[0.0, 0.7], [-0.7, 0.0]])
W = 0.9


@pytest.mark.skipif(bool(os.environ.get("QNS_PURE_PYTHON")),
                    reason="extension suppressed by environment")
def test_extension_built_and_selected():
    assert backend.COMPILED
    assert backend._twist is not None


@pytest.mark.skipif(not backend.COMPILED, reason="no compiled kernel")
def test_compiled_kernel_matches_pure_loop():
    K = 10
    x, y = random_pair(K)
    lut = backend._phase_lut(K, 1.0, 0.7)
    pure = backend._loop_2d(x, y, K, lut, W)
    scale = np.abs(pure).max()
    for parallel in (True, False):
        compiled = backend._twist.twisted_convolve_2d(
            np.ascontiguousarray(x), np.ascontiguousarray(y), lut, W, K,
            parallel=parallel)
        assert np.abs(compiled - pure).max() <= 1e-13 * scale


@pytest.mark.skipif(not backend.COMPILED, reason="no compiled kernel")
def test_compiled_parallel_and_sequential_agree_bitwise():
    K = 9
    x, y = random_pair(K, seed=2)
    lut = backend._phase_lut(K, 1.0, 0.4)
    args = (np.ascontiguousarray(x), np.ascontiguousarray(y), lut, W, K)
    par = backend._twist.twisted_convolve_2d(*args, parallel=True)
    seq = backend._twist.twisted_convolve_2d(*args, parallel=False)
    again = backend._twist.twisted_convolve_2d(*args, parallel=True)
    assert np.array_equal(par, seq)
    assert np.array_equal(par, again)


def test_generic_dimension_kernel_matches_planar():
    K = 8
    x, y = random_pair(K, seed=5)
    lut = backend._phase_lut(K, 1.0, 0.7)
    planar = backend._loop_2d(x, y, K, lut, W)
    generic = backend._loop_nd(x, y, K, 1.0, THETA, W)
    assert np.abs(generic - planar).max() <= 1e-13 * np.abs(planar).max()


def brute_force_nd(x, y, K, spacing, theta, w):
    M = 2 * K + 1
    out = np.zeros_like(x)
    for a in np.ndindex(*x.shape):
        xi = (np.array(a) - K) * spacing
        acc = 0.0 + 0.0j
        for b in np.ndindex(*x.shape):
            diff = tuple(ai - bi + K for ai, bi in zip(a, b))
            if any(di < 0 or di >= M for di in diff):
                continue
            eta = (np.array(b) - K) * spacing
            acc += np.exp(0.5j * (xi @ theta @ eta)) * x[diff] * y[b]
        out[a] = w * acc
    return out


def test_generic_kernel_against_brute_force_in_three_dimensions():
    K = 2
    x, y = random_pair(K, seed=7, d=3)
    rng = np.random.default_rng(8)
    raw = rng.standard_normal((3, 3))
    theta = raw - raw.T
    fast = backend._loop_nd(x, y, K, 0.75, theta, W)
    slow = brute_force_nd(x, y, K, 0.75, theta, W)
    assert np.abs(fast - slow).max() <= 1e-13 * np.abs(slow).max()


def test_fft_shortcut_matches_direct_sum_without_deformation():
    K = 10
    x, y = random_pair(K, seed=3)
    lut = backend._phase_lut(K, 1.0, 0.0)
    direct = backend._loop_2d(x, y, K, lut, W)
    shortcut = backend._fft_convolve(x, y, W)
    assert np.abs(shortcut - direct).max() <= 1e-13 * np.abs(direct).max()


def test_dispatch_honors_summation_mode():
    K = 7
    x, y = random_pair(K, seed=9)
    zero = np.zeros((2, 2))
    fast = backend.twisted_convolve(x, y, K, 1.0, zero, W)
    with backend.summation("ordered"):
        assert backend.summation_mode() == "ordered"
        ordered = backend.twisted_convolve(x, y, K, 1.0, zero, W)
    assert backend.summation_mode() == "fast"
    assert np.abs(fast - ordered).max() <= 1e-13 * np.abs(ordered).max()
    with pytest.raises(ValueError):
        backend.set_summation_mode("sloppy")


def test_pure_python_import_suppression(tmp_path):
    # the same product, computed with the extension forced off in a child
    # interpreter, must agree with whatever the parent selected
    K = 8
    grid = qns.FrequencyGrid(2, K, 2 * np.pi)
    theta = qns.ThetaMatrix.planar(0.6)
    x, y = random_pair(K, seed=13)
    here = qns.twisted_convolution(qns.QElement(grid, theta, x),
                                   qns.QElement(grid, theta, y))
    checksum = complex(here.coeffs.sum())

    code = (
        "import numpy as np\n"
        "import qns\n"
        "from qns import backend\n"
        "assert not backend.COMPILED\n"
        "rng = np.random.default_rng(13)\n"
        "shape = (17, 17)\n"
        "x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)\n"
        "y = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)\n"
        "grid = qns.FrequencyGrid(2, 8, 2 * np.pi)\n"
        "theta = qns.ThetaMatrix.planar(0.6)\n"
        "out = qns.twisted_convolution(qns.QElement(grid, theta, x),\n"
        "                              qns.QElement(grid, theta, y))\n"
        "print(repr(complex(out.coeffs.sum())))\n"
    )
    env = dict(os.environ, QNS_PURE_PYTHON="1")
    proc = subprocess.run([sys.executable, "-c", code],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    child = complex(proc.stdout.strip())
    assert abs(child - checksum) <= 1e-12 * max(1.0, abs(checksum))
