"""Execution backends for the twisted-convolution kernel.

The compiled Cython kernel (``qns._twist``) is used when it imported cleanly
and the element is two-dimensional; a pure-numpy kernel with identical
semantics covers everything else and acts as the fallback when the extension
is unavailable (or suppressed with ``QNS_PURE_PYTHON=1``).

Two summation modes are selectable per run:

* ``"ordered"`` -- the eta-sum for every output node is accumulated in
  ascending flat lattice order.  Bit-reproducible across runs and across the
  sequential/parallel compiled paths (each output entry is an independent
  fixed-order sum).
* ``"fast"`` (default) -- same kernels, but theta = 0 products may be
  evaluated through zero-padded FFTs and the compiled kernel may run its
  outer loop in parallel.  Reproducible to <= 1e-13 relative (in practice
  bit-stable for a fixed build, since no cross-iteration reductions occur).
"""

import os
from contextlib import contextmanager
from functools import lru_cache

import numpy as np

try:
    from . import _twist
except ImportError:  # pragma: no cover - depends on build environment
    _twist = None

if os.environ.get("QNS_PURE_PYTHON"):
    _twist = None

COMPILED = _twist is not None

_MODE = "fast"
_MODES = ("fast", "ordered")


def summation_mode():
    return _MODE


def set_summation_mode(mode):
    global _MODE
    if mode not in _MODES:
        raise ValueError("summation mode must be one of %r, got %r" % (_MODES, mode))
    _MODE = mode


@contextmanager
def summation(mode):
    """Temporarily switch the summation mode."""
    previous = _MODE
    set_summation_mode(mode)
    try:
        yield
    finally:
        set_summation_mode(previous)


@lru_cache(maxsize=16)
def _phase_lut(K, spacing, t12):
    # exp(i * c * s) for every integer cross term s = k1*l2 - k2*l1
    smax = 2 * K * K
    s = np.arange(-smax, smax + 1)
    return np.exp((0.5j * spacing * spacing * t12) * s)


def _fft_convolve(x, y, w):
    # theta = 0: plain linear convolution, cropped back to the band
    d = x.ndim
    M = x.shape[0]
    n = 2 * M - 1
    axes = tuple(range(d))
    full = np.fft.ifftn(np.fft.fftn(x, s=(n,) * d, axes=axes)
                        * np.fft.fftn(y, s=(n,) * d, axes=axes), axes=axes)
    crop = (slice(M // 2, M // 2 + M),) * d
    return w * full[crop]


def _loop_2d(x, y, K, lut, w):
    M = 2 * K + 1
    smax = 2 * K * K
    k = np.arange(-K, K + 1)
    out = np.zeros((M, M), dtype=np.complex128)
    for b1 in range(M):
        l1 = b1 - K
        a1lo = max(0, b1 - K)
        a1hi = min(M - 1, b1 + K)
        rows = slice(a1lo, a1hi + 1)
        xrows = slice(a1lo - b1 + K, a1hi - b1 + K + 1)
        k1 = k[rows]
        for b2 in range(M):
            yv = y[b1, b2]
            if yv == 0:
                continue
            l2 = b2 - K
            a2lo = max(0, b2 - K)
            a2hi = min(M - 1, b2 + K)
            cols = slice(a2lo, a2hi + 1)
            xcols = slice(a2lo - b2 + K, a2hi - b2 + K + 1)
            s = np.add.outer(k1 * l2, -k[cols] * l1)
            out[rows, cols] += yv * lut[s + smax] * x[xrows, xcols]
    return w * out


def _loop_nd(x, y, K, spacing, theta, w):
    # generic-d fallback; phase recomputed per eta from theta @ xi_eta
    d = x.ndim
    M = 2 * K + 1
    k = np.arange(-K, K + 1)
    out = np.zeros((M,) * d, dtype=np.complex128)
    theta_zero = not np.any(theta)
    for b in np.ndindex(*(M,) * d):
        yv = y[b]
        if yv == 0:
            continue
        l = np.array(b) - K
        sl_out = tuple(
            slice(max(0, bi - K), min(M - 1, bi + K) + 1) for bi in b
        )
        sl_x = tuple(
            slice(s.start - bi + K, s.stop - bi + K)
            for s, bi in zip(sl_out, b)
        )
        if theta_zero:
            out[sl_out] += yv * x[sl_x]
            continue
        tl = theta @ (l * spacing)
        arg = np.zeros([s.stop - s.start for s in sl_out])
        for axis in range(d):
            shape = [1] * d
            shape[axis] = -1
            arg = arg + (k[sl_out[axis]] * spacing * tl[axis]).reshape(shape)
        out[sl_out] += yv * np.exp(0.5j * arg) * x[sl_x]
    return w * out


def twisted_convolve(x, y, K, spacing, theta, w):
    """Raw coefficient-array twisted convolution on the symmetric lattice."""
    d = x.ndim
    theta_zero = not np.any(theta)
    if theta_zero and _MODE == "fast":
        return _fft_convolve(x, y, w)
    if d == 2:
        t12 = 0.0 if theta_zero else float(theta[0, 1])
        lut = _phase_lut(K, spacing, t12)
        if _twist is not None:
            return _twist.twisted_convolve_2d(
                np.ascontiguousarray(x), np.ascontiguousarray(y), lut, w, K,
                parallel=(_MODE == "fast"),
            )
        return _loop_2d(x, y, K, lut, w)
    return _loop_nd(x, y, K, spacing, theta, w)
