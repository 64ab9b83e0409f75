"""Timing comparison of the twisted-convolution backends.

Runs the compiled kernel (parallel and sequential), the pure-numpy loop, and
the zero-deformation FFT shortcut on the same random coefficient pairs and
prints one row per band limit.  Also reports the worst relative deviation of
every backend from the pure loop so a speedup never hides a wrong answer.

    python3 benchmarks/bench_backends.py --bands 8,16,24 --repeats 5
"""

import argparse
import time

import numpy as np

from qns import backend


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_band(K, theta12, repeats, rng):
    M = 2 * K + 1
    x = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    y = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    xc, yc = np.ascontiguousarray(x), np.ascontiguousarray(y)
    lut = backend._phase_lut(K, 1.0, theta12)
    w = 1.0

    results = {}
    deviations = {}
    reference = backend._loop_2d(x, y, K, lut, w)
    scale = np.abs(reference).max()
    results["pure_loop"] = time_call(lambda: backend._loop_2d(x, y, K, lut, w),
                                     repeats)

    if backend.COMPILED:
        for label, parallel in (("compiled_par", True), ("compiled_seq", False)):
            out = backend._twist.twisted_convolve_2d(xc, yc, lut, w, K,
                                                     parallel=parallel)
            deviations[label] = np.abs(out - reference).max() / scale
            results[label] = time_call(
                lambda p=parallel: backend._twist.twisted_convolve_2d(
                    xc, yc, lut, w, K, parallel=p), repeats)

    if theta12 == 0.0:
        out = backend._fft_convolve(x, y, w)
        deviations["fft"] = np.abs(out - reference).max() / scale
        results["fft"] = time_call(lambda: backend._fft_convolve(x, y, w),
                                   repeats)
    return results, deviations


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bands", default="8,16,24",
                    help="comma-separated band limits K")
    ap.add_argument("--theta12", type=float, default=0.5,
                    help="planar deformation strength (0 adds the FFT row)")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    bands = [int(tok) for tok in args.bands.split(",") if tok]
    rng = np.random.default_rng(args.seed)
    print(f"compiled extension available: {backend.COMPILED}")
    print(f"theta12={args.theta12}  repeats={args.repeats} (best-of)")
    print(f"{'K':>4} {'backend':<14} {'seconds':>12} {'speedup':>9} {'max rel dev':>13}")
    for K in bands:
        results, deviations = bench_band(K, args.theta12, args.repeats, rng)
        base = results["pure_loop"]
        for label, secs in sorted(results.items(), key=lambda kv: kv[1]):
            dev = deviations.get(label)
            dev_txt = f"{dev:13.2e}" if dev is not None else f"{'-':>13}"
            print(f"{K:>4} {label:<14} {secs:>12.6f} {base / secs:>8.1f}x {dev_txt}")


if __name__ == "__main__":
    main()
