#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the row-batched analysis/synthesis steps and the full image
decompose/reconstruct round trip under each backend.  The active backend
for library use is picked at import time via FREQATTACK_NUMBA; here both
implementations are called directly.

    python3 benchmarks/bench_kernels.py [--repeats 2000]
"""

import argparse
import time

import numpy as np

from freqattack import _kernels, wavelet


def time_fn(fn, repeats):
    fn()  # warmup (numba compilation, cache touch)
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def backends():
    out = {"numpy": (_kernels._wpd_step_rows_numpy, _kernels._iwpd_step_rows_numpy)}
    if _kernels._HAVE_NUMBA:
        out["numba"] = (_kernels._wpd_step_rows_numba, _kernels._iwpd_step_rows_numba)
    return out


def bench_steps(repeats):
    rng = np.random.default_rng(0)
    filt = wavelet.get_filter("db4")
    rows = {"small (96x32)": rng.random((96, 32)), "large (768x256)": rng.random((768, 256))}
    print(f"{'kernel step':<28}{'backend':<10}{'usec/call':>12}")
    for label, x in rows.items():
        for name, (step, istep) in backends().items():
            t = time_fn(lambda: step(x, filt.lowpass, filt.highpass), repeats)
            print(f"{label:<28}{name:<10}{t * 1e6:>12.1f}")
            a, d = step(x, filt.lowpass, filt.highpass)
            t = time_fn(lambda: istep(a, d, filt.lowpass, filt.highpass), repeats)
            print(f"{label + ' inverse':<28}{name:<10}{t * 1e6:>12.1f}")


def bench_round_trip(repeats):
    import importlib
    import os
    import subprocess
    import sys

    print(f"\n{'decompose+reconstruct':<28}{'backend':<10}{'usec/call':>12}")
    code = (
        "import time, numpy as np\n"
        "from freqattack import wavelet\n"
        "x = np.random.default_rng(0).random((32, 32, 3))\n"
        "f = wavelet.get_filter('haar')\n"
        "t = wavelet.decompose_image(x, f, 3)\n"
        "wavelet.reconstruct_image(t, f)\n"
        "start = time.perf_counter()\n"
        f"for _ in range({repeats}):\n"
        "    wavelet.reconstruct_image(wavelet.decompose_image(x, f, 3), f)\n"
        f"print((time.perf_counter() - start) / {repeats} * 1e6)\n"
    )
    for flag, name in (("1", "numba"), ("0", "numpy")):
        if flag == "1" and not _kernels._HAVE_NUMBA:
            continue
        env = dict(os.environ, FREQATTACK_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
        )
        print(f"{'32x32x3 haar depth 3':<28}{name:<10}{float(out.stdout):>12.1f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()
    print(f"active library backend: {_kernels.backend_name()}\n")
    bench_steps(args.repeats)
    bench_round_trip(args.repeats)


if __name__ == "__main__":
    main()
