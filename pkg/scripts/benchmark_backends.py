#!/usr/bin/env python3
"""Benchmark the compiled trig-sum core against the pure numpy fallback.

Times the jet evaluation (the hot kernel of Newton enumeration) and a full
critical-point enumeration with each backend, printing a comparison table.

Run:  python scripts/benchmark_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from toruscrit import backend
from toruscrit.amplitude import GaussianAmplitude
from toruscrit.covariance import LatticeSpectrum
from toruscrit.critical import find_critical_points
from toruscrit.sampler import sample_field


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_jets(impl, n_pts, n_modes, m, repeats):
    gen = np.random.default_rng(0)
    pts = gen.random((n_pts, m))
    freqs = 2 * np.pi * gen.integers(-20, 21, size=(n_modes, m)).astype(float)
    cc = gen.standard_normal(n_modes)
    cs = gen.standard_normal(n_modes)
    return time_call(lambda: impl.trig_jet(pts, freqs, cc, cs, 0.0, 2), repeats)


def bench_enumeration(backend_name, R, m, repeats):
    import importlib
    import os

    os.environ["TORUSCRIT_BACKEND"] = backend_name
    import toruscrit.backend as b

    importlib.reload(b)
    import toruscrit.sampler as s

    importlib.reload(s)
    spec = LatticeSpectrum(GaussianAmplitude(1.0), m, R)
    sample = s.sample_field(spec, 7)
    return time_call(lambda: find_critical_points(sample), repeats)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args()
    repeats = 3 if args.quick else 7

    names = backend.available_backends()
    print(f"available backends: {', '.join(names)}")
    print()
    print(f"{'case':<38}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    cases = [
        ("jets 1024 pts x 200 modes, m=1", 1024, 200, 1),
        ("jets 3136 pts x 560 modes, m=2", 3136, 560, 2),
        ("jets 4096 pts x 1200 modes, m=2", 4096, 1200, 2),
    ]
    for label, n_pts, n_modes, m in cases:
        times = [bench_jets(backend.get_backend(n), n_pts, n_modes, m, repeats) for n in names]
        ratio = times[-1] / times[0] if len(times) > 1 else 1.0
        print(
            f"{label:<38}"
            + "".join(f"{t*1e3:>10.2f}ms" for t in times)
            + f"{ratio:>9.2f}x"
        )
    for label, R, m in [("enumeration m=1 R=32", 32.0, 1), ("enumeration m=2 R=8", 8.0, 2)]:
        times = [bench_enumeration(n, R, m, max(2, repeats // 2)) for n in names]
        ratio = times[-1] / times[0] if len(times) > 1 else 1.0
        print(
            f"{label:<38}"
            + "".join(f"{t*1e3:>10.2f}ms" for t in times)
            + f"{ratio:>9.2f}x"
        )


if __name__ == "__main__":
    main()
