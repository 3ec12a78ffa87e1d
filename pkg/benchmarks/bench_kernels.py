"""Benchmark the jitted kernels against the pure-numpy fallback.

The backend is fixed at import time by RECURLAB_NO_NUMBA, so this script
re-executes itself once with the flag set and prints a side-by-side table:

    python3 benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys
import time

import numpy as np


def _timed(fn, repeat=2):
    fn()  # warm-up (jit compilation on the numba path)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_suite():
    from recurlab import _kernels
    from recurlab.algebra import PolyPath, track_branches
    from recurlab.recurrence import TauSpec, translation_set_remote
    from recurlab.signal import SampledSignal

    results = {"backend": _kernels.backend_name()}

    rng = np.random.default_rng(0)
    a = rng.normal(size=2_000_000)
    b = a + 1e-3 * rng.normal(size=a.size)

    t = _timed(lambda: [_kernels.sup_diff(a, b) for _ in range(10)])
    results["sup_diff 2M x10"] = t

    t = _timed(lambda: [_kernels.sup_diff_capped(a, b, 1e-4) for _ in range(50)])
    results["sup_diff_capped 2M x50"] = t

    src = np.sin(0.01 * np.arange(400_000))
    tgt = src[5000:5000 + 100_000].copy()
    offsets = np.arange(0, 200_000, 8, dtype=np.int64)
    t = _timed(lambda: _kernels.min_sliding_sup(src, tgt, offsets, 0.0))
    results["min_sliding_sup 25k offsets"] = t

    s = SampledSignal.from_function(lambda x: np.sin(x + np.log1p(x)), 0.0, 4000.0, 0.005)
    cands = TauSpec(lo=2 * np.pi, hi=50 * 2 * np.pi, step=2 * np.pi, refine=True)
    t = _timed(lambda: translation_set_remote(s, 0.05, cands))
    results["translation_set_remote 800k pts"] = t

    p = PolyPath.from_functions(
        [lambda x: 0 * x, lambda x: -(3 + np.sin(x) + np.sin(np.sqrt(2) * x))],
        0.0, 500.0, 0.005)
    t = _timed(lambda: track_branches(p))
    results["aberth track 100k pts"] = t

    return results


def main():
    if os.environ.get("_RECURLAB_BENCH_CHILD"):
        print(json.dumps(run_suite()))
        return

    here = run_suite()
    env = dict(os.environ, RECURLAB_NO_NUMBA="1", _RECURLAB_BENCH_CHILD="1")
    out = subprocess.run([sys.executable, os.path.abspath(__file__)], env=env,
                         capture_output=True, text=True, check=True)
    other = json.loads(out.stdout.strip().splitlines()[-1])

    keys = [k for k in here if k != "backend"]
    width = max(len(k) for k in keys)
    print(f"{'kernel workload':<{width}}  {here['backend']:>10}  {other['backend']:>10}  speedup")
    for k in keys:
        ratio = other[k] / here[k] if here[k] > 0 else float("inf")
        print(f"{k:<{width}}  {here[k]:>9.3f}s  {other[k]:>9.3f}s  {ratio:>6.1f}x")


if __name__ == "__main__":
    main()
