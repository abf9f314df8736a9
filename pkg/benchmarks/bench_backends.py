"""Time the compiled and numpy kernels on the synthetic workload.

    python3 benchmarks/bench_backends.py [--trees 100] [--psi 256] [--repeat 3]

Each backend is swapped in for the whole library, then fit, scoring, global
DIFFI and local DIFFI are timed. Outputs are checked to be identical.
"""

from __future__ import annotations

import argparse
import time
import warnings

import numpy as np

import isodiffi._backend as backend
from isodiffi import diffi, forest
from isodiffi.diffi import InlierExplanationWarning
from isodiffi.synth import SynthSpec, generate, generate_test_outliers


def _use(kmod):
    forest.kernels = kmod
    diffi.kernels = kmod


def _best(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench(kmod, X, T, psi, test, repeat):
    _use(kmod)
    t_fit, model = _best(lambda: forest.fit(X, psi, T, seed=0), repeat)
    t_score, scores = _best(lambda: model.score_samples(X), repeat)
    t_gfi, rep = _best(lambda: diffi.global_diffi(model, X), repeat)

    def local_all():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InlierExplanationWarning)
            return [diffi.local_diffi(model, x).scores for x in test]

    t_lfi, lfi = _best(local_all, repeat)
    timings = {"fit": t_fit, "score": t_score, "gfi": t_gfi, "lfi/sample": t_lfi / len(test)}
    return timings, (scores, rep.scores, np.array(lfi))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--psi", type=int, default=256)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    data, _ = generate(SynthSpec(n=args.n, seed=0))
    test, _ = generate_test_outliers(100, seed=1)
    backends = backend.available_backends()
    results = {}
    for name, kmod in backends.items():
        results[name] = bench(kmod, data, args.trees, args.psi, test.values, args.repeat)
    _use(backend.kernels)

    names = list(results)
    print(f"{'stage':12s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for stage in results[names[0]][0]:
        row = [results[n][0][stage] for n in names]
        line = f"{stage:12s}" + "".join(f"{v * 1e3:10.3f}ms" for v in row)
        if len(names) == 2:
            line += f"{row[0] / row[1]:11.1f}x"
        print(line)
    if len(names) == 2:
        same = all(np.array_equal(a, b) for a, b in zip(results[names[0]][1], results[names[1]][1]))
        print("outputs identical:", same)
    else:
        print("only the numpy backend is available")


if __name__ == "__main__":
    main()
