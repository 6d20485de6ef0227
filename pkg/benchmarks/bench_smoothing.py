"""Time the smoothing backends against each other.

Runs the truncated Gaussian kernel average over random maps at several
grid sizes and reports the best wall time per backend plus the speedup
of the compiled core over the numpy fallback. Outputs of the two
backends are cross-checked before timing so the numbers compare equal
work.

Usage:
    python3 benchmarks/bench_smoothing.py
    python3 benchmarks/bench_smoothing.py --sizes 60,128,512 --repeats 9
"""

import argparse
import time

import numpy as np

from hotloc.smoothing import available_backends, smooth_grid


def best_time(values: np.ndarray, h: float, backend: str, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        smooth_grid(values, h, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--sizes",
        default="32,60,128,256",
        help="comma-separated grid side lengths (default 32,60,128,256)",
    )
    parser.add_argument(
        "--repeats", type=int, default=5, help="timed runs per case, best is kept"
    )
    parser.add_argument(
        "--bandwidth", type=float, default=1e-3, help="kernel bandwidth h"
    )
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    backends = available_backends()

    print(f"backends: {', '.join(backends)}")
    header = f"{'m':>6}" + "".join(f"{b:>14}" for b in backends)
    if "compiled" in backends and "numpy" in backends:
        header += f"{'speedup':>10}"
    print(header)

    rng = np.random.default_rng(0)
    for m in sizes:
        values = rng.random((m, m))
        outputs = {b: smooth_grid(values, args.bandwidth, backend=b) for b in backends}
        ref = next(iter(outputs.values()))
        for b, out in outputs.items():
            err = float(np.abs(out - ref).max())
            if err > 1e-12:
                raise SystemExit(f"backend {b} disagrees at m={m}: max error {err:g}")
        times = {b: best_time(values, args.bandwidth, b, args.repeats) for b in backends}
        row = f"{m:>6}" + "".join(f"{times[b] * 1e3:>12.3f} ms" for b in backends)
        if "compiled" in times and "numpy" in times:
            row += f"{times['numpy'] / times['compiled']:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
