"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from vlfusion.kernels import _pykernels

try:
    from vlfusion.kernels import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    boxes = lambda n: np.hstack([p := rng.uniform(0, 600, (n, 2)), p + rng.uniform(10, 80, (n, 2))])  # noqa: E731
    a, b = boxes(30), boxes(30)
    cost = {n: rng.random((n, n)) for n in (6, 30, 100)}
    n_ev = 200_000
    ev = (rng.integers(0, 346, n_ev), rng.integers(0, 260, n_ev), np.sort(rng.uniform(0, 0.05, n_ev)),
          rng.choice(np.array([-1, 1], dtype=np.int8), n_ev))
    pts = rng.uniform([-3, -2, 1], [3, 2, 20], (30_000, 3))
    out = {f"lsa_min {n}x{n}": (lambda k, c=c: k.lsa_min(c)) for n, c in cost.items()}
    out["iou_matrix 30x30"] = lambda k: k.iou_matrix(a, b)
    out["bin_events 2e5"] = lambda k: k.bin_events(*ev, 0.0, 0.05, 10, 260, 346)
    out["project_points 3e4"] = lambda k: k.project_points(pts, 400, 400, 320, 240, -0.1, 0.01, 0, 1e-3, 1e-3, True)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    if _ckernels is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<22}" + "".join(f"{name:>14}" for name, _ in backends) + ("     speedup" if _ckernels else ""))
    for label, fn in cases(np.random.default_rng(0)).items():
        times = []
        for _, mod in backends:
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(mod), number=1), 1e-6)))
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
            times.append(best)
        row = f"{label:<22}" + "".join(f"{t * 1e6:>11.1f} us" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
