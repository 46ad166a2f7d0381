"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0] [--json out.json]

Each case is run once per path to warm up (JIT compile), then timed as the
best of ``--repeat`` runs.  Outputs of the two paths are checked to agree.
"""

import argparse
import json
import time

import numpy as np

from anomaly import kernels
from anomaly._accel import HAS_NUMBA, kernel_path
from anomaly.operators import l1_weights


def _cms(n):
    rng = np.random.default_rng(1)
    v = rng.uniform(-np.pi / 2, np.pi / 2, n)
    w = rng.exponential(size=n)
    return lambda: kernels.cms_transform(1.5, 0.4, v, w)


def _ctrw(n):
    rng = np.random.default_rng(2)
    waits = rng.exponential(0.01, (n, 64))
    jumps = rng.standard_normal((n, 64))

    def run():
        delta = np.zeros((n, 11))
        t_last = np.zeros(n)
        k_next = np.zeros(n, dtype=np.int64)
        ev = np.zeros(n, dtype=np.int64)
        first = np.full(n, np.inf)
        kernels.ctrw_chunk(waits, jumps, t_last, k_next, delta, 0.05, 0.5, ev, first)
        return delta

    return run


def _levy(n):
    rng = np.random.default_rng(3)
    dur = rng.pareto(1.5, (n, 32))
    dirs = np.where(rng.random((n, 32)) < 0.5, -1.0, 1.0)

    def run():
        pos = np.zeros((n, 101))
        kernels.levy_walk_chunk(dur, dirs, 1.0, np.zeros(n), np.zeros(n), np.zeros(n, dtype=np.int64), pos, 0.1)
        return pos

    return run


def _crossing(n):
    rng = np.random.default_rng(4)
    paths = np.cumsum(rng.exponential(0.1, (n, 400)), axis=1)
    levels = np.linspace(0.1, 30.0, 300)
    return lambda: kernels.first_crossing(paths, levels)


def _l1_series(n):
    du = np.random.default_rng(5).standard_normal(n)
    w = np.array(l1_weights(0.6, n))
    return lambda: kernels.l1_series(du, w)


def _l1_history(n):
    rng = np.random.default_rng(6)
    dc = rng.standard_normal((n, 2000))
    w = np.tile(np.array(l1_weights(0.7, n)), (2000, 1))
    return lambda: kernels.l1_history(dc, w, n - 1)


CASES = [
    ("cms_transform", _cms, 1_000_000),
    ("ctrw_chunk", _ctrw, 20_000),
    ("levy_walk_chunk", _levy, 20_000),
    ("first_crossing", _crossing, 5_000),
    ("l1_series", _l1_series, 4_000),
    ("l1_history", _l1_history, 1_000),
]


def best_of(fn, repeat):
    out = fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply problem sizes")
    ap.add_argument("--json", help="write results to this file")
    args = ap.parse_args(argv)
    if not HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rows = []
    print(f"{'kernel':<18}{'size':>10}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}  agree")
    for name, make, size in CASES:
        n = max(1, int(size * args.scale))
        fn = make(n)
        with kernel_path(False):
            t_np, r_np = best_of(fn, args.repeat)
        with kernel_path(True):
            t_nb, r_nb = best_of(fn, args.repeat)
        agree = bool(np.allclose(r_np, r_nb, rtol=1e-10, atol=1e-12))
        rows.append({"kernel": name, "size": n, "numpy_s": t_np, "numba_s": t_nb, "speedup": t_np / t_nb, "agree": agree})
        print(f"{name:<18}{n:>10}{t_np:>12.4g}{t_nb:>12.4g}{t_np / t_nb:>10.2f}  {agree}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["agree"] for r in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())
