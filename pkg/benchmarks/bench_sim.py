"""Time the compiled and pure-Python tandem kernels on the same inputs.

    python benchmarks/bench_sim.py [--trials 8192] [--hops 1 2 3] [--repeat 5]

Reports the best-of-``repeat`` wall time per block for each backend and
checks that both produce the same departure curves.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from wtbound._core import propagate_compiled, propagate_python
from wtbound.arrivals import train
from wtbound.channel import RayleighChannel


def make_inputs(trials: int, hops: int, horizon: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    cap = np.ascontiguousarray(RayleighChannel.from_db(5.0).sample(rng, (trials, horizon, hops)), dtype=float)
    a = train(25, 5).padded(horizon)
    x = np.full(hops, 33.0)
    return cap, a, x


def bench(fn, cap, a, x, store_forward: bool, repeat: int) -> tuple[float, np.ndarray]:
    out = np.empty((cap.shape[0], cap.shape[1] + 1))
    best = min(timeit.repeat(lambda: fn(cap, a, x, store_forward, out), number=1, repeat=repeat))
    return best, out.copy()


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=8192)
    ap.add_argument("--hops", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--horizon", type=int, default=40)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if propagate_compiled is None:
        print("compiled extension not built; timing the pure-Python kernel only")
    print(f"{'hops':>4} {'timing':>18} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for hops in args.hops:
        cap, a, x = make_inputs(args.trials, hops, args.horizon)
        for sf in (False, True):
            t_py, ref = bench(propagate_python, cap, a, x, sf, args.repeat)
            label = "store_and_forward" if sf else "cut_through"
            if propagate_compiled is None:
                print(f"{hops:>4} {label:>18} {1e3 * t_py:>10.2f} {'-':>10} {'-':>8}")
                continue
            t_cy, got = bench(propagate_compiled, cap, a, x, sf, args.repeat)
            if not np.allclose(got, ref, rtol=1e-12, atol=1e-9):
                raise SystemExit(f"backends disagree at hops={hops}, timing={label}")
            print(f"{hops:>4} {label:>18} {1e3 * t_py:>10.2f} {1e3 * t_cy:>10.2f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
