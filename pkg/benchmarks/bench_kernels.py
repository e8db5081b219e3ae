"""Time the compiled kernels against the numpy fallback and check they agree.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from martlab import HitAbove, Min, HitAbsBelow, simple_random_walk, stopped_law
from martlab import _core
from martlab._fallback import stream_key


def _best(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        return a == b
    return np.array_equal(np.asarray(a), np.asarray(b))


def cases():
    key = stream_key(7, 1)
    walk = simple_random_walk(2000)
    rule = Min(HitAbove(1), HitAbsBelow(0, 50))
    return [
        ("uniforms, 10^6 draws", lambda be: be.uniforms(key, 0, 1_000_000)),
        ("walk_hit_mc, 2*10^4 paths, H=1000", lambda be: be.walk_hit_mc(key, 0, 20_000, 1000, 1, 0)),
        ("floor_sum, m=10^6", lambda be: be.floor_sum(1_000_000)),
        ("lattice DP, H=2000", lambda be: stopped_law(walk, rule, exact=False, backend=name_of(be)).stopped),
    ]


def name_of(be):
    return next(k for k in _core.available() if _core.get_backend(k) is be)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "compiled" not in _core.available():
        print("compiled extension not built; only the python backend is available")
    names = _core.available()
    print(f"{'kernel':38s}" + "".join(f"{n:>12s}" for n in names) + f"{'speedup':>10s}  agree")
    for label, fn in cases():
        times, outs = [], []
        for n in names:
            t, out = _best(lambda: fn(_core.get_backend(n)), args.repeat)
            times.append(t)
            outs.append(out)
        speed = f"{times[names.index('python')] / times[0]:9.1f}x" if len(names) > 1 else f"{'-':>10s}"
        agree = all(_same(outs[0], o) for o in outs[1:])
        print(f"{label:38s}" + "".join(f"{t * 1e3:10.1f}ms" for t in times) + f"{speed}  {agree}")


if __name__ == "__main__":
    main()
