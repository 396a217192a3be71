"""Compare the compiled and pure-Python encoder kernels on a rig campaign.

Usage: python benchmarks/bench_kernels.py [--cycles N] [--repeat R]
"""
import argparse
import time

import numpy as np

from servorig import _pykernels
from servorig.reference import FLIGHT_SCHEDULE
from servorig.testbed import WearModel, achieved_angles

try:
    from servorig import _ckernels
except ImportError:
    _ckernels = None


def bench(fn, commanded, achieved, quantum, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(commanded, achieved, quantum)
        best = min(best, time.perf_counter() - t0)
    return best, np.asarray(out[0])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cycles", type=int, default=39_300)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cycles = np.arange(args.cycles)
    schedule = np.asarray(FLIGHT_SCHEDULE)
    commanded = schedule[cycles % len(schedule)]
    achieved = achieved_angles(WearModel(seed=1), commanded, cycles)
    quantum = 360.0 / 2048

    t_py, c_py = bench(_pykernels.campaign, commanded, achieved, quantum, args.repeat)
    print(f"python  : {t_py:8.3f} s  ({args.cycles / t_py:,.0f} commands/s)")
    if _ckernels is None:
        print("cython  : extension not built")
        return
    t_c, c_c = bench(_ckernels.campaign, commanded, achieved, quantum, args.repeat)
    print(f"cython  : {t_c:8.3f} s  ({args.cycles / t_c:,.0f} commands/s)")
    print(f"speedup : {t_py / t_c:8.1f}x   identical counts: {np.array_equal(c_py, c_c)}")


if __name__ == "__main__":
    main()
