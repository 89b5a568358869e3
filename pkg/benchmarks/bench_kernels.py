"""Compiled kernels vs the numpy fallback on the hot loops.

    python3 benchmarks/bench_kernels.py [--sizes 32 64 128] [--repeat 3]
"""

import argparse
import time

from sptmipt import _backend
from sptmipt.circuits import CircuitConfig, Probes, make_rng, run_block, run_trajectory, sample_phase, _pool_tables
from sptmipt.clifford import StabilizerState, clipped_endpoints
from sptmipt.percolation import PercolationState, run_percolation


def best_of(f, repeat):
    ts = []
    for _ in range(repeat):
        t = time.perf_counter()
        f()
        ts.append(time.perf_counter() - t)
    return min(ts)


def cases(n):
    c = CircuitConfig(N=n, p_s=0.4, p_u=0.3)
    cp = CircuitConfig(N=n, p_s=0.5, p_u=0.0)
    block = sample_phase(c, make_rng(1), 4)
    pblock = sample_phase(cp, make_rng(2), 2 * n)
    tables = _pool_tables(c, None)
    warm = run_block(StabilizerState.zero(n), sample_phase(c, make_rng(3), n), c, tables)
    return {
        f"run_events   ({len(block)} events)": lambda: run_block(StabilizerState.zero(n), block, c, tables),
        "clip_endpoints": lambda: clipped_endpoints(warm),
        f"perc_run     ({len(pblock)} events)": lambda: run_percolation(PercolationState.fresh(n), pblock),
        "trajectory   (p_u=0.3, t=N)": lambda: run_trajectory(
            CircuitConfig(N=n, p_s=0.4, p_u=0.3, t_equil=n), 0, probes=Probes((n,), ("S_half",))),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    before = _backend.name()
    try:
        _backend.use("compiled")
    except ImportError:
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation`")
    print(f"{'N':>5}  {'kernel':<34} {'python s':>10} {'compiled s':>11} {'speedup':>8}")
    try:
        for n in args.sizes:
            for name, f in cases(n).items():
                res = {}
                for b in ("python", "compiled"):
                    _backend.use(b)
                    f()
                    res[b] = best_of(f, args.repeat)
                print(f"{n:>5}  {name:<34} {res['python']:>10.4f} {res['compiled']:>11.5f} "
                      f"{res['python'] / res['compiled']:>7.1f}x")
    finally:
        _backend.use(before)


if __name__ == "__main__":
    main()
