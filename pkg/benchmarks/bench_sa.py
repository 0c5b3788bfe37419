"""Time the compiled and pure-Python annealing kernels on the n=8 demo QUBO.

    python benchmarks/bench_sa.py [--sweeps 200] [--reads 8]

Both backends must return identical reads; the script checks that too.
"""

import argparse
import time

import numpy as np

from bnqubo._core import BACKENDS
from bnqubo.anneal import auto_schedule, sa_reads, solve_exhaustive
from bnqubo.cli import demo_dataset
from bnqubo.data import Dataset
from bnqubo.qubo import assemble
from bnqubo.score import score_table


def timed(fn, repeat=1):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sweeps", type=int, default=200)
    ap.add_argument("--reads", type=int, default=8)
    args = ap.parse_args()

    ds, _ = demo_dataset()
    q = assemble(score_table(ds, 3), 3)
    sched = auto_schedule(q, args.sweeps)
    print(f"QUBO: {q.size} variables, {q.n_terms()} terms; {args.sweeps} sweeps x {args.reads} reads")

    reads = {}
    times = {}
    for name in sorted(BACKENDS):
        times[name], reads[name] = timed(lambda: sa_reads(q, sched, args.reads, seed=0, backend=name))
        per = times[name] / (args.reads * args.sweeps * q.size)
        print(f"  anneal  {name:9s} {times[name]:8.3f} s   {1e9 * per:8.1f} ns per spin update")
    if len(times) == 2:
        print(f"  anneal speedup: {times['python'] / times['compiled']:.0f}x")
        print(f"  identical reads: {np.array_equal(reads['python'], reads['compiled'])}")

    small = assemble(score_table(Dataset(ds.names[:4], ds.cardinalities[:4], ds.rows[:, :4]), 1), 1)
    for name in sorted(BACKENDS):
        t, ss = timed(lambda: solve_exhaustive(small, 1, backend=name))
        print(f"  exhaustive {small.size}-bit {name:9s} {t:8.3f} s   ground energy {ss.energies[0]:.6f}")


if __name__ == "__main__":
    main()
