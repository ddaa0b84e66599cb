"""Time the compiled and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from ricci_deturck import kernels, make_grid
from ricci_deturck.grid import pad
from ricci_deturck.initial import metric

CASES = [(2, 64), (2, 128), (3, 24), (3, 32)]


def bench(fn, repeat):
    fn()  # warm up
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    names = kernels.available()
    prev = kernels.backend()
    print(f"backends: {', '.join(names)}")
    print(f"{'kernel':<12}{'case':<10}" + "".join(f"{n:>14}" for n in names) + f"{'speedup':>10}")
    try:
        for dim, N in CASES:
            gr = make_grid(dim, N, 2 * np.pi / N)
            g = metric("sinusoid", gr, 0.1, 0)
            P = pad(g, gr)
            mats = g.reshape(-1, dim, dim)
            rows = {"hflow_rhs": lambda: kernels.hflow_rhs(P, gr.spacing),
                    "sym_eigvals": lambda: kernels.sym_eigvals(mats)}
            for kname, fn in rows.items():
                times = {}
                for n in names:
                    kernels.use_backend(n)
                    times[n] = bench(fn, args.repeat)
                speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
                cells = "".join(f"{times[n] * 1e3:>12.2f}ms" for n in names)
                print(f"{kname:<12}{f'{dim}d {N}':<10}{cells}{speed:>9.1f}x")
    finally:
        kernels.use_backend(prev)


if __name__ == "__main__":
    main()
