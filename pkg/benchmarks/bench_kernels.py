"""Time the compiled and numpy kernels on the same inputs.

Usage: ``python benchmarks/bench_kernels.py [--sizes 81 161 321] [--repeat 5]``

Prints one row per (kernel, grid size) with the best wall time of each
backend and the speedup of the compiled one.
"""
import argparse
import timeit

import numpy as np

from pflow._kernels import available_backends, get_backend

KERNELS = {
    "operator": lambda k, u, h: k.operator_interior(u, h, 3.0, 1e-2),
    "relax_sweep": lambda k, u, h: k.relax_sweep(u, h, 3.0, 1e-2, 1.5),
    "relax_residual": lambda k, u, h: k.relax_residual(u, h, 3.0, 1e-2),
}


def best_time(fn, u, h, repeat):
    # relax_sweep updates in place, so each call gets a fresh copy
    def call():
        fn(u.copy(), h)

    number = max(1, int(0.2 / max(timeit.timeit(call, number=1), 1e-6)))
    return min(timeit.repeat(call, number=number, repeat=repeat)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[81, 161, 321])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = available_backends()
    rng = np.random.default_rng(0)
    header = f"{'kernel':<15}{'nodes':>9}" + "".join(f"{b + ' [ms]':>15}" for b in backends)
    if "cython" in backends:
        header += f"{'speedup':>10}"
    print(header)
    for name, kernel in KERNELS.items():
        for n in args.sizes:
            u = rng.standard_normal((n, n))
            h = (1.0 / (n - 1),) * 2
            times = {b: best_time(lambda v, hh: kernel(get_backend(b), v, hh), u, h, args.repeat) for b in backends}
            row = f"{name:<15}{n * n:>9}" + "".join(f"{1e3 * times[b]:>15.3f}" for b in backends)
            if "cython" in backends:
                row += f"{times['python'] / times['cython']:>10.1f}"
            print(row)


if __name__ == "__main__":
    main()
