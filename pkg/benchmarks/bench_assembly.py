"""Compare the compiled and NumPy boundary-element assembly backends.

Run with ``python3 benchmarks/bench_assembly.py [--sizes 0.25 0.125 0.0625]``.
Prints wall time per backend and the largest relative difference between
the two operator sets for each mesh size.
"""

import argparse
import time

import numpy as np

from hsse import _backend
from hsse.bem import Box, assemble_operators, build_contact_mesh
from hsse.kernels import Material


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--sizes", type=float, nargs="+", default=[0.25, 0.125, 0.0625])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--flavor", default="Direct", choices=["Direct", "Indirect"])
    args = parser.parse_args(argv)

    if _backend.compiled_backend is None:
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation`")
    mat = Material()
    omega = np.pi
    print(f"{'h':>8} {'elements':>9} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8} {'max rel diff':>13}")
    for h in args.sizes:
        mesh = build_contact_mesh(Box(2.0, 2.5), h, 7.0)
        t_py, ops_py = _time(lambda: assemble_operators(
            mesh, omega, mat, args.flavor, backend=_backend.python_backend), args.repeat)
        t_c, ops_c = _time(lambda: assemble_operators(
            mesh, omega, mat, args.flavor, backend=_backend.compiled_backend), args.repeat)
        diff = max(np.abs(ops_py.g - ops_c.g).max() / np.abs(ops_py.g).max(),
                   np.abs(ops_py.h - ops_c.h).max() / np.abs(ops_py.h).max())
        print(f"{h:8.4f} {len(mesh):9d} {t_py:11.3f} {t_c:13.3f} {t_py / t_c:8.2f} {diff:13.2e}")


if __name__ == "__main__":
    main()
