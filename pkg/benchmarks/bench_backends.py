"""Compare the compiled kernel with the pure-Python fallback.

    python benchmarks/bench_backends.py [--phvs N] [--repeat R] [--shapes a,b,...]

Both backends run the same lowered, optimized pipeline on identical traffic;
their traces must agree before any timing is printed.
"""

import argparse
import sys

from rmtsim.bench import bench_backends
from rmtsim.fixtures import BENCH_SHAPES, load_fixture
from rmtsim.kernel import available_backends


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--phvs", type=int, default=5000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--shapes", default=",".join(sorted(BENCH_SHAPES)))
    args = parser.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; run `python setup.py build_ext --inplace`", file=sys.stderr)
        return 2
    print(f"{'pipeline':16} {'python ms':>10} {'cython ms':>10} {'ratio':>8}")
    for name in args.shapes.split(","):
        times = bench_backends(load_fixture(name), ["python", "cython"], args.phvs, args.repeat)
        py, cy = times["python"] * 1000, times["cython"] * 1000
        print(f"{name:16} {py:10.2f} {cy:10.2f} {py / cy:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
