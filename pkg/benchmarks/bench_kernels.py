"""Time the numba kernels against their numpy twins on representative sizes.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--order 32]

Prints one line per kernel with the best-of-``repeat`` wall time of each
backend and the speedup, after checking that both return the same numbers.
The first numba call (compilation or cache load) is excluded.
"""

import argparse
from timeit import default_timer as timer

import numpy as np

from rrhplace.kernels import available_backends
from rrhplace.model import NetworkParams


def best_time(fn, args, repeat):
    fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = timer()
        fn(*args)
        best = min(best, timer() - t0)
    return best


def cases(order, rng):
    p = NetworkParams()
    nodes = rng.uniform(0.0, 1000.0, (order * order, 2))
    w = np.full(len(nodes), 1.0 / len(nodes))
    rrh = rng.uniform(0.0, 1000.0, (p.N, 2))
    src = rng.uniform(-1000.0, 2000.0, ((p.Q - 1) * p.N, 2))
    coeffs = rng.uniform(0.1, 2.0, len(src))
    ginv = rng.uniform(1e8, 1e12, len(nodes))
    a = rng.uniform(0.0, 20.0, 20_000)
    b = rng.uniform(0.0, 25.0, 20_000)
    h = (rng.standard_normal((2000, p.N * p.M, p.K))
         + 1j * rng.standard_normal((2000, p.N * p.M, p.K))) / np.sqrt(2.0)
    return [
        ("log_i0", (rng.uniform(0.0, 700.0, 100_000),)),
        ("marcum_q1", (a, b)),
        ("ici_coefficients", (nodes, w, rrh, float(p.M), float(p.K), p.d0, p.alpha)),
        ("interference_field", (nodes, src, coeffs, p.d0, p.alpha)),
        ("patch_field", (nodes, rrh, 0, ginv, w, p.d0, p.alpha, 1.0)),
        ("zf_directions", (h,)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--order", type=int, default=32, help="quadrature points per axis")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = available_backends()
    if "numba" not in backends:
        print("numba is not importable; nothing to compare")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<20}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, fargs in cases(args.order, rng):
        f_np = getattr(backends["numpy"], name)
        f_nb = getattr(backends["numba"], name)
        out_np, out_nb = f_np(*fargs), f_nb(*fargs)
        for x, y in zip(np.atleast_1d(out_np) if not isinstance(out_np, tuple) else out_np,
                        np.atleast_1d(out_nb) if not isinstance(out_nb, tuple) else out_nb):
            np.testing.assert_allclose(y, x, rtol=1e-9, atol=1e-12)
        t_np = best_time(f_np, fargs, args.repeat)
        t_nb = best_time(f_nb, fargs, args.repeat)
        print(f"{name:<20}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
