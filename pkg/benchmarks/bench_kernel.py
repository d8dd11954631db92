"""Time the compiled and pure-Python collision kernels on identical inputs.

    python benchmarks/bench_kernel.py --n 1000 10000 --reps 5
"""

import argparse
import time

import numpy as np

from fcba import _backend
from fcba.model import Exponential, InitialConfig, Side, sample_initial_config, validate_params
from fcba.rng import KeyedStream


def time_kernel(evolve, conf, seed, prm, reps):
    best = float("inf")
    out = None
    for _ in range(reps):
        t0 = time.perf_counter()
        out = evolve(conf.positions, conf.velocities, conf.keys, seed, *prm.as_tuple(), False, None)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[1000, 10_000, 100_000])
    ap.add_argument("--p", type=float, default=0.2)
    ap.add_argument("--params", type=float, nargs=4, default=[1 / 3] * 4, metavar=("A", "B", "ALPHA", "BETA"))
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--python-max-n", type=int, default=100_000, help="skip the Python kernel above this size")
    args = ap.parse_args(argv)

    prm = validate_params(*args.params)
    try:
        compiled = _backend.evolve_with("compiled")
    except ImportError:
        compiled = None
        print("compiled kernel not available; timing the Python kernel only")
    print(f"{'n':>8} {'python s':>10} {'compiled s':>11} {'speedup':>8} {'identical':>9}")
    for n in args.n:
        conf = sample_initial_config(InitialConfig(n, args.p, Side.TWO_SIDED, Exponential(), args.seed))
        seed = KeyedStream(args.seed).reaction_seed
        t_py = out_py = None
        if n <= args.python_max_n:
            t_py, out_py = time_kernel(_backend.evolve_python, conf, seed, prm, args.reps)
        t_c = out_c = None
        if compiled is not None:
            t_c, out_c = time_kernel(compiled, conf, seed, prm, args.reps)
        same = "-"
        if out_py is not None and out_c is not None:
            same = all(np.array_equal(np.asarray(out_py[k]), np.asarray(out_c[k]))
                       for k in ("death_time", "death_kind", "vel", "birth_pos", "n_slots"))
        speed = f"{t_py / t_c:8.1f}" if t_py and t_c else f"{'-':>8}"
        fmt = lambda t: f"{t:.4f}" if t is not None else "-"
        print(f"{n:>8} {fmt(t_py):>10} {fmt(t_c):>11} {speed} {str(same):>9}")


if __name__ == "__main__":
    main()
