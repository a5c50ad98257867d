"""Compare the compiled and pure-Python expression kernels.

Times two layers on random batches with each available backend:

* ``vm:*`` rows run a single expression program (the fused V, Lie-derivative,
  output and vector-field program of the 2-D example), so they measure the
  interpreter alone;
* the other rows are end-to-end closed-loop objects (H, l, the controller and
  the closed-loop field), where the shared numpy composition code dilutes the
  difference.

    python3 bench/bench_kernels.py [--sizes 1,64,4096,65536] [--repeat 5]
"""

import argparse
import time

import numpy as np

from hiopt import backend
from hiopt.homogeneity import SphereBudget
from hiopt.synthesis import config_from_params, synthesize
from hiopt.sysdef import builtin_examples


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1,64,4096,65536")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]

    b = builtin_examples()["ex4"]
    ctrl = synthesize(b.system, b.lyapunov,
                      config_from_params(b.params, budget=SphereBudget(samples=2048)))
    kernels = {
        "vm:model": ctrl.model._prog,
        "vm:dynamics": ctrl.model._dyn,
        "H_kappa": ctrl.H_kappa,
        "l": ctrl.l,
        "alpha_star": ctrl.alpha_star,
        "f_tilde": ctrl.f_tilde,
    }
    rng = np.random.default_rng(args.seed)
    names = backend.available()
    print(f"backends: {', '.join(names)} (default {backend.active()})")
    if "compiled" not in names:
        print("compiled extension not built; only the python backend is timed")

    header = f"{'kernel':<12}{'n':>8}" + "".join(f"{n + ' [ms]':>16}" for n in names)
    if len(names) > 1:
        header += f"{'speedup':>10}"
    print(header)
    previous = backend.active()
    try:
        for kname, k in kernels.items():
            for n in sizes:
                X = rng.uniform(-3, 3, (n, 2))
                times = {}
                for name in names:
                    backend.use_backend(name)
                    k(X)  # warm up
                    times[name] = best_time(lambda: k(X), args.repeat)
                row = f"{kname:<12}{n:>8}" + "".join(f"{times[m] * 1e3:>16.3f}" for m in names)
                if len(names) > 1:
                    row += f"{times['python'] / times['compiled']:>9.1f}x"
                print(row)
    finally:
        backend.use_backend(previous)


if __name__ == "__main__":
    main()
