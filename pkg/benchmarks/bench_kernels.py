"""Compare compiled and numpy kernels: ``python3 benchmarks/bench_kernels.py``."""
import argparse
import timeit

import numpy as np

from ddsde_avg import _pykernels

try:
    from ddsde_avg import _ckernels
except ImportError:
    _ckernels = None


def _cases(n_particles, d):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((n_particles, d))
    w = np.full(n_particles, 1.0 / n_particles)

    def normals(mod):
        keys = mod.stream_keys(1, 0, [0], n_particles)[0]
        return lambda: mod.normals(keys, 17, d)

    def power(mod):
        return lambda: mod.power_kernel_sum(x, x, w, 1.5, 0.01)

    def step(mod):
        keys = mod.stream_keys(1, 0, [0], n_particles)[0]
        state = x.copy()

        def run():
            drift, _ = mod.power_kernel_sum(state, state, w, 1.5, 0.01)
            return state + 0.01 * drift + 0.1 * mod.normals(keys, 3, d)

        return run

    return {"normals": normals, "power_kernel_sum": power, "coupled_step": step}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--particles", type=int, default=1000)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"N={args.particles} d={args.dim}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'compiled [ms]':>15}{'speedup':>10}")
    for name, make in _cases(args.particles, args.dim).items():
        n = 5
        t_py = min(timeit.repeat(make(_pykernels), number=n, repeat=args.repeat)) / n * 1e3
        if _ckernels is None:
            print(f"{name:<18}{t_py:>12.3f}{'n/a':>15}")
            continue
        t_c = min(timeit.repeat(make(_ckernels), number=n, repeat=args.repeat)) / n * 1e3
        print(f"{name:<18}{t_py:>12.3f}{t_c:>15.3f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
