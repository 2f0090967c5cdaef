"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--users 10]

Each kernel is called once before timing so that numba compilation is
excluded.  Results of the two backends are also compared.
"""

import argparse
import time

import numpy as np

from wpcn import fd_perfect, kernels
from wpcn._backend import numba_available, set_backend
from wpcn.experiments import ScenarioConfig, draw_channels


def best_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(users, rng):
    c = rng.uniform(-0.5, 5.0, 100_000)
    a = rng.uniform(0.0, 2.0, c.size)
    c = np.maximum(c, -a + 1e-3)
    alpha = rng.exponential(size=users) * 0.02
    w = np.ones(users)
    line = np.linspace(0.0, 1.0, 41)
    cfg = ScenarioConfig(num_users=users, p_avg=100.0, p_peak=200.0)
    ch = draw_channels(cfg, 0)
    params = cfg.system_params(perfect_sic=True)
    return {
        "invert (1e5 roots)": lambda impl: impl.invert(c, a),
        f"fd_profile (K={users})": lambda impl: impl.fd_profile(0.3, 2e-3, alpha, w, 100.0, 200.0),
        "fd2_grid (41^4 lattice)": lambda impl: impl.fd2_grid(alpha[:2], w[:2], 100.0, 200.0,
                                                               line, line, line, line),
        f"fd_perfect.solve (K={users})": lambda impl: fd_perfect.solve(params, ch),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--users", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    backends = ["numba", "numpy"] if numba_available() else ["numpy"]
    rng = np.random.default_rng(args.seed)
    table = cases(args.users, rng)
    print(f"{'kernel':28s}" + "".join(f"{b:>12s}" for b in backends) + "     speedup  max|diff|")
    for name, fn in table.items():
        times, outs = [], []
        for b in backends:
            impl = kernels.implementation(b)
            set_backend(b)
            times.append(best_time(lambda: fn(impl), args.repeat))
            outs.append(fn(impl))
        line = f"{name:28s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(backends) == 2:
            a, b = outs
            if hasattr(a, "wsr"):
                diff = abs(a.wsr - b.wsr)
            else:
                diff = max(float(np.nanmax(np.abs(np.asarray(x) - np.asarray(y))))
                           for x, y in zip(np.atleast_1d(a) if not isinstance(a, tuple) else a,
                                           np.atleast_1d(b) if not isinstance(b, tuple) else b))
            line += f"  {times[1] / times[0]:9.1f}x  {diff:.2e}"
        print(line)


if __name__ == "__main__":
    main()
