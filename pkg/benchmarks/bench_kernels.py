"""Time the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat R]``.  Results are
checked for agreement before timing.
"""

import argparse
import timeit

import numpy as np

from mwhittaker import _pykernels

try:
    from mwhittaker import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(gen):
    B, N, T = 2000, 4, 50
    M = N * (N + 1) // 2
    x0 = gen.gamma(2.0, size=(B, M))
    ws = 1.0 / gen.gamma(1.5, size=(T, B, M))
    v = gen.gamma(1.3, size=(B, T, N))
    F, S = N * (N - 1) // 2, 20
    u = gen.normal(size=(B, F))
    lz = gen.normal(size=(B, N))
    beta = np.linspace(0.3, 1.5, N)
    sigma = np.full((B, F), 0.7)
    normals = gen.normal(size=(S, F, B))
    uniforms = gen.uniform(size=(S, F, B))
    return {
        "tri_run_d1": lambda m: m.tri_run_d1(x0, ws),
        "polymer_dp_d1": lambda m: m.polymer_dp_d1(v),
        "strict_weak_dp_d1": lambda m: m.strict_weak_dp_d1(v),
        "sigma_sweeps_d1": lambda m: (m.sigma_sweeps_d1(uc := u.copy(), lz, beta, sigma, normals, uniforms), uc)[1],
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels unavailable; nothing to compare")
        return
    print(f"{'kernel':<20}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for name, fn in cases(np.random.default_rng(0)).items():
        assert np.allclose(np.asarray(fn(_pykernels)), np.asarray(fn(_ckernels)), rtol=1e-10), name
        tp = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        tc = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<20}{tp:>14.2f}{tc:>14.2f}{tp / tc:>10.1f}")


if __name__ == "__main__":
    main()
