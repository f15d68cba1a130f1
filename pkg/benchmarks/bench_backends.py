"""Compare the compiled hot kernels against the pure-numpy fallback.

Times the two backend kernels (flow blend, reintegration advection) in
isolation and a full 12-kernel update step routed through each backend.

Usage: python benchmarks/bench_backends.py [--size 128] [--steps 200]
"""

import argparse
import time

import numpy as np

from flowlenia import _kernels_py, sim

try:
    from flowlenia import _kernels as _kernels_ext
except ImportError:
    _kernels_ext = None


def timeit(fn, repeats):
    fn()
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def random_rule(rng, channels=3):
    kernels = []
    for _ in range(12):
        rings = tuple(
            sim.Ring(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.01, 0.5))
            for _ in range(3)
        )
        kernels.append(
            sim.KernelSpec(
                r=rng.uniform(0.2, 1.0),
                h=rng.uniform(0, 1),
                mu=rng.uniform(0.05, 0.5),
                sigma=rng.uniform(0.001, 0.18),
                rings=rings,
                src=int(rng.integers(0, channels)),
                dst=int(rng.integers(0, channels)),
            )
        )
    return sim.UpdateRule(R=float(rng.uniform(2, 25)), kernels=tuple(kernels))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=128)
    parser.add_argument("--steps", type=int, default=200)
    args = parser.parse_args()

    n = args.size
    rng = np.random.default_rng(0)
    backends = [("numpy", _kernels_py)]
    if _kernels_ext is not None:
        backends.insert(0, ("cython", _kernels_ext))
    else:
        print("compiled extension not built; timing the fallback only")

    u = np.ascontiguousarray(rng.random((3, n, n)))
    a = np.ascontiguousarray(rng.random((3, n, n)))
    a_sum = np.ascontiguousarray(a.sum(axis=0))
    dx = np.ascontiguousarray(rng.uniform(-1, 1, (3, n, n)))
    dy = np.ascontiguousarray(rng.uniform(-1, 1, (3, n, n)))

    print(f"world {n}x{n}, 3 channels")
    print(f"{'kernel':<22}" + "".join(f"{name:>12}" for name, _ in backends))
    rows = [
        ("flow_chw", lambda mod: mod.flow_chw(u, a_sum, 0.2, 2.0, 2.0, 1.0)),
        ("advect_chw (dense)", lambda mod: mod.advect_chw(a, dx, dy, 0.5)),
    ]
    for label, call in rows:
        cells = []
        for _, mod in backends:
            t = timeit(lambda: call(mod), max(20, args.steps // 4))
            cells.append(f"{t * 1e6:9.0f} us")
        print(f"{label:<22}" + "".join(f"{c:>12}" for c in cells))

    rule = random_rule(rng)
    state = sim.init_state(0, n, n, 3, n // 2)
    comp = sim.CompiledRule(rule, (n, n))
    saved = sim._backend
    try:
        cells = []
        for _, mod in backends:
            sim._backend = mod
            t = timeit(lambda: sim.run(rule, state, args.steps, comp), 1) / args.steps
            cells.append(f"{t * 1e3:9.2f} ms")
        print(f"{'full step (12 kernels)':<22}" + "".join(f"{c:>12}" for c in cells))
    finally:
        sim._backend = saved

    if _kernels_ext is not None:
        out_c = _kernels_ext.advect_chw(a, dx, dy, 0.5)
        out_p = _kernels_py.advect_chw(a, dx, dy, 0.5)
        print(f"backend max abs difference (advect): {np.abs(out_c - out_p).max():.2e}")


if __name__ == "__main__":
    main()
