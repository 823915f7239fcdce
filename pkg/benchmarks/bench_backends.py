"""Compare the compiled kernels with the pure-Python fallback.

Run from the repository root after building the extension:

    python3 benchmarks/bench_backends.py [--quick]

Each row reports the median time per call of both backends and the speed-up.
The two backends are also checked for identical outputs on the benchmark
inputs.
"""

from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from dualcbf import _kernels, _pykernels, apply_filter, load_scenario
from dualcbf.grid import SdfSample
from dualcbf.verification import random_dual_instances

try:
    from dualcbf import _core
except ImportError:  # pragma: no cover
    _core = None


def _median_time(fn, number: int, repeat: int = 5) -> float:
    return float(np.median(timeit.repeat(fn, number=number, repeat=repeat))) / number


def _cases(quick: bool):
    rng = np.random.default_rng(0)
    size = 100 if quick else 200
    feature = np.ascontiguousarray((rng.random((size, size)) < 0.05).astype(np.uint8))
    yield f"edt_sq {size}x{size}", lambda k: k.edt_sq(feature), 3 if quick else 5

    scen = load_scenario("rooms")
    truth = scen.world.truth.cells
    angles = np.linspace(0.0, 2.0 * math.pi, 180, endpoint=False)
    gx, gy = scen.start / scen.world.truth.resolution + 0.5

    def cast(k):
        belief = np.full(truth.shape, -1, dtype=np.int8)
        return k.raycast(truth, belief, gx, gy, 30.0, angles), belief.tobytes()
    yield "raycast 180 rays, 3 m", cast, 20

    inst = random_dual_instances(200, seed=1)
    args = [(inst.u_des[i, 0], inst.u_des[i, 1], inst.g1[i, 0], inst.g1[i, 1], inst.b1[i],
             inst.g2[i, 0], inst.g2[i, 1], inst.b2[i], 1e-6) for i in range(len(inst))]
    yield "project_pair x200", lambda k: [k.project_pair(*a) for a in args], 20

    soft = [(0.1, 0.0, 1.0, 0.0, 0.8, -1.0, 0.0, 0.4, 1e-6, 5.0, 20),
            (0.0, 0.0, 1.0, 0.0, 1.0, -1.0, 0.0, 1.0, 1e-6, 10.0, 20)] * 50
    yield "soft_pair x100", lambda k: [k.soft_pair(*a) for a in soft], 20

    g = rng.normal(size=(200, 2))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    samples = [(inst.u_des[i] * 0.2, SdfSample(float(rng.uniform(0, 1.5)), g[i], False, 1.0),
                SdfSample(float(rng.uniform(0, 1.5)), -g[i], False, 1.0), float(rng.uniform()))
               for i in range(200)]

    def filt(k):
        saved = _kernels.project_pair, _kernels.soft_pair
        _kernels.project_pair, _kernels.soft_pair = k.project_pair, k.soft_pair
        try:
            return [apply_filter(u, o, f, r).u_safe.tobytes() for u, o, f, r in samples]
        finally:
            _kernels.project_pair, _kernels.soft_pair = saved
    yield "apply_filter x200", filt, 10


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true", help="smaller inputs and fewer repeats")
    args = parser.parse_args()
    if _core is None:
        print("compiled extension not built; only the fallback is available")
        return
    print(f"{'kernel':<24} {'compiled':>12} {'python':>12} {'speed-up':>9}  outputs")
    for name, fn, number in _cases(args.quick):
        same = _same(fn(_core), fn(_pykernels))
        tc = _median_time(lambda: fn(_core), number)
        tp = _median_time(lambda: fn(_pykernels), max(1, number // 5))
        print(f"{name:<24} {tc * 1e6:>10.1f}us {tp * 1e6:>10.1f}us {tp / tc:>8.1f}x  "
              f"{'identical' if same else 'DIFFER'}")


def _same(a, b) -> bool:
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return a == b


if __name__ == "__main__":
    main()
