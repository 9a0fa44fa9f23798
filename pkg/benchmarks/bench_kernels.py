"""Compare the compiled and NumPy kernels on the workloads the package runs most.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends are timed on the same inputs and checked to agree.
"""

import argparse
import time

import numpy as np

from beamloc import _pykernels
from beamloc.distributions import poisson_logpmf
from beamloc.estimators import EstimationContext, _log_tables
from beamloc.geometry import ScanGeometry, mixing_weights
from beamloc.sim import BeamConfig, EdgeSample, simulate_trm

try:
    from beamloc import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def workloads():
    geom = ScanGeometry(100)
    ctx = EstimationContext(1.0, 10.0, 1.0, 200.0, geom)
    scan = simulate_trm(EdgeSample(1.0, 10.0, 50.2), BeamConfig(1.0, 200.0), geom, 0)
    offsets, xs, cnt, lp1, lp2 = _log_tables(scan, ctx)
    gammas = ctx.gamma_grid
    m = scan.mtilde
    ysum = scan.ysum.astype(float)
    yield "mixture_profile (9501 gammas)", lambda k: k.mixture_profile(
        gammas, m, offsets, xs, cnt, lp1, lp2, 1.0, 10.0, 200.0, 1.0)
    yield "convolution_profile (9501 gammas)", lambda k: k.convolution_profile(
        gammas, m, ysum, 1.0, 10.0, 200.0, 1.0)

    g = np.linspace(50.0, 51.0, 100)
    w1, w2 = mixing_weights(g[:, None], np.arange(45, 57)[None, :], 0.33)
    xs_fi = np.arange(1, 60, dtype=float)
    yield "trm_series (1200 weights)", lambda k: k.trm_series(
        w1.ravel(), w2.ravel(), poisson_logpmf(xs_fi, 1.0), poisson_logpmf(xs_fi, 10.0))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels are not built; nothing to compare")
        return 1
    print(f"{'kernel':36s} {'python':>10s} {'cython':>10s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, fn in workloads():
        tp, outp = _time(lambda: fn(_pykernels), args.repeat)
        tc, outc = _time(lambda: fn(_ckernels), args.repeat)
        outp, outc = np.asarray(outp), np.asarray(outc)
        rel = np.max(np.abs(outp - outc) / np.maximum(np.abs(outp), 1e-300))
        print(f"{name:36s} {tp * 1e3:8.2f}ms {tc * 1e3:8.2f}ms {tp / tc:7.1f}x {rel:13.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
