"""Monte Carlo sweeps comparing the three edge estimators against the CRB.

Each (swept value, trial) cell draws its data from its own random stream,
keyed by ``(master_seed, value index, trial index, location)``, so results do
not depend on the number of workers or the order in which cells finish.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import EstimatorFailure, InvalidParameter
from .estimators import METHODS, EstimationContext, interpolation_edge, mle_edge, mmle_edge
from .fisher import fi_scan_gamma
from .geometry import ScanGeometry
from .sim import BeamConfig, EdgeSample, realize
from .streams import RandomStreams

SWEEPABLE = ("lambda", "sigma_b", "eta2", "gamma")

CSV_COLUMNS = (
    "swept_value",
    "estimator",
    "bias",
    "bias_se",
    "std",
    "std_lo",
    "std_hi",
    "rmse",
    "rmse_lo",
    "rmse_hi",
    "sqrt_crb",
    "n_failures",
)


@dataclass(frozen=True)
class SweepSpec:
    """One-parameter sweep around a base configuration."""

    sample: EdgeSample
    beam: BeamConfig
    geom: ScanGeometry
    swept_parameter: str
    values: tuple
    n_trials: int = 300
    master_seed: int = 0
    grid_step: float = 0.01
    gamma_bounds: tuple | None = None

    def __post_init__(self):
        if self.swept_parameter not in SWEEPABLE:
            raise InvalidParameter(f"swept_parameter must be one of {SWEEPABLE}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise InvalidParameter("sweep values must be nonempty")
        d = np.diff(vals)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise InvalidParameter("sweep values must be strictly monotone")
        object.__setattr__(self, "values", vals)
        if int(self.n_trials) != self.n_trials or self.n_trials < 2:
            raise InvalidParameter("n_trials must be an integer >= 2")
        if int(self.master_seed) != self.master_seed or self.master_seed < 0:
            raise InvalidParameter("master_seed must be a nonnegative integer")
        # build every cell once so invalid values fail before any simulation
        for i in range(len(vals)):
            self.context(i)

    def cell(self, i: int):
        """``(sample, beam)`` with the swept parameter set to ``values[i]``."""
        v = self.values[i]
        sample, beam = self.sample, self.beam
        if self.swept_parameter == "lambda":
            beam = replace(beam, lam=v)
        elif self.swept_parameter == "sigma_b":
            beam = replace(beam, sigma_b=v)
        elif self.swept_parameter == "eta2":
            sample = replace(sample, eta2=v)
        else:
            sample = replace(sample, gamma=v)
        return sample, beam

    def context(self, i: int) -> EstimationContext:
        sample, beam = self.cell(i)
        return EstimationContext(
            sample.eta1, sample.eta2, beam.sigma_b, beam.lam, self.geom, self.grid_step, self.gamma_bounds
        )

    def to_dict(self) -> dict:
        return {
            "sample": asdict(self.sample),
            "beam": {"sigma_b": self.beam.sigma_b, "lambda": self.beam.lam},
            "length": self.geom.length,
            "swept_parameter": self.swept_parameter,
            "values": list(self.values),
            "n_trials": self.n_trials,
            "master_seed": self.master_seed,
            "grid_step": self.grid_step,
            "gamma_bounds": list(self.context(0).gamma_bounds),
        }


@dataclass(frozen=True)
class EstimatorStats:
    value: float
    estimator: str
    bias: float
    bias_se: float
    std: float
    std_interval: tuple
    rmse: float
    rmse_interval: tuple
    n_used: int
    n_failures: int


@dataclass(frozen=True)
class McReport:
    spec: SweepSpec
    rows: tuple
    sqrt_crb: tuple
    errors: dict = field(repr=False, default_factory=dict)

    def row(self, value_index: int, estimator: str) -> EstimatorStats:
        for r in self.rows:
            if r.estimator == estimator and r.value == self.spec.values[value_index]:
                return r
        raise KeyError((value_index, estimator))

    def column(self, estimator: str, attr: str) -> np.ndarray:
        return np.array([getattr(self.row(i, estimator), attr) for i in range(len(self.spec.values))])


def summarize(errors, value: float = math.nan, estimator: str = "") -> EstimatorStats:
    """Moments of the estimation errors; NaN entries are failures and are excluded.

    bias is the mean error with its standard error, std uses divisor n-1, and
    rmse is ``sqrt(mean e^2)``. The std and rmse intervals are square roots of
    the +-1 sd endpoints of the sample variance and sample MSE; the variance
    of the sample variance uses ``(mu4 - s^4 (n-3)/(n-1)) / n``.
    """
    e = np.asarray(errors, dtype=float)
    ok = e[np.isfinite(e)]
    n, fails = ok.size, int(e.size - ok.size)
    nan = math.nan
    if n < 2:
        m = float(ok.mean()) if n else nan
        r = float(np.sqrt(np.mean(ok**2))) if n else nan
        return EstimatorStats(value, estimator, m, nan, nan, (nan, nan), r, (nan, nan), n, fails)
    bias = float(ok.mean())
    s2 = float(ok.var(ddof=1))
    bias_se = math.sqrt(s2 / n)
    mu4 = float(np.mean((ok - bias) ** 4))
    var_s2 = max((mu4 - s2 * s2 * (n - 3) / (n - 1)) / n, 0.0)
    sd_s2 = math.sqrt(var_s2)
    sq = ok**2
    mse = float(sq.mean())
    sd_mse = float(sq.std(ddof=1)) / math.sqrt(n)
    return EstimatorStats(
        value=value,
        estimator=estimator,
        bias=bias,
        bias_se=bias_se,
        std=math.sqrt(s2),
        std_interval=(math.sqrt(max(s2 - sd_s2, 0.0)), math.sqrt(s2 + sd_s2)),
        rmse=math.sqrt(mse),
        rmse_interval=(math.sqrt(max(mse - sd_mse, 0.0)), math.sqrt(mse + sd_mse)),
        n_used=n,
        n_failures=fails,
    )


_ESTIMATE = {
    "interpolation": lambda r, ctx: interpolation_edge(r.conventional(), ctx),
    "mmle": lambda r, ctx: mmle_edge(r.trm(), ctx),
    "mle": lambda r, ctx: mle_edge(r.trm(), ctx),
}


def run_trial(spec: SweepSpec, value_index: int, trial: int) -> np.ndarray:
    """Errors ``gamma_hat - gamma`` of each estimator (in METHODS order); NaN on failure."""
    sample, beam = spec.cell(value_index)
    ctx = spec.context(value_index)
    streams = RandomStreams(spec.master_seed, (value_index, trial))
    r = realize(sample, beam, spec.geom, streams)
    out = np.empty(len(METHODS))
    for j, m in enumerate(METHODS):
        try:
            out[j] = _ESTIMATE[m](r, ctx).gamma_hat - sample.gamma
        except EstimatorFailure:
            out[j] = math.nan
    return out


def _run_block(args):
    spec, value_index, trials = args
    return np.array([run_trial(spec, value_index, t) for t in trials])


def _blocks(spec: SweepSpec, size: int):
    for i in range(len(spec.values)):
        for t0 in range(0, spec.n_trials, size):
            yield spec, i, range(t0, min(t0 + size, spec.n_trials))


def default_threads() -> int:
    v = os.environ.get("BEAMLOC_THREADS")
    if v is None:
        return 1
    try:
        n = int(v)
    except ValueError as exc:
        raise InvalidParameter(f"BEAMLOC_THREADS must be an integer, got {v!r}") from exc
    if n < 1:
        raise InvalidParameter("BEAMLOC_THREADS must be >= 1")
    return n


def simulate_errors(spec: SweepSpec, threads: int | None = None, block: int = 25) -> np.ndarray:
    """Error array of shape ``(n_values, n_trials, n_methods)``."""
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise InvalidParameter("threads must be >= 1")
    jobs = list(_blocks(spec, block))
    if threads == 1:
        parts = [_run_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_block, jobs))  # map keeps submission order
    return np.concatenate(parts).reshape(len(spec.values), spec.n_trials, len(METHODS))


def crb_curve(spec: SweepSpec):
    """``[(value, 1 / sqrt(I_scan(gamma)))]`` for each swept value."""
    out = []
    for i, v in enumerate(spec.values):
        sample, beam = spec.cell(i)
        fi = fi_scan_gamma(sample.gamma, spec.geom, sample.eta1, sample.eta2, beam.lam, beam.sigma_b)
        out.append((v, 1.0 / math.sqrt(fi.value) if fi.value > 0 else math.inf))
    return out


def run_sweep(spec: SweepSpec, threads: int | None = None) -> McReport:
    """Simulate, estimate with every method, and summarise per swept value."""
    err = simulate_errors(spec, threads)
    crb = crb_curve(spec)
    rows = []
    for i, v in enumerate(spec.values):
        for j, m in enumerate(METHODS):
            rows.append(summarize(err[i, :, j], v, m))
    return McReport(
        spec=spec,
        rows=tuple(rows),
        sqrt_crb=tuple(c for _, c in crb),
        errors={m: err[:, :, j] for j, m in enumerate(METHODS)},
    )


def report_csv(report: McReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    crb = dict(zip(report.spec.values, report.sqrt_crb))
    for r in report.rows:
        w.writerow([
            repr(r.value), r.estimator,
            repr(r.bias), repr(r.bias_se),
            repr(r.std), repr(r.std_interval[0]), repr(r.std_interval[1]),
            repr(r.rmse), repr(r.rmse_interval[0]), repr(r.rmse_interval[1]),
            repr(crb[r.value]), r.n_failures,
        ])
    return buf.getvalue()


def write_report(report: McReport, path) -> str:
    """Write the CSV to `path` and the spec to ``<path>.json``; return the sidecar path."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(report_csv(report))
    sidecar = f"{path}.json"
    meta = {"spec": report.spec.to_dict(), "methods": list(METHODS), "n_failures": {
        m: int(np.isnan(e).sum()) for m, e in report.errors.items()}}
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar


# --- preset sweeps ---------------------------------------------------------------

_FIG7_SIGMAS = (0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.6, 0.8, 1.0, 1.5, 2.0, 3.0)


def preset(name: str, n_trials: int = 300, master_seed: int = 0) -> SweepSpec:
    """Sweep definitions: ``fig7a`` dose, ``fig7b``/``fig7c`` beam width, ``fig7d`` yield."""
    geom = ScanGeometry(100)
    if name == "fig7a":
        sample, beam, par = EdgeSample(1, 10, 50.2), BeamConfig(1.0, 200), "lambda"
        values = tuple(np.linspace(20, 290, 8))
    elif name in ("fig7b", "fig7c"):
        gamma = 50.2 if name == "fig7b" else 50.5
        sample, beam, par = EdgeSample(1, 10, gamma), BeamConfig(1.0, 200), "sigma_b"
        values = _FIG7_SIGMAS
    elif name == "fig7d":
        sample, beam, par = EdgeSample(1, 10, 50.2), BeamConfig(1.0, 200), "eta2"
        values = tuple(float(v) for v in range(2, 21, 2))
    else:
        raise InvalidParameter(f"unknown preset {name!r}; choose fig7a, fig7b, fig7c or fig7d")
    return SweepSpec(sample, beam, geom, par, values, n_trials, master_seed)


PRESETS = ("fig7a", "fig7b", "fig7c", "fig7d")
