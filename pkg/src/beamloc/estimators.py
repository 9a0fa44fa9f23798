"""Edge-location and SE-yield estimators.

Three edge estimators are provided:

* ``interpolation_edge`` thresholds the per-location yield estimates
  ``y_k / lambda`` at ``(eta1 + eta2) / 2`` and averages the upward crossings.
* ``mmle_edge`` maximises the likelihood of the time-resolved data under the
  mean-matched (convolutional) Poisson model.
* ``mle_edge`` maximises the exact zero-truncated mixture likelihood.

Both likelihood estimators use an exhaustive grid search; ties go to the
smallest grid point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import kernels
from .distributions import poisson_logpmf
from .errors import DegenerateLikelihood, InvalidParameter, NoCrossing, SeriesNotConverged
from .geometry import ScanGeometry, grid
from .sim import ConventionalScan, TRMScan

__all__ = [
    "EstimationContext",
    "EdgeEstimate",
    "eta_baseline",
    "eta_trm_poisson",
    "interpolation_edge",
    "mle_edge",
    "mmle_edge",
    "mle_loglik",
    "mmle_loglik",
]

METHODS = ("interpolation", "mmle", "mle")


@dataclass(frozen=True)
class EstimationContext:
    """Known nuisance parameters and the gamma search grid."""

    eta1: float
    eta2: float
    sigma_b: float
    lam: float
    geom: ScanGeometry
    grid_step: float = 0.01
    gamma_bounds: tuple | None = None

    def __post_init__(self):
        for name in ("eta1", "eta2", "sigma_b", "lam", "grid_step"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidParameter(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.eta1 < 0 or self.eta2 < 0:
            raise InvalidParameter("SE yields must be >= 0")
        if self.eta1 == self.eta2:
            raise InvalidParameter("eta1 == eta2: the edge is not identifiable")
        if not self.sigma_b > 0:
            raise InvalidParameter(f"sigma_b must be > 0, got {self.sigma_b}")
        if not self.lam > 0:
            raise InvalidParameter(f"lambda must be > 0, got {self.lam}")
        if not 0 < self.grid_step <= 0.5:
            raise InvalidParameter(f"grid_step must lie in (0, 0.5], got {self.grid_step}")
        last = self.geom.length - 1
        bounds = self.gamma_bounds
        if bounds is None:
            bounds = (2.0, float(last - 3)) if last >= 5 else (0.0, float(last))
        lo, hi = float(bounds[0]), float(bounds[1])
        if not 0 <= lo <= hi <= last:
            raise InvalidParameter(f"gamma_bounds must satisfy 0 <= lo <= hi <= {last}, got {bounds}")
        object.__setattr__(self, "gamma_bounds", (lo, hi))

    @property
    def gamma_grid(self) -> np.ndarray:
        return grid(self.gamma_bounds[0], self.gamma_bounds[1], self.grid_step)

    def check_scan(self, scan):
        if scan.length != self.geom.length:
            raise InvalidParameter(f"scan has {scan.length} locations, context expects {self.geom.length}")


@dataclass(frozen=True)
class EdgeEstimate:
    gamma_hat: float
    method: str
    loglik: float | None = None

    def to_json(self) -> dict:
        d = {"method": self.method, "gamma_hat": self.gamma_hat}
        if self.loglik is not None:
            d["loglik"] = self.loglik
        return d


# --- per-pixel yield estimators -----------------------------------------------


def eta_baseline(y, lam):
    """Unbiased conventional yield estimate ``y / lambda``."""
    if not lam > 0:
        raise InvalidParameter(f"lambda must be > 0, got {lam}")
    return np.asarray(y, dtype=float) / lam if np.ndim(y) else float(y) / lam


def eta_trm_poisson(y: int, mtilde: int, lam: float, tol: float = 1e-13, max_iter: int = 1_000_000) -> float:
    """Time-resolved yield MLE for Poisson SE counts.

    Solves ``eta = y / (mtilde + lambda exp(-eta))``. The map is increasing in
    eta, so iterating from ``y / (mtilde + lambda)`` climbs to the smallest
    root and iterating from ``y / mtilde`` descends to the largest; the one
    with the higher likelihood ``y log eta - mtilde eta + lambda exp(-eta)``
    is returned. No detections (``y = mtilde = 0``) give 0 by convention.
    """
    if not lam > 0:
        raise InvalidParameter(f"lambda must be > 0, got {lam}")
    if y < mtilde or mtilde < 0:
        raise InvalidParameter(f"need y >= mtilde >= 0, got y={y}, mtilde={mtilde}")
    if mtilde == 0:
        if y > 0:
            raise InvalidParameter("positive SE total with no observed ion")
        return 0.0

    def solve(eta):
        for _ in range(max_iter):
            nxt = y / (mtilde + lam * math.exp(-eta))
            if abs(nxt - eta) <= tol * nxt:
                return nxt
            eta = nxt
        raise SeriesNotConverged("yield fixed-point iteration did not converge")

    lo = solve(y / (mtilde + lam))
    hi = solve(y / mtilde)

    def ll(eta):
        return y * math.log(eta) - mtilde * eta + lam * math.exp(-eta)

    return hi if ll(hi) > ll(lo) else lo


# --- edge estimators -------------------------------------------------------------


def _upward_crossings(eta_hat, tau):
    a, b = eta_hat[:-1], eta_hat[1:]
    k = np.nonzero((a <= tau) & (tau < b))[0]
    return k + (tau - a[k]) / (b[k] - a[k])


def interpolation_edge(scan: ConventionalScan, ctx: EstimationContext) -> EdgeEstimate:
    """Mean of the upward threshold crossings of ``y_k / lambda``.

    With ``eta1 > eta2`` the scan is read right to left so the step is upward.
    """
    ctx.check_scan(scan)
    eta_hat = eta_baseline(scan.y, ctx.lam)
    tau = 0.5 * (ctx.eta1 + ctx.eta2)
    flip = ctx.eta1 > ctx.eta2
    crossings = _upward_crossings(eta_hat[::-1] if flip else eta_hat, tau)
    if crossings.size == 0:
        raise NoCrossing(f"no upward crossing of the threshold {tau:g}")
    g = float(np.mean(crossings))
    return EdgeEstimate(ctx.geom.length - 1 - g if flip else g, "interpolation")


def _log_tables(scan: TRMScan, ctx: EstimationContext):
    offsets, xs, cnt = scan.compressed()
    x_max = int(xs.max()) if xs.size else 0
    support = np.arange(x_max + 1, dtype=float)
    return offsets, xs, cnt, poisson_logpmf(support, ctx.eta1), poisson_logpmf(support, ctx.eta2)


def _ascending(gammas):
    # the kernels locate the beam window by bisection, so they need sorted input
    order = np.argsort(gammas, kind="stable")
    return order, np.ascontiguousarray(gammas[order])


def _unsort(order, values):
    out = np.empty_like(values)
    out[order] = values
    return out


def mle_loglik(scan: TRMScan, ctx: EstimationContext, gammas=None) -> np.ndarray:
    """Zero-truncated mixture log-likelihood of the scan at each gamma."""
    ctx.check_scan(scan)
    gammas = ctx.gamma_grid if gammas is None else np.atleast_1d(np.asarray(gammas, dtype=float))
    m = scan.mtilde
    offsets, xs, cnt, lp1, lp2 = _log_tables(scan, ctx)
    order, sorted_g = _ascending(gammas)
    prof = kernels.mixture_profile(
        sorted_g, m, offsets, xs, cnt, lp1, lp2, ctx.eta1, ctx.eta2, ctx.lam, ctx.sigma_b
    )
    const = float(np.sum(m * math.log(ctx.lam) - gammaln(m + 1.0)))
    return _unsort(order, np.asarray(prof)) + const


def mmle_loglik(scan: TRMScan, ctx: EstimationContext, gammas=None) -> np.ndarray:
    """Log-likelihood of the scan under the mean-matched zero-truncated Poisson model."""
    ctx.check_scan(scan)
    gammas = ctx.gamma_grid if gammas is None else np.atleast_1d(np.asarray(gammas, dtype=float))
    m = scan.mtilde
    ysum = scan.ysum.astype(float)
    order, sorted_g = _ascending(gammas)
    prof = kernels.convolution_profile(sorted_g, m, ysum, ctx.eta1, ctx.eta2, ctx.lam, ctx.sigma_b)
    lgx = sum(float(gammaln(c + 1.0).sum()) for c in scan.counts)
    const = float(np.sum(m * math.log(ctx.lam) - gammaln(m + 1.0))) - lgx
    return _unsort(order, np.asarray(prof)) + const


def _grid_argmax(gammas, ll, method) -> EdgeEstimate:
    if not np.any(ll > -np.inf):
        raise DegenerateLikelihood(f"{method} log-likelihood is -inf over the whole grid")
    i = int(np.argmax(ll))  # first maximum, i.e. the smallest gamma
    return EdgeEstimate(float(gammas[i]), method, float(ll[i]))


def mle_edge(scan: TRMScan, ctx: EstimationContext) -> EdgeEstimate:
    """Grid-search MLE of the edge under the zero-truncated mixture model."""
    g = ctx.gamma_grid
    return _grid_argmax(g, mle_loglik(scan, ctx, g), "mle")


def mmle_edge(scan: TRMScan, ctx: EstimationContext) -> EdgeEstimate:
    """Grid-search MLE of the edge under the mean-matched Poisson model."""
    g = ctx.gamma_grid
    return _grid_argmax(g, mmle_loglik(scan, ctx, g), "mmle")
