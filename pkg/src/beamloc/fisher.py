"""Fisher information about the mixing weight q, the yield eta, and the edge gamma.

Most quantities reduce to one series over SE counts,

    S(q; x0) = sum_{x >= x0} (P1(x) - P2(x))^2 / ((1 - q) P1(x) + q P2(x)),

with ``P1``/``P2`` the Poisson PMFs of the two yields. ``x0 = 0`` gives the
information in one SE count from a known ion, ``x0 = 1`` the dose-normalised
information in time-resolved data (identical to the low-dose limit of the
conventional measurement).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .distributions import (
    DEFAULT_CONTROL,
    MixtureParams,
    SeriesControl,
    compound_series,
    drho_dq,
    excess_variance,
    mixture_mean,
    poisson_logpmf,
    rho,
)
from .errors import (
    DegenerateDistribution,
    DegenerateReparametrization,
    EmptyGrid,
    InvalidParameter,
    SeriesNotConverged,
)
from .geometry import SNAP_Z, ScanGeometry, grid, mixing_weights

__all__ = [
    "FiValue",
    "ScanGeometry",
    "fi_x_q",
    "fi_y_q_numeric",
    "nfi_y_low",
    "nfi_y_high",
    "fi_trm_q",
    "fi_mtilde_q",
    "fi_xtilde_q",
    "beta_poisson",
    "beta_mixture",
    "fi_reparam_q_to_eta",
    "fi_scan_gamma",
    "scan_information",
    "optimal_beam_width",
    "BeamWidthResult",
]


@dataclass(frozen=True)
class FiValue:
    value: float
    parameter: str  # "q", "eta" or "gamma"
    normalized_by_dose: bool = False

    def __post_init__(self):
        if self.parameter not in ("q", "eta", "gamma"):
            raise InvalidParameter(f"unknown FI parameter tag {self.parameter!r}")
        if not self.value >= 0.0:
            raise InvalidParameter(f"Fisher information must be >= 0, got {self.value}")

    def __float__(self):
        return float(self.value)


_CHUNK = 64


def _terms(w1, w2, lp1, lp2):
    hi = np.maximum(lp1, lp2)
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = -np.abs(lp1 - lp2)
        log_d2 = np.where(np.isfinite(hi) & (gap < 0), 2.0 * (hi + np.log(-np.expm1(gap))), -np.inf)
        log_mix = np.logaddexp(np.log(w1) + lp1, np.log(w2) + lp2)
        t = np.exp(log_d2 - log_mix)
    return np.where(np.isneginf(log_d2), 0.0, t)


def _series_cutoff(w1, w2, eta1, eta2, start, ctl):
    """Sum ``S`` adaptively; return ``(value, last x used)``.

    Stops at the first x past both yields where successive terms shrink by at
    least half and the current term is below ``rel_tol`` times the running
    sum, which bounds the geometric tail by the same amount.
    """
    total = 0.0
    x0 = start
    floor_x = max(eta1, eta2) + 2.0
    while x0 <= ctl.max_terms:
        xs = np.arange(x0, x0 + _CHUNK, dtype=float)
        t = _terms(w1, w2, poisson_logpmf(xs, eta1), poisson_logpmf(xs, eta2))
        if np.isinf(t).any():
            return math.inf, int(xs[np.argmax(np.isinf(t))])
        csum = total + np.cumsum(t)
        prev = np.concatenate([[np.inf if x0 == start else last], t[:-1]])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = t / prev
        done = (xs >= floor_x) & (ratio <= 0.5) & (t <= ctl.rel_tol * csum)
        done |= (xs >= floor_x) & (csum == 0.0) & (t == 0.0)
        if done.any():
            i = int(np.argmax(done))
            return float(csum[i]), int(xs[i])
        total = float(csum[-1])
        last = t[-1]
        x0 += _CHUNK
    raise SeriesNotConverged(f"count series did not converge within {ctl.max_terms} terms")


def _series(p: MixtureParams, start: int, ctl: SeriesControl) -> float:
    return _series_cutoff(1.0 - p.q, p.q, p.eta1, p.eta2, start, ctl)[0]


def fi_x_q(p: MixtureParams, ctl: SeriesControl = DEFAULT_CONTROL) -> FiValue:
    """Information about q in one SE count from a known single ion."""
    return FiValue(_series(p, 0, ctl), "q")


def nfi_y_low(p: MixtureParams, ctl: SeriesControl = DEFAULT_CONTROL) -> FiValue:
    """Low-dose limit of the dose-normalised information in the pixel total."""
    return FiValue(_series(p, 1, ctl), "q", normalized_by_dose=True)


def nfi_y_high(p: MixtureParams) -> FiValue:
    """High-dose limit of the dose-normalised information in the pixel total."""
    eta = mixture_mean(p)
    if eta <= 0.0:
        raise DegenerateDistribution("mixture mean is 0; no SE is ever emitted")
    d2 = (p.eta2 - p.eta1) ** 2
    return FiValue(d2 / (eta + eta * eta + excess_variance(p)), "q", normalized_by_dose=True)


def _check_dose(lam):
    if not lam > 0.0:
        raise InvalidParameter(f"dose lambda must be > 0, got {lam}")


def fi_trm_q(p: MixtureParams, lam: float, ctl: SeriesControl = DEFAULT_CONTROL) -> FiValue:
    """Information about q in time-resolved data at dose `lam`."""
    _check_dose(lam)
    return FiValue(lam * _series(p, 1, ctl), "q")


def fi_mtilde_q(p: MixtureParams, lam: float) -> FiValue:
    """Information about q in the observed ion count alone."""
    _check_dose(lam)
    r = rho(p)
    if r <= 0.0:
        raise DegenerateDistribution("rho = 0: no ion is ever observed")
    return FiValue(lam * drho_dq(p) ** 2 / r, "q")


def fi_xtilde_q(p: MixtureParams, ctl: SeriesControl = DEFAULT_CONTROL) -> FiValue:
    """Information about q in one zero-truncated SE count.

    The expectation runs over the truncated PMF ``mix / rho``, so the count
    series enters divided by rho: ``S / rho - (d rho/dq)^2 / rho^2``. With
    this form ``fi_mtilde_q + lam * rho * fi_xtilde_q == fi_trm_q``.
    """
    r = rho(p)
    if r <= 0.0:
        raise DegenerateDistribution("rho = 0: the zero-truncated count is undefined")
    val = _series(p, 1, ctl) / r - (drho_dq(p) / r) ** 2
    # the two terms cancel when eta1 == eta2; rounding can leave a tiny negative
    return FiValue(max(val, 0.0), "q")


def fi_y_q_numeric(p: MixtureParams, lam: float, ctl: SeriesControl = DEFAULT_CONTROL) -> FiValue:
    """Information about q in the conventional pixel total, by direct summation."""
    _check_dose(lam)
    s = compound_series(p, float(lam), ctl)
    pos = s.pmf > 0.0
    return FiValue(float(np.sum(s.dpmf_dq[pos] ** 2 / s.pmf[pos])), "q")


def beta_poisson(eta: float) -> float:
    """Gain of time-resolved over high-dose conventional data for Poisson SEs."""
    if eta < 0:
        raise InvalidParameter("eta must be >= 0")
    return (eta + 1.0) * (1.0 - eta * math.exp(-eta))


def beta_mixture(p: MixtureParams, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """The same gain when SE counts follow the two-component mixture.

    At ``eta1 == eta2`` the ratio is 0/0; its limit is ``beta_poisson(eta1)``.
    """
    if p.eta1 == p.eta2:
        return beta_poisson(p.eta1)
    eta = mixture_mean(p)
    d2 = (p.eta2 - p.eta1) ** 2
    return ((eta + eta * eta) / d2 + p.q * (1.0 - p.q)) * _series(p, 1, ctl)


def fi_reparam_q_to_eta(fi_q: FiValue, p: MixtureParams) -> FiValue:
    """Rescale information about q to information about eta = eta1 + (eta2 - eta1) q."""
    if fi_q.parameter != "q":
        raise InvalidParameter("expected information about q")
    if p.eta1 == p.eta2:
        raise DegenerateReparametrization("eta does not depend on q when eta1 == eta2")
    return replace(fi_q, value=fi_q.value / (p.eta2 - p.eta1) ** 2, parameter="eta")


# --- edge location -----------------------------------------------------------


def _series_many(w1, w2, eta1, eta2, ctl):
    """``S(q; 1)`` for arrays of weights, via the compiled kernel."""
    if w1.size == 0:
        return np.zeros(0)
    # each term is convex in q, so the extreme weights bound every tail
    i_lo = int(np.argmin(w2))
    i_hi = int(np.argmin(w1))
    x_cut = max(
        _series_cutoff(w1[i_lo], w2[i_lo], eta1, eta2, 1, ctl)[1],
        _series_cutoff(w1[i_hi], w2[i_hi], eta1, eta2, 1, ctl)[1],
    )
    xs = np.arange(1, x_cut + 6, dtype=float)
    return kernels.trm_series(w1, w2, poisson_logpmf(xs, eta1), poisson_logpmf(xs, eta2))


def scan_information(gammas, geom: ScanGeometry, eta1, eta2, sigma_b, ctl=DEFAULT_CONTROL):
    """Dose-normalised information about gamma for each edge position in `gammas`."""
    if not sigma_b > 0.0:
        raise InvalidParameter(f"sigma_b must be > 0, got {sigma_b}")
    if eta1 < 0 or eta2 < 0:
        raise InvalidParameter("SE yields must be >= 0")
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    if gammas.size == 0:
        return np.zeros(0)
    k_lo = max(0, int(math.floor(gammas.min() - SNAP_Z * sigma_b)) - 1)
    k_hi = min(geom.length - 1, int(math.ceil(gammas.max() + SNAP_Z * sigma_b)) + 1)
    ks = np.arange(k_lo, k_hi + 1, dtype=float)
    z = (gammas[:, None] - ks[None, :]) / sigma_b
    gi, ki = np.nonzero(np.abs(z) <= SNAP_Z)
    zz = z[gi, ki]
    w1, w2 = mixing_weights(gammas[gi], ks[ki], sigma_b)
    w1, w2 = np.atleast_1d(w1), np.atleast_1d(w2)
    dq2 = np.exp(-zz * zz) / (2.0 * math.pi * sigma_b * sigma_b)
    terms = _series_many(w1, w2, float(eta1), float(eta2), ctl) * dq2
    return np.bincount(gi, weights=terms, minlength=gammas.size)


def fi_scan_gamma(gamma, geom, eta1, eta2, lam, sigma_b, ctl=DEFAULT_CONTROL) -> FiValue:
    """Information about the edge position in one time-resolved scan line."""
    _check_dose(lam)
    nfi = scan_information([gamma], geom, eta1, eta2, sigma_b, ctl)[0]
    return FiValue(float(lam * nfi), "gamma")


@dataclass(frozen=True)
class BeamWidthResult:
    sigma_star: float
    worstcase_nfi: FiValue
    sigmas: np.ndarray
    worstcase: np.ndarray
    argmin_gamma: np.ndarray


def default_gamma_period(geom: ScanGeometry, step: float = 0.01) -> np.ndarray:
    """One interior pixel period ``[floor(l/2), floor(l/2) + 1)``."""
    g0 = geom.length // 2
    g = grid(g0, g0 + 1, step)
    return g[g < g0 + 1]


def optimal_beam_width(
    geom: ScanGeometry,
    eta1: float,
    eta2: float,
    gammas=None,
    sigmas=None,
    ctl: SeriesControl = DEFAULT_CONTROL,
) -> BeamWidthResult:
    """Maximin beam width: maximise over sigma_b the worst-case normalised FI over gamma.

    Defaults: sigma_b in [0.1, 1] step 0.01 and gamma over one interior
    pixel period at step 0.01. Ties go to the smaller beam width.
    """
    gammas = default_gamma_period(geom) if gammas is None else np.asarray(gammas, dtype=float)
    sigmas = grid(0.1, 1.0, 0.01) if sigmas is None else np.sort(np.asarray(sigmas, dtype=float))
    if gammas.size == 0 or sigmas.size == 0:
        raise EmptyGrid("optimal_beam_width needs nonempty gamma and sigma grids")
    if np.any(sigmas <= 0):
        raise InvalidParameter("beam widths must be > 0")
    margin = 5.0 * sigmas.max()
    if gammas.min() < margin or gammas.max() > geom.length - 1 - margin:
        raise InvalidParameter("gamma range must stay 5 sigma_b,max away from the scan ends")
    gammas = np.sort(gammas)
    worst = np.empty(sigmas.size)
    where = np.empty(sigmas.size)
    for i, s in enumerate(sigmas):
        nfi = scan_information(gammas, geom, eta1, eta2, s, ctl)
        j = int(np.argmin(nfi))
        worst[i] = nfi[j]
        where[i] = gammas[j]
    best = int(np.argmax(worst))
    return BeamWidthResult(
        sigma_star=float(sigmas[best]),
        worstcase_nfi=FiValue(float(worst[best]), "gamma", normalized_by_dose=True),
        sigmas=sigmas,
        worstcase=worst,
        argmin_gamma=where,
    )
