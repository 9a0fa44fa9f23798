"""Two-component Poisson mixture, its zero-truncated form, and its Poisson compound.

An ion striking near the edge emits ``X ~ Poisson(eta1)`` SEs with probability
``1 - q`` and ``X ~ Poisson(eta2)`` with probability ``q``. Ions that emit no
SE are invisible, which gives the zero-truncated mixture (ZTPM). Summing the
SEs of a Poisson(lambda) number of ions gives the conventional pixel value
``Y`` whose PMF is a double series over ion count ``m`` and split ``i``.

All PMFs are evaluated in log space; factorials go through ``gammaln``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, pdtrc, xlogy
from scipy.stats import binom, poisson

from .errors import DegenerateDistribution, InvalidParameter, SeriesNotConverged


@dataclass(frozen=True)
class MixtureParams:
    """Mixing probability `q` and the two component SE yields."""

    q: float
    eta1: float
    eta2: float

    def __post_init__(self):
        for name in ("q", "eta1", "eta2"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidParameter(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if not 0.0 <= self.q <= 1.0:
            raise InvalidParameter(f"q must lie in [0, 1], got {self.q}")
        if self.eta1 < 0 or self.eta2 < 0:
            raise InvalidParameter(f"SE yields must be >= 0, got ({self.eta1}, {self.eta2})")


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy shared by every infinite sum in the package."""

    rel_tol: float = 1e-12
    max_terms: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise InvalidParameter(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.max_terms < 1:
            raise InvalidParameter(f"max_terms must be >= 1, got {self.max_terms}")


DEFAULT_CONTROL = SeriesControl()


@dataclass(frozen=True)
class CompoundTerms:
    """Per-split quantities for ``m`` ions, indexed by ``i = 0 .. m`` ions on side 2.

    ``zeta[i]`` is the Poisson mean of the total SE count, ``b[i]`` the
    binomial probability of the split and ``bprime[i]`` its q-derivative.
    """

    m: int
    zeta: np.ndarray
    b: np.ndarray
    bprime: np.ndarray


def poisson_logpmf(x, mu):
    """log Poisson(x; mu) with the ``mu = 0`` limit (point mass at 0)."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return xlogy(x, mu) - mu - gammaln(x + 1.0)


def _check_count(x, lowest):
    x = np.asarray(x)
    if np.any(x < lowest) or np.any(np.floor(x) != x):
        raise InvalidParameter(f"counts must be integers >= {lowest}")
    return x


def mixture_logpmf(p: MixtureParams, x):
    x = _check_count(x, 0)
    with np.errstate(divide="ignore"):
        a = np.log1p(-p.q) + poisson_logpmf(x, p.eta1)
        b = np.log(p.q) + poisson_logpmf(x, p.eta2)
    # a zero weight gives -inf, and logaddexp(v, -inf) == v exactly
    return np.logaddexp(a, b)


def mixture_pmf(p: MixtureParams, x):
    """``(1 - q) Pois(x; eta1) + q Pois(x; eta2)``."""
    return np.exp(mixture_logpmf(p, x))


def mixture_mean(p: MixtureParams) -> float:
    return (1.0 - p.q) * p.eta1 + p.q * p.eta2


def excess_variance(p: MixtureParams) -> float:
    """Variance in excess of the mean-matched Poisson model."""
    return p.q * (1.0 - p.q) * (p.eta2 - p.eta1) ** 2


def mixture_variance(p: MixtureParams) -> float:
    return mixture_mean(p) + excess_variance(p)


def rho(p: MixtureParams) -> float:
    """Probability that one ion yields at least one SE."""
    # expm1 keeps precision when both yields are small
    return -(1.0 - p.q) * math.expm1(-p.eta1) - p.q * math.expm1(-p.eta2)


def drho_dq(p: MixtureParams) -> float:
    """``d rho / dq = exp(-eta1) - exp(-eta2)``."""
    return math.exp(-p.eta1) - math.exp(-p.eta2)


def ztpm_logpmf(p: MixtureParams, x):
    """log PMF of the zero-truncated mixture, defined for ``x >= 1``."""
    x = _check_count(x, 1)
    r = rho(p)
    if r <= 0.0:
        raise DegenerateDistribution("rho = 0: no positive SE count is possible")
    return mixture_logpmf(p, x) - math.log(r)


def ztpm_pmf(p: MixtureParams, x):
    return np.exp(ztpm_logpmf(p, x))


def compound_terms(m: int, p: MixtureParams) -> CompoundTerms:
    """Split means, binomial weights and their q-derivatives for ``m`` ions."""
    if m < 0:
        raise InvalidParameter("ion count m must be >= 0")
    i = np.arange(m + 1)
    zeta = (m - i) * p.eta1 + i * p.eta2
    b = binom.pmf(i, m, p.q)
    if m == 0:
        bprime = np.zeros(1)
    else:
        # d/dq C(m,i) (1-q)^(m-i) q^i = m [B(i-1; m-1) - B(i; m-1)]; valid at q = 0, 1
        bprime = m * (binom.pmf(i - 1, m - 1, p.q) - binom.pmf(i, m - 1, p.q))
    return CompoundTerms(m=m, zeta=zeta, b=b, bprime=bprime)


@dataclass(frozen=True)
class CompoundSeries:
    """``P_Y(y)`` and ``dP_Y/dq (y)`` on ``y = 0 .. len(pmf) - 1``; zero beyond."""

    pmf: np.ndarray
    dpmf_dq: np.ndarray
    n_ion_terms: int


# m-terms lighter than this fraction of rel_tol are skipped outright
_ION_SKIP = 1e-6
# split terms lighter than this are dropped
_SPLIT_EPS = 1e-20


def _y_window(zlo, zhi, y_max):
    lo = max(0, int(math.floor(zlo - 9.0 * math.sqrt(zlo) - 25.0)))
    hi = min(y_max, int(math.ceil(zhi + 9.0 * math.sqrt(zhi) + 25.0)))
    return lo, hi


@functools.lru_cache(maxsize=32)
def compound_series(p: MixtureParams, lam: float, ctl: SeriesControl = DEFAULT_CONTROL) -> CompoundSeries:
    """Evaluate the PMF of ``Y`` and its q-derivative by the (m, i) double series.

    The outer sum over ion count ``m`` stops once the Poisson(lambda) tail mass
    beyond ``m`` falls below ``rel_tol`` times the mass accumulated so far.
    """
    lam = float(lam)
    if not lam > 0.0:
        raise InvalidParameter(f"dose lambda must be > 0, got {lam}")
    m_cap = int(poisson.isf(ctl.rel_tol * 1e-3, lam)) + 1
    if m_cap > ctl.max_terms:
        raise SeriesNotConverged(f"ion series needs more than {ctl.max_terms} terms at lambda={lam}")
    z_cap = m_cap * max(p.eta1, p.eta2)
    y_max = _y_window(0.0, z_cap, 1 << 62)[1]

    pmf = np.zeros(y_max + 1)
    dpmf = np.zeros(y_max + 1)
    partial = 0.0
    log_lam = math.log(lam)
    for m in range(ctl.max_terms + 1):
        w = math.exp(m * log_lam - lam - math.lgamma(m + 1.0))
        partial += w
        if m == 0:
            pmf[0] += w
        elif w >= ctl.rel_tol * _ION_SKIP:
            t = compound_terms(m, p)
            keep = (t.b > _SPLIT_EPS) | (np.abs(t.bprime) > _SPLIT_EPS * m)
            zeta, b, bp = t.zeta[keep], t.b[keep], t.bprime[keep]
            lo, hi = _y_window(zeta.min(), zeta.max(), y_max)
            ys = np.arange(lo, hi + 1, dtype=float)
            kern = np.exp(poisson_logpmf(ys[None, :], zeta[:, None]))
            pmf[lo : hi + 1] += w * (b @ kern)
            dpmf[lo : hi + 1] += w * (bp @ kern)
        if pdtrc(m, lam) < ctl.rel_tol * partial:
            break
    else:
        raise SeriesNotConverged(f"ion series did not converge in {ctl.max_terms} terms")
    pmf.setflags(write=False)
    dpmf.setflags(write=False)
    return CompoundSeries(pmf=pmf, dpmf_dq=dpmf, n_ion_terms=m + 1)


def compound_pmf(p: MixtureParams, lam: float, y, ctl: SeriesControl = DEFAULT_CONTROL):
    """PMF of the per-pixel SE total ``Y`` under Poisson(lambda) ion arrivals."""
    y = _check_count(y, 0).astype(np.int64)
    s = compound_series(p, float(lam), ctl)
    out = np.zeros(y.shape)
    inside = y < s.pmf.size
    out[inside] = s.pmf[y[inside]]
    return out if out.ndim else float(out)


def sample_mixture(p: MixtureParams, rng: np.random.Generator, size=None):
    """Draw the side by Bernoulli(q), then a Poisson count with that side's yield."""
    right = rng.random(size) < p.q
    return rng.poisson(np.where(right, p.eta2, p.eta1))


def sample_ztpm(p: MixtureParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw `size` positive counts from the mixture by rejecting zeros."""
    if rho(p) <= 0.0:
        raise DegenerateDistribution("rho = 0: no positive SE count is possible")
    out = np.empty(0, dtype=np.int64)
    while out.size < size:
        need = size - out.size
        draw = sample_mixture(p, rng, int(need / rho(p) * 1.1) + 16)
        out = np.concatenate([out, draw[draw > 0]])
    return out[:size]
