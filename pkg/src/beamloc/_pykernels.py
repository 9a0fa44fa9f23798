"""NumPy implementation of the hot kernels.

Same signatures and semantics as the compiled ``_ckernels`` module; used
when the extension is not built or ``BEAMLOC_PURE_PYTHON=1`` is set.

Scan data is passed in a compressed per-location layout: the SE counts seen
at location ``k`` are the distinct values ``xs[offsets[k]:offsets[k+1]]``
with multiplicities ``cnt[offsets[k]:offsets[k+1]]``.
"""

import math

import numpy as np
from scipy.special import erfc, xlogy

SNAP_Z = 8.0
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def _window(z):
    # z ascending; [lo, hi) is the |z| <= SNAP_Z band
    lo = int(np.searchsorted(z, -SNAP_Z, side="left"))
    hi = int(np.searchsorted(z, SNAP_Z, side="right"))
    return lo, hi


def mixture_profile(gammas, mtilde, offsets, xs, cnt, lp1, lp2, eta1, eta2, lam, sigma_b):
    """Edge-dependent part of the mixture log-likelihood at each grid gamma.

    Returns ``sum_k [-lam * rho_k + sum_i log((1-q_k) P1(x_ik) + q_k P2(x_ik))]``;
    the caller adds the gamma-free constant ``sum_k m_k log lam - log m_k!``.
    """
    gammas = np.asarray(gammas, dtype=float)
    out = np.zeros(gammas.size)
    r1 = -math.expm1(-eta1)
    r2 = -math.expm1(-eta2)
    for k in range(len(mtilde)):
        sl = slice(offsets[k], offsets[k + 1])
        x, c = xs[sl], cnt[sl]
        a1, a2 = lp1[x], lp2[x]
        z = (gammas - k) / sigma_b
        lo, hi = _window(z)
        # gamma far left of k: the beam sits wholly on side 2, and vice versa
        out[:lo] += -lam * r2 + (float(c @ a2) if c.size else 0.0)
        out[hi:] += -lam * r1 + (float(c @ a1) if c.size else 0.0)
        if hi > lo:
            zw = z[lo:hi]
            w1 = 0.5 * erfc(-zw * _INV_SQRT2)
            w2 = 0.5 * erfc(zw * _INV_SQRT2)
            part = -lam * (w1 * r1 + w2 * r2)
            if c.size:
                lm = np.logaddexp(np.log(w1)[:, None] + a1, np.log(w2)[:, None] + a2)
                part = part + lm @ c
            out[lo:hi] += part
    return out


def convolution_profile(gammas, mtilde, ysum, eta1, eta2, lam, sigma_b):
    """Edge-dependent part of the mean-matched Poisson log-likelihood.

    Returns ``sum_k [-lam * rho'_k + y_k log mu_k - m_k mu_k]`` with
    ``mu_k = (1-q_k) eta1 + q_k eta2`` and ``rho'_k = 1 - exp(-mu_k)``.
    """
    gammas = np.asarray(gammas, dtype=float)
    out = np.zeros(gammas.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(len(mtilde)):
            m, y = float(mtilde[k]), float(ysum[k])
            z = (gammas - k) / sigma_b
            lo, hi = _window(z)
            out[:lo] += lam * math.expm1(-eta2) + float(xlogy(y, eta2)) - m * eta2
            out[hi:] += lam * math.expm1(-eta1) + float(xlogy(y, eta1)) - m * eta1
            if hi > lo:
                zw = z[lo:hi]
                mu = 0.5 * erfc(-zw * _INV_SQRT2) * eta1 + 0.5 * erfc(zw * _INV_SQRT2) * eta2
                out[lo:hi] += lam * np.expm1(-mu) + xlogy(y, mu) - m * mu
    return out


def trm_series(w1, w2, lp1, lp2):
    """``sum_x (P1(x) - P2(x))^2 / (w1 P1(x) + w2 P2(x))`` for each weight pair.

    `lp1`, `lp2` hold ``log P1(x)``, ``log P2(x)`` for the x values to include.
    """
    w1 = np.atleast_1d(np.asarray(w1, dtype=float))
    w2 = np.atleast_1d(np.asarray(w2, dtype=float))
    lp1 = np.asarray(lp1, dtype=float)
    lp2 = np.asarray(lp2, dtype=float)
    hi = np.maximum(lp1, lp2)
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = -np.abs(lp1 - lp2)
        log_d2 = 2.0 * (hi + np.log(-np.expm1(gap)))
        log_d2 = np.where(np.isfinite(hi) & (gap < 0), log_d2, -np.inf)
        log_mix = np.logaddexp(np.log(w1)[:, None] + lp1, np.log(w2)[:, None] + lp2)
        terms = np.exp(log_d2 - log_mix)
    terms = np.where(np.isneginf(log_d2), 0.0, terms)
    return terms.sum(axis=1)
