import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import norm, poisson

from beamloc import kernels
from beamloc.distributions import MixtureParams, excess_variance, mixture_mean, sample_mixture
from beamloc.errors import DegenerateLikelihood, InvalidParameter, NoCrossing
from beamloc.estimators import (
    EdgeEstimate,
    EstimationContext,
    _log_tables,
    eta_baseline,
    eta_trm_poisson,
    interpolation_edge,
    mle_edge,
    mle_loglik,
    mmle_edge,
    mmle_loglik,
)
from beamloc.geometry import ScanGeometry
from beamloc.sim import BeamConfig, ConventionalScan, EdgeSample, TRMScan, simulate_conventional, simulate_trm

from conftest import within_se

GEOM = ScanGeometry(100)


def _ctx(**kw):
    args = dict(eta1=1.0, eta2=10.0, sigma_b=1.0, lam=200.0, geom=GEOM)
    args.update(kw)
    return EstimationContext(**args)


# --- context ---------------------------------------------------------------------------


def test_context_invariants():
    assert _ctx().gamma_bounds == (2.0, 96.0)
    g = _ctx().gamma_grid
    assert g[0] == 2.0 and g[-1] == 96.0 and g.size == 9401
    for kw in ({"eta2": 1.0}, {"grid_step": 0.0}, {"grid_step": 0.6}, {"gamma_bounds": (-1, 5)},
               {"gamma_bounds": (5, 99.5)}, {"gamma_bounds": (6, 5)}, {"sigma_b": 0}, {"lam": -1}):
        with pytest.raises(InvalidParameter):
            _ctx(**kw)
    with pytest.raises(InvalidParameter):
        mle_edge(TRMScan(((),) * 5), _ctx())


def test_estimate_json():
    assert EdgeEstimate(50.2, "interpolation").to_json() == {"method": "interpolation", "gamma_hat": 50.2}
    d = EdgeEstimate(50.2, "mle", -3.5).to_json()
    assert json.loads(json.dumps(d)) == {"method": "mle", "gamma_hat": 50.2, "loglik": -3.5}


# --- per-pixel yield estimators ----------------------------------------------------------


def test_eta_baseline_examples():
    assert eta_baseline(0, 3.0) == 0
    assert eta_baseline(40, 20) == 2
    np.testing.assert_array_equal(eta_baseline([2, 4], 2.0), [1, 2])
    with pytest.raises(InvalidParameter):
        eta_baseline(1, 0)


def test_eta_baseline_mse(rng):
    p, lam, n = MixtureParams(0.5, 2, 8), 1.0, 100_000
    m = rng.poisson(lam, n)
    x = sample_mixture(p, rng, int(m.sum()))
    y = np.bincount(np.repeat(np.arange(n), m), weights=x, minlength=n)
    err2 = (eta_baseline(y, lam) - mixture_mean(p)) ** 2
    eta = mixture_mean(p)
    want = (eta + eta**2 + excess_variance(p)) / lam
    assert want == 39.0
    assert within_se(err2.mean(), want, err2.std(ddof=1) / math.sqrt(n))


def _bisect_yield(y, m, lam):
    return brentq(lambda e: e * (m + lam * math.exp(-e)) - y, 1e-9, 50, xtol=1e-14, rtol=1e-14)


def test_eta_trm_poisson_matches_bisection():
    assert eta_trm_poisson(5, 3, 4) == pytest.approx(_bisect_yield(5, 3, 4), abs=1e-10)
    for y, m, lam in ((1, 1, 1.0), (30, 12, 20.0), (7, 7, 0.3), (200, 150, 160.0)):
        assert eta_trm_poisson(y, m, lam) == pytest.approx(_bisect_yield(y, m, lam), abs=1e-10)


def test_eta_trm_poisson_edge_cases():
    assert eta_trm_poisson(0, 0, 5.0) == 0.0
    for args in ((2, 3, 1.0), (1, 0, 1.0), (1, 1, 0.0)):
        with pytest.raises(InvalidParameter):
            eta_trm_poisson(*args)


def test_eta_trm_poisson_large_dose():
    eta, lam = 2.3, 1e4
    scan = simulate_trm(EdgeSample(eta, eta, 5.0), BeamConfig(1.0, lam), ScanGeometry(10), 21)
    for y, m in zip(scan.ysum, scan.mtilde):
        assert eta_trm_poisson(int(y), int(m), lam) == pytest.approx(eta, rel=0.01)


# --- interpolation ---------------------------------------------------------------------------


def _conv_ctx(length, **kw):
    return _ctx(lam=1.0, geom=ScanGeometry(length), **kw)


def test_interpolation_single_step():
    y = np.r_[np.ones(51), np.full(49, 10)].astype(int)
    est = interpolation_edge(ConventionalScan(y), _conv_ctx(100))
    assert est.gamma_hat == pytest.approx(50.5, abs=1e-12)
    assert est.method == "interpolation" and est.loglik is None


def test_interpolation_averages_upward_crossings():
    y = np.ones(30, dtype=int)
    y[11:16] = 19  # up at 10.25, down after 15
    y[21:] = 7  # up at 20.75
    assert interpolation_edge(ConventionalScan(y), _conv_ctx(30)).gamma_hat == pytest.approx(15.5, abs=1e-12)


def test_interpolation_threshold_tie_starts_crossing():
    y = np.array([1, 1, 5, 10, 10])  # with eta = (1, 9) the threshold is exactly 5
    ctx = _conv_ctx(5, eta2=9.0)
    assert interpolation_edge(ConventionalScan(y), ctx).gamma_hat == 2.0


def test_interpolation_no_crossing():
    with pytest.raises(NoCrossing):
        interpolation_edge(ConventionalScan(np.ones(20, dtype=int)), _conv_ctx(20))


def test_interpolation_affine_consistency():
    rng = np.random.default_rng(3)
    from beamloc.estimators import _upward_crossings

    eta_hat = np.cumsum(rng.normal(0, 1, 200))
    tau = float(np.median(eta_hat))
    for c in (-3.0, 0.5, 12.0):
        np.testing.assert_allclose(_upward_crossings(eta_hat + c, tau + c), _upward_crossings(eta_hat, tau), atol=1e-9)


# --- likelihood oracles -----------------------------------------------------------------------


def _oracle_mle(scan, ctx, gamma):
    """Term-by-term log of the scan likelihood in plain floating point."""
    total = 0.0
    for k, counts in enumerate(scan.counts):
        q = norm.sf((gamma - k) / ctx.sigma_b)
        r = 1 - (1 - q) * math.exp(-ctx.eta1) - q * math.exp(-ctx.eta2)
        total += poisson.logpmf(counts.size, ctx.lam * r)
        for x in counts:
            mix = (1 - q) * poisson.pmf(x, ctx.eta1) + q * poisson.pmf(x, ctx.eta2)
            total += math.log(mix / r)
    return total


def _oracle_mmle(scan, ctx, gamma):
    total = 0.0
    for k, counts in enumerate(scan.counts):
        q = norm.sf((gamma - k) / ctx.sigma_b)
        mu = (1 - q) * ctx.eta1 + q * ctx.eta2
        r = 1 - math.exp(-mu)
        total += poisson.logpmf(counts.size, ctx.lam * r)
        for x in counts:
            total += poisson.logpmf(x, mu) - math.log(r)
    return total


def _toy_scan():
    counts = [()] * 101
    counts[49], counts[50], counts[51] = (1, 2), (1, 9, 12), (8, 11, 3, 10)
    return TRMScan(tuple(counts))


@pytest.mark.parametrize("which", ["mle", "mmle"])
def test_toy_scan_matches_oracle(which):
    scan = _toy_scan()
    ctx = _ctx(lam=4.0, geom=ScanGeometry(101), grid_step=0.1, gamma_bounds=(49.9, 50.1))
    loglik, edge, oracle = (mle_loglik, mle_edge, _oracle_mle) if which == "mle" else (mmle_loglik, mmle_edge, _oracle_mmle)
    g = ctx.gamma_grid
    np.testing.assert_allclose(g, [49.9, 50.0, 50.1])
    want = np.array([oracle(scan, ctx, v) for v in g])
    got = loglik(scan, ctx)
    np.testing.assert_allclose(got, want, rtol=1e-8, atol=0)
    est = edge(scan, ctx)
    assert est.gamma_hat == g[int(np.argmax(want))]
    assert est.method == which


@pytest.mark.parametrize("which", ["mle", "mmle"])
def test_simulated_scan_matches_oracle(which):
    ctx = _ctx(lam=20.0)
    scan = simulate_trm(EdgeSample(1, 10, 50.2), BeamConfig(1.0, 20.0), GEOM, 8)
    loglik, oracle = (mle_loglik, _oracle_mle) if which == "mle" else (mmle_loglik, _oracle_mmle)
    g = np.array([48.37, 50.2, 50.21, 53.0])
    want = np.array([oracle(scan, ctx, v) for v in g])
    # a log-likelihood within 1e-8 absolute is a likelihood within 1e-8 relative
    np.testing.assert_allclose(loglik(scan, ctx, g), want, rtol=0, atol=1e-8)


def test_loglik_order_independent():
    ctx = _ctx(lam=20.0)
    scan = simulate_trm(EdgeSample(1, 10, 50.2), BeamConfig(1.0, 20.0), GEOM, 8)
    g = np.array([55.0, 40.0, 50.2, 49.0])
    for f in (mle_loglik, mmle_loglik):
        np.testing.assert_array_equal(f(scan, ctx, g), [f(scan, ctx, v)[0] for v in g])


@pytest.mark.parametrize("edge,loglik", [(mle_edge, mle_loglik), (mmle_edge, mmle_loglik)])
def test_grid_search_attains_maximum(edge, loglik):
    ctx = _ctx()
    scan = simulate_trm(EdgeSample(1, 10, 50.2), BeamConfig(1.0, 200.0), GEOM, 12)
    est = edge(scan, ctx)
    ll = loglik(scan, ctx)
    assert est.loglik == ll.max()
    assert est.gamma_hat == ctx.gamma_grid[np.flatnonzero(ll == ll.max())[0]]
    assert ctx.gamma_bounds[0] <= est.gamma_hat <= ctx.gamma_bounds[1]


def test_flat_likelihood_breaks_ties_low():
    # data from equal yields, scored by an equal-yield kernel: no edge information
    scan = simulate_trm(EdgeSample(3, 3, 50.2), BeamConfig(1.0, 50.0), GEOM, 2)
    offsets, xs, cnt = scan.compressed()
    lp = poisson.logpmf(np.arange(xs.max() + 1), 3.0)
    g = np.arange(2.0, 97.0, 0.01)
    prof = kernels.mixture_profile(g, scan.mtilde, offsets, xs, cnt, lp, lp, 3.0, 3.0, 50.0, 1.0)
    assert np.ptp(prof) <= 1e-9 * abs(prof[0])
    conv = kernels.convolution_profile(g, scan.mtilde, scan.ysum.astype(float), 3.0, 3.0, 50.0, 1.0)
    assert np.ptp(conv) <= 1e-9 * abs(conv[0])
    from beamloc.estimators import _grid_argmax

    assert _grid_argmax(g, np.zeros(g.size), "mle").gamma_hat == 2.0


def test_narrow_beam_mle_equals_mmle_where_weights_snap():
    ctx = _ctx(sigma_b=0.05)
    scan = simulate_trm(EdgeSample(1, 10, 50.2), BeamConfig(0.05, 200.0), GEOM, 4)
    g = ctx.gamma_grid
    frac = g - np.floor(g)
    snapped = (frac > 0.4 + 1e-9) & (frac < 0.6 - 1e-9)
    assert snapped.sum() > 1000
    np.testing.assert_allclose(mle_loglik(scan, ctx)[snapped], mmle_loglik(scan, ctx)[snapped], rtol=1e-12)
    a, b = mle_edge(scan, ctx), mmle_edge(scan, ctx)
    assert abs(a.gamma_hat - b.gamma_hat) <= 0.5


@pytest.mark.parametrize("seed", [1, 2])
def test_label_symmetry(seed):
    sample, beam = EdgeSample(1, 10, 50.23), BeamConfig(0.7, 100.0)
    trm = simulate_trm(sample, beam, GEOM, seed)
    conv = simulate_conventional(sample, beam, GEOM, seed)
    ctx, rctx = _ctx(sigma_b=0.7, lam=100.0), _ctx(eta1=10.0, eta2=1.0, sigma_b=0.7, lam=100.0)
    last = GEOM.length - 1
    for edge in (mle_edge, mmle_edge):
        assert edge(trm.reflected(), rctx).gamma_hat == pytest.approx(last - edge(trm, ctx).gamma_hat, abs=1e-9)
    a = interpolation_edge(conv, ctx).gamma_hat
    assert interpolation_edge(conv.reflected(), rctx).gamma_hat == pytest.approx(last - a, abs=1e-9)


def test_degenerate_likelihood():
    # an observed ion where every grid edge puts the beam on a zero-yield side
    counts = [()] * 10
    counts[0] = (2,)
    ctx = _ctx(eta1=0.0, eta2=5.0, sigma_b=0.05, geom=ScanGeometry(10), gamma_bounds=(2, 3))
    scan = TRMScan(tuple(counts))
    assert np.all(mle_loglik(scan, ctx) == -np.inf)
    with pytest.raises(DegenerateLikelihood):
        mle_edge(scan, ctx)
    with pytest.raises(DegenerateLikelihood):
        mmle_edge(scan, ctx)


def test_empty_scan_likelihood_is_thinning_term():
    # no ions anywhere: log L = -lam * sum_k rho_k, finite even beside a zero-yield side
    ctx = _ctx(eta1=0.0, eta2=5.0, sigma_b=0.05, geom=ScanGeometry(10), gamma_bounds=(2, 3))
    scan = TRMScan(((),) * 10)
    g = ctx.gamma_grid
    q = norm.sf((g[:, None] - np.arange(10)) / 0.05)
    want = -ctx.lam * np.sum(q * (1 - math.exp(-5.0)), axis=1)
    np.testing.assert_allclose(mle_loglik(scan, ctx), want, rtol=1e-12, atol=1e-9)


def test_log_tables_cover_observed_counts():
    scan = TRMScan(((3, 1), (), (7,)))
    offsets, xs, cnt, lp1, lp2 = _log_tables(scan, _ctx(geom=ScanGeometry(3), gamma_bounds=(0, 2)))
    assert lp1.size == 8 and lp2.size == 8
    np.testing.assert_allclose(lp1, poisson.logpmf(np.arange(8), 1.0), rtol=1e-13)
