"""Randomised invariants over the parameter space."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from beamloc.distributions import MixtureParams, drho_dq, mixture_mean, mixture_pmf, rho
from beamloc.fisher import fi_mtilde_q, fi_trm_q, fi_x_q, fi_xtilde_q, nfi_y_low
from beamloc.geometry import grid, mixing_weights
from beamloc.mc import summarize

probs = st.floats(0.0, 1.0)
yields = st.floats(0.05, 25.0)


@given(probs, yields, yields)
def test_mixture_pmf_between_components(q, e1, e2):
    p = MixtureParams(q, e1, e2)
    x = np.arange(0, 120)
    pm = mixture_pmf(p, x)
    lo = np.minimum(mixture_pmf(MixtureParams(0, e1, e2), x), mixture_pmf(MixtureParams(1, e1, e2), x))
    hi = np.maximum(mixture_pmf(MixtureParams(0, e1, e2), x), mixture_pmf(MixtureParams(1, e1, e2), x))
    assert np.all(pm >= lo * (1 - 1e-12)) and np.all(pm <= hi * (1 + 1e-12))
    assert abs((x * pm).sum() - mixture_mean(p)) <= 1e-9 * max(1, mixture_mean(p))


@given(probs, yields, yields)
def test_rho_linear_in_q(q, e1, e2):
    p = MixtureParams(q, e1, e2)
    r0, r1 = rho(MixtureParams(0, e1, e2)), rho(MixtureParams(1, e1, e2))
    assert 0 <= rho(p) <= 1
    assert math.isclose(rho(p), (1 - q) * r0 + q * r1, rel_tol=1e-12, abs_tol=1e-15)
    assert math.isclose(drho_dq(p), r1 - r0, rel_tol=1e-9, abs_tol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.99), yields, yields, st.floats(0.01, 1e3))
def test_information_decomposition(q, e1, e2, lam):
    p = MixtureParams(q, e1, e2)
    trm = fi_trm_q(p, lam).value
    parts = fi_mtilde_q(p, lam).value + lam * rho(p) * fi_xtilde_q(p).value
    assert math.isclose(parts, trm, rel_tol=1e-9, abs_tol=1e-300)
    assert fi_x_q(p).value >= nfi_y_low(p).value >= 0


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.01, 5))
def test_mixing_weights_complement(gamma, g1, sigma):
    w1, w2 = mixing_weights(gamma, g1, sigma)
    assert 0 <= w1 <= 1 and 0 <= w2 <= 1
    assert math.isclose(w1 + w2, 1.0, rel_tol=1e-15)


@given(st.floats(-10, 10), st.floats(0, 20), st.floats(0.01, 3))
def test_grid_inclusive(start, span, step):
    g = grid(start, start + span, step)
    assert g.size >= 1 and g[0] == round(start, 12)
    assert g[-1] <= start + span + 1e-9
    assert g[-1] + step > start + span - 1e-6


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=200))
def test_summary_identity(errs):
    s = summarize(errs)
    n = len(errs)
    assert math.isclose(s.rmse**2, s.bias**2 + s.std**2 * (n - 1) / n, rel_tol=1e-9, abs_tol=1e-12)
    assert s.std_interval[0] <= s.std <= s.std_interval[1]
    assert s.rmse_interval[0] <= s.rmse <= s.rmse_interval[1]
