import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats as sps

from conftest import skeleton
from pssmp import conditioned as cond
from pssmp import fluctuation as fl
from pssmp import levy_model as lm
from pssmp import stats
from pssmp.errors import DivergenceDetected, EmptyPath, NonConvergent


def test_toy_path_by_hand():
    # epochs at 0, 1, 4, 5; the middle excursion is reversed and lifted onto level 1.5
    out = cond.doney_tanaka(skeleton([0, 1, 0.5, -0.5, 1.5, 2]))
    np.testing.assert_array_equal(out.path.times, [0, 1, 2, 3, 4, 5])
    np.testing.assert_array_equal(out.path.values, [1, 3, 2, 1.5, 2, 2])
    np.testing.assert_array_equal(out.future_inf.values, [1, 1.5, 1.5, 1.5, 2, 2])


def test_increasing_path_unchanged():
    v = np.array([0, 0.5, 1.2, 2.0, 2.1])
    out = cond.doney_tanaka(skeleton(v))
    # each cell holds the value reached at its closing epoch
    np.testing.assert_array_equal(out.path.values, np.append(v[1:], v[-1]))


@given(arrays(float, st.integers(3, 40), elements=st.floats(-3, 3)))
def test_pasted_path_nonnegative(v):
    v = v - v[0]
    try:
        out = cond.doney_tanaka(skeleton(v))
    except EmptyPath:
        return
    assert np.all(out.path.values >= 0)
    assert np.all(out.path.values >= out.future_inf.values)


def test_w_process_subordinator_closed_form():
    spec = lm.LevySpec(drift=1.0)
    sc = fl.local_time_scale(spec, 0.1)
    d = fl.decompose(lm.sample_skeleton(spec, 3.0, 0.1, seed=0), 1.0, sc)
    w = cond.w_process(d, 1.0, tol=math.inf)
    h = d.h
    want = np.cumsum(np.exp(-h[1:]) * 0.1)[:len(w.W)]
    np.testing.assert_allclose(w.W, want, rtol=1e-12)


def test_w_process_requires_positive_alpha(models):
    d = fl.decompose(lm.sample_skeleton(models["bm_drift"], 2.0, 1e-2, 0), -1.0,
                     fl.local_time_scale(models["bm_drift"], 1e-2))
    with pytest.raises(DivergenceDetected):
        cond.w_process(d, -1.0)


def test_reversal_equals_w_in_law(models):
    spec = models["bm_drift"]
    sc = fl.local_time_scale(spec, 1e-2)
    ell = 2.0
    rev, fwd = [], []
    for i in range(400):
        d = fl.decompose(lm.sample_skeleton(spec, 30.0, 1e-2, 3, i), 1.0, sc)
        if d.C[-1] <= ell + 1:
            continue
        rev.append(cond.reversal_sample(d, 1.0, ell))
        fwd.append(cond.w_at(d, 1.0, ell))
    assert stats.ks_two_sample(np.array(rev), np.array(fwd)).p_value > 0.01


def test_itilde_matches_pasted_functional(models):
    spec = models["bm_drift"]
    sc = fl.local_time_scale(spec, 1e-2)
    a = cond.sample_w_terminal(spec, 1.0, 200, 1e-2, seed=1, scale=sc)
    b = cond.sample_dt_functional(spec, 1.0, 200, 1e-2, seed=2, scale=sc)
    assert stats.ks_two_sample(a, b).p_value > 0.01


def test_exp_functional_deterministic():
    T, dt = 10.0, 1e-3
    xi = lm.sample_skeleton(lm.LevySpec(drift=-1.0), T, dt, seed=0)
    val, tail = cond.exp_functional_path(xi, 1.0, -1.0)
    # left-endpoint sum of e^{-s} on [0, T]
    assert 1 - math.exp(-T) <= val <= (1 - math.exp(-T)) * (1 + dt)
    assert val + tail == pytest.approx(1.0, abs=2 * dt)


def test_exp_functional_wrong_sign():
    with pytest.raises(NonConvergent):
        cond.exp_functional_path(skeleton([0, 1]), 1.0, 1.0)
    with pytest.raises(NonConvergent):
        cond.sample_exp_functional(lm.LevySpec(drift=-1.0, sigma=1.0), 1.0, 5, 1e-2, 0)


def test_exponential_functional_inverse_gamma(models):
    # mu = 1/2, sigma = 1, alpha = 1: I = 2 / G with G ~ Gamma(1)
    s = cond.sample_exp_functional(models["bm_drift"], 1.0, 400, 1e-3, seed=4)
    assert sps.kstest(s, sps.invgamma(1.0, scale=2.0).cdf).pvalue > 0.01


def test_ih_drift_only_exact():
    spec = lm.LevySpec(drift=2.0)
    sc = fl.local_time_scale(spec, 1e-2)
    d = fl.decompose(lm.sample_skeleton(spec, 20.0, 1e-2, 0), 1.0, sc)
    # h = 2 L here, so int exp(-h) dL = 1/2
    assert cond.ih_from_decomposition(d, 1.0) == pytest.approx(1 / (1.0 * 2.0), rel=1e-9)
