import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import skeleton
from pssmp import lamperti
from pssmp import levy_model as lm
from pssmp import stats
from pssmp.errors import ConfigError, InconsistentInputs
from pssmp.pathkit import PathSkeleton


def test_zero_path():
    X = lamperti.to_pssmp(skeleton([0, 0, 0, 0], dt=0.5), 1.0, 2.0)
    np.testing.assert_allclose(X.values, 2.0)
    np.testing.assert_allclose(X.times, 2.0 * np.array([0, 0.5, 1, 1.5]))
    np.testing.assert_allclose(X.clock(X.clock.t), X.clock.t)


def test_constant_pssmp_gives_zero_levy():
    X = lamperti.to_pssmp(skeleton([0, 0, 0]), 1.0, 3.0)
    assert np.all(lamperti.to_levy(X).values == 0)


def test_pure_drift_converges_to_closed_form():
    # b = 1, alpha = 1, x = 1: X_t = 1 + t in continuous time
    def err(dt):
        X = lamperti.simulate(lm.LevySpec(drift=1.0), 1.0, 1.0, 3.0, dt, seed=0)
        t = np.linspace(0.1, 3.0, 30)
        return np.max(np.abs(X.value_at(t) - (1 + t)))

    e1, e2 = err(1e-2), err(5e-3)
    assert e2 < e1 < 0.05
    assert e1 / e2 == pytest.approx(2.0, rel=0.25)


@given(arrays(float, st.integers(2, 30), elements=st.floats(-4, 4)),
       st.sampled_from([1.0, 0.5, -1.0, 2.0]), st.floats(0.1, 10))
def test_round_trip(v, alpha, x):
    xi = skeleton(v, dt=0.1)
    X = lamperti.to_pssmp(xi, alpha, x)
    if X.collapsed:
        with pytest.raises(InconsistentInputs):
            lamperti.to_levy(X)
        return
    back = lamperti.to_levy(X)
    assert np.max(np.abs(back.values - xi.values)) <= 1e-12
    np.testing.assert_array_equal(back.times, xi.times)


def test_round_trip_with_events(models):
    xi = lm.sample_skeleton(models["cp"], 10.0, 1e-2, seed=1)
    back = lamperti.to_levy(lamperti.to_pssmp(xi, 1.0, 1.0))
    ev = xi.is_event
    assert np.max(np.abs(back.pre[ev] - xi.pre[ev])) <= 1e-12
    assert np.max(np.abs(back.values - xi.values)) <= 1e-12


def test_clock_strictly_increasing(models):
    X = lamperti.simulate(models["bm_drift"], 1.0, 1.0, 5.0, 1e-2, seed=2)
    assert np.all(np.diff(X.times) > 0)


def test_increment_stationarity(models):
    xi = lm.sample_skeleton(models["bm"], 20.0, 1e-2, seed=3)
    back = lamperti.to_levy(lamperti.to_pssmp(xi, 1.0, 1.0))
    inc = np.diff(back.values)
    half = len(inc) // 2
    assert stats.ks_two_sample(inc[:half], inc[half:]).p_value > 0.001


def test_absorption_time_converges(models):
    # alpha > 0 and xi -> -inf: x^alpha A_horizon increases to a finite limit
    spec = lm.dual(models["bm_drift"])
    vals = []
    for h in (5.0, 10.0, 20.0, 40.0):
        xi = lm.sample_skeleton(spec, h, 1e-2, seed=4)
        vals.append(lamperti.to_pssmp(xi, 1.0, 1.0).times[-1])
    d = np.diff(vals)
    assert np.all(d > 0) and d[-1] < 1e-3 * vals[-1]
    X = lamperti.to_pssmp(xi, 1.0, 1.0, drift=spec.mean())
    assert np.isfinite(X.T0) and not X.censored
    assert X.T0 - X.times[-1] == pytest.approx(X.tail)


def test_killed_process_absorbs():
    spec = lm.LevySpec(sigma=1.0, kill_rate=2.0)
    xi = lm.sample_skeleton(spec, 50.0, 1e-2, seed=5)
    assert xi.killed
    X = lamperti.to_pssmp(xi, 1.0, 1.0)
    assert X.T0 == X.times[-1]
    assert X.value_at(X.T0 + 1.0) == 0.0


def test_scaling_drift_only_exact():
    spec = lm.LevySpec(drift=1.0)
    reps = lamperti.check_scaling(spec, 1.0, 1.0, 2.0, [0.5, 1.0], 60, seed=1)
    assert all(r.statistic == 0.0 for r in reps)


def test_scaling_brownian(models):
    reps = lamperti.check_scaling(models["bm"], 1.0, 1.0, 2.0, [0.5, 1.0], 400, seed=1)
    assert all(r.p_value > 0.01 for r in reps)


def test_bad_inputs():
    with pytest.raises(ConfigError):
        lamperti.to_pssmp(skeleton([0, 1]), 1.0, -1.0)
    with pytest.raises(ConfigError):
        lamperti.to_pssmp(skeleton([0, 1]), 0.0, 1.0)


def test_deep_paths_collapse_but_keep_grid():
    xi = PathSkeleton(np.arange(4.0), np.array([0.0, -60.0, -60.0, 0.0]))
    X = lamperti.to_pssmp(xi, 1.0, 1.0)
    assert X.collapsed > 0
    assert len(X.grid_times) == 4
    assert math.isclose(X.grid_values[1], math.exp(-60))
