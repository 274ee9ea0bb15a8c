import math

import numpy as np
import pytest

from oracles import dufresne_entrance_gamma
from pssmp import conditioned as cond
from pssmp import fluctuation as fl
from pssmp import levy_model as lm
from pssmp import resolvent_entrance as rx
from pssmp import stats
from pssmp.errors import ArithmeticLattice, NonConvergent, RegularityViolation
from pssmp.functionals import test_function as tf

SUB = lm.LevySpec(drift=1.0, jump_rate=1.0, jump_law=lm.JumpLaw.two_sided_exponential(1.0, 2.0, 1.0))


@pytest.fixture(scope="module")
def bm_drift_pool(models):
    spec = models["bm_drift"]
    return fl.harvest_pool(spec, 1.0, 1e-2, 100.0, 20, seed=3)


def test_kappa_zero_subordinator():
    est = rx.kappa_estimator(SUB, 1.0, 0.0, 1e-2, seed=1, pool_horizon=20.0, pool_paths=3)
    a = fl.local_time_scale(SUB, 1e-2).a_eff
    for z in (0.5, 2.0):
        assert rx.kappa(est, z) == pytest.approx(a * z, rel=1e-12)


def test_kappa_zero_matches_renewal_vhat(bm_drift_pool):
    est = rx.KappaEstimator(0.0, 1.0, bm_drift_pool, 0.0)
    grid = np.linspace(0, 12, 2401)
    vh = fl.renewal_Vhat(bm_drift_pool, grid)
    mid = 0.5 * (grid[:-1] + grid[1:])
    f = tf("exp_neg")
    for z in (0.5, 2.0):
        want = vh.atom_at_0 * z * f(z) + np.sum(vh.mass * z * np.exp(-mid) * f(z * np.exp(-mid)))
        assert rx.kappa(est, z, "exp_neg") == pytest.approx(want, rel=5e-3)


def test_kappa_ratio_monotone_and_limit(bm_drift_pool):
    est = rx.KappaEstimator(1.0, 1.0, bm_drift_pool, 0.0)
    z = np.geomspace(1e-4, 20, 30)
    ratio = est.values(z, "one") / z
    assert np.all(np.diff(ratio) <= 1e-12)
    assert ratio[0] == pytest.approx(est.mean_Y1(), rel=1e-3)


@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_mean_y1_bm_drift(models, alpha):
    # with the ascending ladder height normalised to unit drift, the descending ladder
    # exponent of BM(mu) is (beta + 2 mu) / 2, so E(Y_1) = 2 / (alpha + 2 mu)
    spec = models["bm_drift"]
    pool = fl.harvest_pool(spec, alpha, 1e-3, 100.0, 20, seed=8)
    est = rx.KappaEstimator(1.0, alpha, pool, 0.0)
    assert est.mean_Y1() == pytest.approx(2.0 / (alpha + 2 * spec.drift), rel=0.05)


@pytest.mark.parametrize("q", [0.5, 2.0])
def test_resolvent_of_one(models, q):
    spec = models["bm_drift"]
    lad = rx.resolvent_via_ladder(spec, 1.0, 1.0, q, "one", 60, seed=1, batches=6, pool_horizon=30.0,
                                  pool_paths=6)
    dire = rx.resolvent_direct(spec, 1.0, 1.0, q, "one", 100, seed=1)
    for r in (lad, dire):
        assert abs(r["estimate"] - 1 / q) <= 3 * r["stderr"] + r["truncation_bound"] + 1e-12


def test_resolvent_pairwise(models):
    spec = models["cp"]
    lad = rx.resolvent_via_ladder(spec, 1.0, 1.0, 1.0, "exp_neg", 200, seed=2, batches=10,
                                  pool_horizon=30.0, pool_paths=10)
    dire = rx.resolvent_direct(spec, 1.0, 1.0, 1.0, "exp_neg", 400, seed=2)
    assert stats.pooled_z(lad["estimate"], lad["stderr"], dire["estimate"], dire["stderr"]) < 3


def test_resolvent_large_q(models):
    q = 200.0
    r = rx.resolvent_direct(models["bm_drift"], 1.0, 1.0, q, "exp_neg", 200, seed=3, dt=1e-3)
    assert q * r["estimate"] == pytest.approx(math.exp(-1.0), rel=0.02)


def test_resolvent_continuous_in_x(models):
    a = rx.resolvent_direct(models["bm_drift"], 1.0, 1.0, 1.0, "exp_neg", 300, seed=4)
    b = rx.resolvent_direct(models["bm_drift"], 1.0, 1.01, 1.0, "exp_neg", 300, seed=4)
    # common random numbers: the same Lévy paths drive both starting points
    assert abs(a["estimate"] - b["estimate"]) < 0.02 * a["estimate"]


def test_resolvent_zero_drift_only():
    spec = lm.LevySpec(drift=1.0)
    grid = np.linspace(0, 6, 3001)
    V = rx.ladder_renewal(spec, 1.0, 1e-3, 0, 2, grid)
    Vhat = fl.RenewalMeasureEstimate(grid, np.zeros(len(grid) - 1), np.zeros(len(grid) - 1), 1.0,
                                     "atom")
    # int_0^inf e^z exp(-e^z) dz = e^{-1}
    assert rx.resolvent_zero(V, Vhat, 1.0, 1.0, "exp_neg") == pytest.approx(math.exp(-1), rel=5e-3)


def test_resolvent_zero_against_direct(models, bm_drift_pool):
    spec = models["bm_drift"]
    V = rx.ladder_renewal(spec, 1.0, 1e-2, 5, 600, np.linspace(0, 6, 241))
    Vhat = fl.renewal_Vhat(bm_drift_pool, np.linspace(0, 10, 401))
    zero = rx.resolvent_zero(V, Vhat, 1.0, 1.0, "exp_neg")
    dire = rx.resolvent_direct(spec, 1.0, 1.0, 0.0, "exp_neg", 600, seed=6, until=200.0)
    assert abs(zero - dire["estimate"]) < 3 * dire["stderr"] + 0.03 * zero


def test_entrance_requirements():
    lattice = lm.LevySpec(jump_rate=1.0, jump_law=lm.JumpLaw.discrete([(1.0, 0.5), (-1.0, 0.5)]))
    with pytest.raises(ArithmeticLattice):
        rx.rh_entrance_law(lattice, 1.0, 1.0, "one", 10, 0)
    with pytest.raises(NonConvergent):
        rx.rh_entrance_law(lm.LevySpec(drift=-0.5, sigma=1.0), 1.0, 1.0, "one", 10, 0)
    bad = lm.LevySpec(drift=-1.0, jump_rate=2.0, jump_law=lm.JumpLaw.deterministic(1.0))
    with pytest.raises(RegularityViolation):
        rx.rh_entrance_law(bad, 1.0, 1.0, "one", 10, 0)


@pytest.fixture(scope="module")
def ih_pairs(models):
    return cond.sample_ih_pairs(models["bm_drift"], 1.0, 500, 1e-2, seed=7)


def test_rh_entrance_weights_normalise(ih_pairs):
    r = rx.inverse_ih_check(ih_pairs, 1.0)
    assert abs(r["ratio"] - 1) < 3 * r["stderr"]


def test_rh_entrance_time_scaling(ih_pairs):
    p1, w1 = rx.rh_entrance_samples(ih_pairs, 1.0, 1.0)
    p2, w2 = rx.rh_entrance_samples(ih_pairs, 1.0, 2.0)
    np.testing.assert_allclose(p2, p1 * np.array([2.0, 2.0]))
    np.testing.assert_array_equal(w1, w2)


def test_rh_entrance_against_small_x(models, ih_pairs):
    pts, w = rx.rh_entrance_samples(ih_pairs, 1.0, 1.0)
    sim = cond_free_small_x(models["bm_drift"])
    law = stats.EmpiricalLaw(pts[:, 1], w)
    assert stats.ks_two_sample(law, sim).p_value > 0.01


def cond_free_small_x(spec):
    from pssmp import ladder_process as lp
    s = lp.sample_rh(spec, 1.0, 1e-3, [1.0], 400, 1e-2, seed=8, construction="levy-triple")
    return s[:, 0, 1][np.isfinite(s[:, 0, 1])]


def test_dufresne_closed_form():
    assert rx.dufresne_entrance(0.5, 1.0, 1.0, 1.0, "exp_neg") == pytest.approx(4 / 9, rel=1e-8)
    for f in ("exp_neg", "inv1p", "tanh"):
        for mu, sigma, alpha, t in [(0.5, 1.0, 1.0, 1.0), (1.0, 0.7, 0.5, 2.0), (0.3, 1.2, 2.0, 0.5)]:
            want = dufresne_entrance_gamma(mu, sigma, alpha, t, tf(f))
            assert rx.dufresne_entrance(mu, sigma, alpha, t, f) == pytest.approx(want, rel=1e-6)


def test_bertoin_yor_matches_closed_form(models):
    r = rx.bertoin_yor(models["bm_drift"], 1.0, 1.0, "exp_neg", 600, seed=2, dt=1e-3)
    assert abs(r["estimate"] - 4 / 9) < 3 * r["stderr"] + 0.01


def test_entrance_measure_normalisation(models):
    e = rx.entrance_law_X(models["bm_drift"], 1.0, 1.0, ["exp_neg"], 400, seed=3, batches=10,
                          pool_horizon=40.0, pool_paths=10)
    assert abs(e["normalization"] - 1) < 3 * e["normalization_stderr"] + 0.01
    m = e["measure"]
    assert m.truncation_report["acceptance_rate"] == 1.0
    # the returned measure is a single batch, so its spread is sqrt(batches) wider
    one_batch = m.integrate(lambda x: 1.0 / x)
    assert abs(one_batch - e["normalization"]) < 3 * e["normalization_stderr"] * math.sqrt(10)


def test_laplace_duality_symmetric(models):
    for name in ("bm_drift", "cp"):
        res = rx.laplace_duality(models[name], 1.0, [(1.0, 2.0), (2.0, 1.0)], 200, seed=5)
        assert all(r["z"] < 3 for r in res)
