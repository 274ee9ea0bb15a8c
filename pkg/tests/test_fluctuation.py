import math

import numpy as np
import pytest

from conftest import skeleton
from oracles import gaussian_walk_first_ladder, kou_excursion_laplace
from pssmp import fluctuation as fl
from pssmp import levy_model as lm
from pssmp import resolvent_entrance as rx
from pssmp.errors import RegularityViolation


def sup_scale(a):
    return fl.LocalTimeScale("sup-time", a, a, math.nan, 1.0, "test")


def test_increasing_path_all_epochs():
    d = fl.decompose(skeleton([0, 1, 2, 3, 4]), 1.0, sup_scale(0.5))
    assert d.n_segments == 5
    assert d.excursions == []
    np.testing.assert_allclose(d.Ycum, 0.5 * d.C)


def test_decreasing_path_single_segment():
    d = fl.decompose(skeleton([0, -1, -2, -3]), 1.0, sup_scale(1.0))
    assert d.n_segments == 1
    assert np.all(d.eps[1:] > 0)
    assert d.dY[0] == pytest.approx(1 + math.exp(-1) + math.exp(-2))


def test_simultaneous_jumps(models):
    # jumps of L^{-1}, h and Y are all indexed by the same epochs
    xi = lm.sample_skeleton(models["cp"], 10.0, 1e-2, seed=4)
    d = fl.decompose(xi, 1.0, fl.local_time_scale(models["cp"], 1e-2))
    assert len(d.S) == len(d.h) == len(d.dl) == len(d.dY) == d.n_segments
    assert np.all(np.diff(d.S) > 0) and np.all(np.diff(d.h) > 0)


def test_occupation_identity_exact(models):
    spec = models["cp"]
    sc = fl.local_time_scale(spec, 1e-2)
    d = fl.decompose(lm.sample_skeleton(spec, 30.0, 1e-2, seed=9), 1.0, sc)
    at_sup = math.fsum(d.ds[d.eps == 0].tolist())
    assert at_sup == pytest.approx(sc.a_eff * d.C[-1], rel=1e-12)


def test_kou_wang_scale_against_event_simulation(models):
    spec = models["cp"]
    law = spec.jump_law
    e = kou_excursion_laplace(spec.drift, spec.jump_rate, law.p_up, law.rate_up, law.rate_down,
                              20_000, seed=1)
    down = spec.jump_rate * law.prob_down()
    a_mc = 1 / (1 + down * (1 - e.mean()))
    se = a_mc ** 2 * down * e.std(ddof=1) / math.sqrt(len(e))
    assert abs(fl.kou_wang_scale(spec) - a_mc) < 4 * se
    assert fl.kou_wang_scale(spec) == pytest.approx(0.79618, abs=5e-6)


@pytest.mark.parametrize("mu,dt", [(0.5, 0.01), (0.5, 0.25), (-0.5, 0.25), (0.0, 0.25)])
def test_gaussian_ladder_against_walks(mu, dt):
    tau, h = gaussian_walk_first_ladder(mu, 1.0, dt, 40_000, 4000, seed=3, kill_depth=25.0)
    ok = np.isfinite(tau)
    if mu == 0:
        # mean ladder time is infinite; heights of walks that made it are not biased much
        assert fl.gaussian_mean_ladder_height(mu, 1.0, dt) == pytest.approx(math.sqrt(dt / 2))
    got = fl.gaussian_mean_ladder_height(mu, 1.0, dt)
    se = h[ok].std(ddof=1) / math.sqrt(ok.sum())
    assert abs(h[ok].mean() - got) < 4 * se + (0.01 * got if mu == 0 else 0.0)
    for lam in (0.5, 2.0):
        e = np.where(ok, np.exp(-lam * dt * np.where(ok, tau, 0)), 0.0)
        exact = fl.spitzer_ladder_laplace(mu, 1.0, dt, lam)
        assert abs(e.mean() - exact) < 4 * e.std(ddof=1) / math.sqrt(len(e)) + 1e-3


def test_ladder_height_rate_bm_drift(models):
    assert fl.ladder_height_rate(models["bm_drift"]) == pytest.approx(1.0)
    # symmetric BM: phi(lambda) = sqrt(lambda) and h = L / sqrt(2) in this normalisation
    assert fl.ladder_height_rate(models["bm"]) == pytest.approx(1 / math.sqrt(2))


def test_renewal_estimators_agree(models):
    spec = models["bm_drift"]
    grid = np.linspace(0, 1.5, 7)
    pool = fl.harvest_pool(spec, 1.0, 1e-2, 50.0, 40, seed=1)
    a = fl.renewal_Vhat(pool, grid)
    b = rx.ladder_renewal(lm.dual(spec), 1.0, 1e-2, 2, 300, grid)
    z = np.abs(a.mass - b.mass) / np.hypot(a.stderr, b.stderr)
    assert np.all(z < 3.5)
    assert abs(a.atom_at_0 - b.atom_at_0) < 0.02


def test_renewal_atom_iff_a_positive(models):
    grid = np.linspace(0, 1, 5)
    cp = fl.renewal_Vhat(fl.harvest_pool(models["cp"], 1.0, 1e-2, 30.0, 5, seed=1), grid)
    assert cp.atom_at_0 == pytest.approx(fl.kou_wang_scale(models["cp"]), rel=1e-9)
    # in the diffusive case the atom is a grid artefact that vanishes with dt
    atoms = [fl.renewal_Vhat(fl.harvest_pool(models["bm_drift"], 1.0, dt, 20.0, 5, seed=1), grid).atom_at_0
             for dt in (1e-2, 1e-3)]
    assert atoms[1] < atoms[0] / 2


def test_subordinator_vhat_is_atom_only():
    spec = lm.LevySpec(drift=1.0, jump_rate=1.0, jump_law=lm.JumpLaw.deterministic(0.5))
    sc = fl.local_time_scale(spec, 1e-2)
    pool = fl.harvest_pool(spec, 1.0, 1e-2, 10.0, 3, seed=1, scale=sc)
    est = fl.renewal_Vhat(pool, np.linspace(0, 1, 5))
    assert np.all(est.mass == 0)
    assert est.atom_at_0 == pytest.approx(sc.a_eff)


def test_occupation_localtime_converges(models):
    spec = models["bm_drift"]
    dt = 2.0 ** -16
    sc = fl.local_time_scale(spec, dt)
    eps = [2.0 ** -k for k in (2, 3, 4, 5)]
    vh, _ = fl.renewal_Vhat_levels(spec, dt, eps, 8, 2.0, seed=1, scale=sc)
    errs = []
    for i in range(3):
        d = fl.decompose(lm.sample_skeleton(spec, 2.0, dt, seed=2, path_index=i), 1.0, sc)
        out, L = fl.occupation_localtime(d, eps, lambda e: vh[eps.index(e)])
        errs.append([o["sup_error"] / L[-1] for o in out])
    mean = np.mean(errs, axis=0)
    assert np.all(np.diff(mean) < 0)


def test_occupation_wide_eps_degenerate(models):
    d = fl.decompose(skeleton([0, -0.1, 0.2, 0.1]), 1.0, sup_scale(1.0))
    out, _ = fl.occupation_localtime(d, [100.0], lambda e: 2.0)
    np.testing.assert_allclose(out[0]["curve"], d.xi.times / 2.0)


def test_wiener_hopf_small_budget(models):
    r = fl.wiener_hopf_check(models["bm"], [0.5, 1.0, 2.0], 600, 0.02, seed=1)
    ratios = [row["ratio"] for row in r["rows"]]
    assert ratios[1] == 1.0
    assert all(abs(x - 1) < 0.15 for x in ratios)
    # phi equals phihat in law for BM, so phi(lambda) is close to sqrt(lambda)
    phi = r["rows"][2]["phi"]
    assert phi == pytest.approx(math.sqrt(2), rel=0.1)


def test_exact_discrete_bias_ladder(models):
    spec = models["bm"]
    gaps = []
    for dt in (0.04, 0.01, 0.0025):
        dl = fl.local_time_scale(spec, dt).dl_epoch
        raw = {lam: fl.spitzer_phi_raw(0.0, 1.0, dt, lam, dl) for lam in (0.5, 1.0)}
        gaps.append(abs((raw[0.5] / raw[1.0]) ** 2 / 0.5 - 1))
    # O(sqrt(dt)): each quartering of dt halves the gap
    assert gaps[1] / gaps[0] == pytest.approx(0.5, abs=0.03)
    assert gaps[2] / gaps[1] == pytest.approx(0.5, abs=0.03)
    assert gaps[0] == pytest.approx(1 - 0.94467, abs=2e-4)


def test_irregular_model_rejected():
    spec = lm.LevySpec(drift=-1.0, jump_rate=1.0, jump_law=lm.JumpLaw.deterministic(1.0))
    with pytest.raises(RegularityViolation):
        fl.local_time_scale(spec, 1e-2)


def test_inverse_local_time_roundtrip(models):
    d = fl.decompose(lm.sample_skeleton(models["cp"], 20.0, 1e-2, seed=3), 1.0,
                     fl.local_time_scale(models["cp"], 1e-2))
    ell = np.linspace(0, d.C[-2], 50)
    s = d.inverse_local_time(ell)
    np.testing.assert_allclose(d.local_time_at(s), ell, atol=1e-9)


def test_count_scale_matches_walk(models):
    # count mode: every epoch carries E[h_1] / (ladder height rate)
    sc = fl.local_time_scale(models["bm_drift"], 0.01)
    tau, h = gaussian_walk_first_ladder(0.5, 1.0, 0.01, 20_000, 4000, seed=5)
    assert sc.dl_epoch == pytest.approx(np.nanmean(h) / fl.ladder_height_rate(models["bm_drift"]),
                                        rel=0.03)
