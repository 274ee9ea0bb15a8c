import numpy as np
import pytest
from hypothesis import given, strategies as st

from pssmp import levy_model as lm
from pssmp.errors import BudgetExceeded, ConfigError, UnsupportedSpec


def test_classify_brownian():
    r = lm.classify(lm.LevySpec(sigma=1.0))
    assert (r.reg_up, r.reg_down, r.drifts_to, r.a_positive) == (True, True, "oscillates", False)


def test_classify_drift_with_negative_jumps():
    spec = lm.LevySpec(drift=1.0, jump_rate=1.0, jump_law=lm.JumpLaw.deterministic(-0.5))
    r = lm.classify(spec)
    assert r.reg_up and not r.reg_down and r.a_positive and r.drifts_to == "+inf"


def test_classify_negative_drift_bm():
    assert lm.classify(lm.LevySpec(drift=-1.0, sigma=1.0)).drifts_to == "-inf"


def test_pure_drift_skeleton():
    xi = lm.sample_skeleton(lm.LevySpec(drift=1.0), 2.0, 0.5, seed=3)
    np.testing.assert_allclose(xi.values, [0, 0.5, 1, 1.5, 2])
    np.testing.assert_allclose(xi.times, [0, 0.5, 1, 1.5, 2])


def test_degenerate_spec_rejected():
    with pytest.raises(ConfigError):
        lm.LevySpec()


def test_unknown_jump_family():
    with pytest.raises(UnsupportedSpec):
        lm.JumpLaw("stable")


def test_skeleton_deterministic(models):
    for spec in models.values():
        a = lm.sample_skeleton(spec, 3.0, 1e-2, seed=11, path_index=4)
        b = lm.sample_skeleton(spec, 3.0, 1e-2, seed=11, path_index=4)
        assert a == b
        assert a.to_bytes() == b.to_bytes()


def test_paths_differ_across_indices(models):
    spec = models["bm"]
    a = lm.sample_skeleton(spec, 1.0, 1e-2, seed=11, path_index=0)
    b = lm.sample_skeleton(spec, 1.0, 1e-2, seed=11, path_index=1)
    assert not np.array_equal(a.values, b.values)


def test_budget_cap():
    with pytest.raises(BudgetExceeded):
        lm.sample_skeleton(lm.LevySpec(sigma=1.0), 100.0, 1e-3, seed=0, max_steps=1000)


def test_dual_examples():
    spec = lm.LevySpec(drift=1.0, sigma=0.5, jump_rate=2.0,
                       jump_law=lm.JumpLaw.two_sided_exponential(0.3, 2.0, 1.5))
    d = lm.dual(spec)
    assert d.drift == -1.0
    assert d.jump_law.p_up == pytest.approx(0.7)
    assert (d.jump_law.rate_up, d.jump_law.rate_down) == (1.5, 2.0)
    assert lm.dual(d) == spec


@given(drift=st.floats(-3, 3), sigma=st.floats(0, 2), p_up=st.floats(0, 1),
       jumps=st.booleans())
def test_dual_swaps_regularity(drift, sigma, p_up, jumps):
    law = lm.JumpLaw.two_sided_exponential(p_up, 1.0, 2.0) if jumps else None
    if not (sigma > 0 or drift != 0 or jumps):
        return
    spec = lm.LevySpec(drift=drift, sigma=sigma, jump_rate=1.0 if jumps else 0.0, jump_law=law)
    r, rd = lm.classify(spec), lm.classify(lm.dual(spec))
    assert (rd.reg_up, rd.reg_down) == (r.reg_down, r.reg_up)
    flip = {"+inf": "-inf", "-inf": "+inf", "oscillates": "oscillates"}
    assert rd.drifts_to == flip[r.drifts_to]


def test_spec_roundtrip_dict(models):
    for spec in models.values():
        assert lm.LevySpec.from_dict(spec.to_dict()) == spec


@pytest.mark.parametrize("name", ["bm_drift", "cp", "bm"])
def test_moment_gate(models, name):
    spec = models[name]
    T, n = 2.0, 400
    ends = np.array([lm.sample_skeleton(spec, T, 1e-2, seed=5, path_index=i).values[-1]
                     for i in range(n)]) / T
    se = ends.std(ddof=1) / np.sqrt(n)
    assert abs(ends.mean() - spec.mean()) < 4 * se


def test_jump_events_keep_peaks(models):
    xi = lm.sample_skeleton(models["cp"], 20.0, 0.1, seed=2)
    ev = xi.is_event
    assert ev.any()
    assert np.all(np.isfinite(xi.pre[ev]))


def test_arithmetic_detection():
    lattice = lm.LevySpec(jump_rate=1.0, jump_law=lm.JumpLaw.discrete([(1.0, 0.5), (-2.0, 0.5)]))
    assert lm.is_arithmetic(lattice)
    off = lm.LevySpec(jump_rate=1.0, jump_law=lm.JumpLaw.discrete([(1.0, 0.5), (-2 ** 0.5, 0.5)]))
    assert not lm.is_arithmetic(off)
    assert not lm.is_arithmetic(lm.LevySpec(sigma=1.0))
