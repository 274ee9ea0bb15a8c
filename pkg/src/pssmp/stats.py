"""Empirical laws, two-sample tests and Monte Carlo error accounting."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import stats as _st

from .errors import TooFewSamples

MIN_SAMPLES = 50
N_DIRECTIONS = 8


@dataclass
class EmpiricalLaw:
    samples: np.ndarray
    weights: np.ndarray = None
    seed_provenance: list = field(default_factory=list)
    label: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape[0] != self.samples.shape[0]:
                raise ValueError("one weight per sample")
            if np.any(self.weights < 0) or not self.weights.sum() > 0:
                raise ValueError("weights must be nonnegative with positive sum")

    @property
    def n(self):
        return int(self.samples.shape[0])

    @property
    def bivariate(self):
        return self.samples.ndim == 2

    def effective_size(self):
        if self.weights is None:
            return self.n
        w = self.weights
        return float(w.sum() ** 2 / np.dot(w, w))


@dataclass
class TestReport:
    statistic: float
    p_value: float
    n1: int
    n2: int
    method: str
    level: float = 0.01
    extra: dict = field(default_factory=dict)

    __test__ = False

    @property
    def passed(self):
        return self.p_value > self.level

    def to_dict(self):
        d = asdict(self)
        d["pass"] = self.passed
        return d


def _as_law(x):
    return x if isinstance(x, EmpiricalLaw) else EmpiricalLaw(x)


def _weighted_ecdf(x, w, grid):
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], w[order]
    cw = np.cumsum(ws) / ws.sum()
    idx = np.searchsorted(xs, grid, side="right")
    return np.where(idx > 0, cw[np.maximum(idx - 1, 0)], 0.0)


def ks_two_sample(a, b, level=0.01):
    """Two-sample Kolmogorov–Smirnov test.

    Unweighted laws use scipy's exact/asymptotic p-value.  Weighted laws use
    the weighted ECDF distance with Kish effective sample sizes plugged into
    the asymptotic Kolmogorov distribution.
    """
    a, b = _as_law(a), _as_law(b)
    if a.n < MIN_SAMPLES or b.n < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples per side, got {a.n} and {b.n}")
    if a.weights is None and b.weights is None:
        res = _st.ks_2samp(a.samples, b.samples)
        return TestReport(float(res.statistic), float(res.pvalue), a.n, b.n, "KS", level)
    wa = a.weights if a.weights is not None else np.ones(a.n)
    wb = b.weights if b.weights is not None else np.ones(b.n)
    grid = np.concatenate([a.samples, b.samples])
    d = float(np.max(np.abs(_weighted_ecdf(a.samples, wa, grid) - _weighted_ecdf(b.samples, wb, grid))))
    na, nb = a.effective_size(), b.effective_size()
    en = math.sqrt(na * nb / (na + nb))
    p = float(_st.kstwobign.sf(d * en))
    return TestReport(d, min(1.0, p), a.n, b.n, "KS-weighted", level,
                      {"n_eff1": na, "n_eff2": nb})


def bivariate_test(a, b, level=0.01):
    """Projection KS on 8 fixed directions with Bonferroni correction.

    Each coordinate is first mapped through the pooled empirical CDF so the
    directions are scale-free; the procedure is conservative.
    """
    a, b = _as_law(a), _as_law(b)
    xa, xb = np.atleast_2d(a.samples), np.atleast_2d(b.samples)
    if xa.shape[1] != 2 or xb.shape[1] != 2:
        raise ValueError("bivariate test needs (n, 2) samples")
    if len(xa) < MIN_SAMPLES or len(xb) < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples per side")
    pooled = np.vstack([xa, xb])
    ua = np.empty_like(xa)
    ub = np.empty_like(xb)
    for j in range(2):
        ref = np.sort(pooled[:, j])
        ua[:, j] = np.searchsorted(ref, xa[:, j], side="right") / len(ref)
        ub[:, j] = np.searchsorted(ref, xb[:, j], side="right") / len(ref)
    pvals, stats_ = [], []
    for k in range(N_DIRECTIONS):
        th = k * math.pi / N_DIRECTIONS
        u = np.array([math.cos(th), math.sin(th)])
        res = _st.ks_2samp(ua @ u, ub @ u)
        pvals.append(float(res.pvalue))
        stats_.append(float(res.statistic))
    p = min(1.0, N_DIRECTIONS * min(pvals))
    return TestReport(max(stats_), p, len(xa), len(xb), "bivariate-KS-rotations", level,
                      {"direction_p_values": pvals})


def _pairwise_fsum(x):
    return math.fsum(x.tolist())


def mc_mean(samples, weights=None):
    """Weighted mean and its standard error.

    Sums are exactly rounded (``math.fsum``), so the result does not depend
    on the order or partition in which samples were produced.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = len(x)
    if n == 0:
        raise TooFewSamples("no samples")
    if weights is None:
        mean = _pairwise_fsum(x) / n
        if n < 2:
            return mean, float("nan")
        var = _pairwise_fsum((x - mean) ** 2) / (n - 1)
        return mean, math.sqrt(var / n)
    w = np.asarray(weights, dtype=float).ravel()
    sw = _pairwise_fsum(w)
    mean = _pairwise_fsum(w * x) / sw
    # ratio-estimator linearisation
    resid = w * (x - mean) / (sw / n)
    var = _pairwise_fsum(resid ** 2) / (n - 1) if n > 1 else float("nan")
    return mean, math.sqrt(var / n)


def ratio_mean(num, den):
    """Ratio of sums sum(num)/sum(den) with a delta-method standard error."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = len(num)
    r = _pairwise_fsum(num) / _pairwise_fsum(den)
    dbar = _pairwise_fsum(den) / n
    resid = (num - r * den) / dbar
    se = math.sqrt(_pairwise_fsum(resid ** 2) / (n - 1) / n) if n > 1 else float("nan")
    return r, se


def pooled_z(est1, se1, est2, se2):
    """Gap between two independent estimates in units of pooled standard error."""
    se = math.hypot(se1, se2)
    if se == 0:
        return 0.0 if est1 == est2 else math.inf
    return abs(est1 - est2) / se


def parallel_map(fn, items, threads=1):
    """Ordered map over ``items``; results never depend on ``threads``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def calibrate_ks(sampler, n, repeats, seed, level=0.01):
    """Null rejection rate of the KS test over ``repeats`` independent pairs.

    ``sampler(seed, n)`` must return ``n`` draws.  Returns the rejection
    rate and the median p-value.
    """
    from . import rng as _rng

    pv = []
    for r in range(repeats):
        s1 = _rng.derive(seed, r, 0)
        s2 = _rng.derive(seed, r, 1)
        pv.append(ks_two_sample(sampler(s1, n), sampler(s2, n), level).p_value)
    pv = np.array(pv)
    return float(np.mean(pv <= level)), float(np.median(pv))
