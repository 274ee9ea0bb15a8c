"""Ladder objects of the pssMp: the local time at the supremum, its inverse
R, the ladder height H and the clock K.

Two constructions of (K, R, H) are provided.  ``build_direct`` works on the
pssMp path: it integrates X**beta against local time to get the local time
``L_theta`` of X at its supremum and inverts it.  ``build_from_triple`` only
uses the ladder data of the Lévy path (inverse local time, ladder height
and the clock Y) and a time change by x**beta * int exp(beta h) dl.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import fluctuation as fl
from . import functionals as fn
from . import lamperti
from . import levy_model as lm
from . import rng as _rng
from . import stats
from .errors import ConfigError, DeadPath, InconsistentInputs, RegularityViolation
from .pathkit import IncreasingFn, right_inverse


@dataclass
class LThetaCurve:
    times: np.ndarray     # X-time knots
    values: np.ndarray    # L_theta at the knots
    terminal: float       # value at T0 (inf if the path never stops accruing)

    def as_function(self):
        return IncreasingFn(self.times, self.values, "linear")


@dataclass
class LadderTriple:
    t_grid: np.ndarray
    K: np.ndarray
    R: np.ndarray
    H: np.ndarray
    construction: str
    beta: float
    clock_C: IncreasingFn = None

    def to_csv(self, fh):
        fh.write("t,K,R,H\n")
        for row in zip(self.t_grid, self.K, self.R, self.H):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _check(X, decomp):
    if len(decomp.xi.times) != len(X.clock.t) or not np.array_equal(decomp.xi.times, X.clock.t):
        raise InconsistentInputs("decomposition was not built from this pssMp path")


def ltheta(X, decomp, beta=None):
    """L_theta on the X-time knots: sum of X**beta times local-time increments.

    Local time of a segment accrues linearly over its interval at the
    supremum, so the curve is piecewise linear in X-time.
    """
    _check(X, decomp)
    beta = X.alpha if beta is None else beta
    n = len(decomp.seg)
    Xv = X.grid_values[:n]
    ep = decomp.epoch_idx
    inc = Xv[ep] ** beta * decomp.dl
    cum = np.concatenate([[0.0], np.cumsum(inc)])
    k = np.arange(n)
    j = decomp.seg
    vals = cum[j] + np.where(k > ep[j], inc[j], 0.0)
    times = X.grid_times[:n]
    if X.path.killed:
        times = X.grid_times
        vals = np.append(vals, cum[-1])
    terminal = float(cum[-1]) if (decomp.final or X.path.killed) else math.inf
    return LThetaCurve(times, vals, terminal)


def terminal_from_decomposition(decomp, x, alpha):
    """x**alpha * int_0^{L_inf} exp(alpha h_s) ds from the ladder data alone."""
    return float(x ** alpha * math.fsum((np.exp(alpha * decomp.h) * decomp.dl).tolist()))


def occupation_identity(X, decomp, beta=None):
    """Time spent at the supremum by X, and a * L_theta, at every knot."""
    curve = ltheta(X, decomp, beta)
    n = len(decomp.seg)
    dT = np.diff(X.grid_times)[:n] if X.path.killed else np.append(np.diff(X.grid_times), 0.0)[:n]
    at = decomp.eps == 0
    lhs = np.concatenate([[0.0], np.cumsum(np.where(at, dT, 0.0))])[:len(curve.values)]
    return lhs, decomp.scale.a_eff * curve.values


def occupation_ltheta(X, decomp, eps_list, vhat):
    """(1/V(log(1+eps))) * X-time spent with M/X in [1, 1+eps), per eps.

    Returns one dict per eps with the curve and the sup-norm distance to
    L_theta, plus the L_theta curve itself.
    """
    if decomp.scale.mode == "sup-time" and decomp.scale.a_eff <= 0:
        raise RegularityViolation("0 must be regular for (0, inf)")
    curve = ltheta(X, decomp)
    n = len(decomp.seg)
    dT = np.append(np.diff(X.grid_times), 0.0)[:n]
    out = []
    for e in eps_list:
        lvl = math.log1p(e)
        occ = np.concatenate([[0.0], np.cumsum(np.where(decomp.eps < lvl, dT, 0.0))])[:len(curve.values)]
        approx = occ / vhat(lvl)
        out.append({"eps": float(e), "curve": approx,
                    "sup_error": float(np.max(np.abs(approx - curve.values)))})
    return out, curve


def _k_from_x(X, r):
    """int_0^r X_s**-alpha ds, the Lévy time at X-time r."""
    t, v = X.grid_times, X.grid_values
    r = min(r, t[-1])
    k = int(np.searchsorted(t, r, side="right"))
    dT = np.diff(np.append(t[:k], r))
    return math.fsum((v[:k] ** -X.alpha * dT).tolist())


def build_direct(X, decomp, t_grid, beta=None):
    """(K, R, H) from the pssMp path: R right inverse of L_theta, H = X at R."""
    curve = ltheta(X, decomp, beta)
    f = curve.as_function()
    t_grid = np.asarray(t_grid, dtype=float)
    R = np.atleast_1d(right_inverse(f, t_grid))
    if np.any(~np.isfinite(R)) and not (decomp.final or X.path.killed):
        raise DeadPath("local time does not reach the requested level on this window")
    H = np.empty_like(R)
    K = np.empty_like(R)
    for i, r in enumerate(R):
        if not np.isfinite(r):
            H[i], K[i] = 0.0, math.inf
            continue
        k = int(np.searchsorted(X.grid_times, r, side="right")) - 1
        H[i] = X.grid_values[k]
        K[i] = _k_from_x(X, r)
    return LadderTriple(t_grid, K, R, H, "direct", X.alpha if beta is None else beta)


def build_from_triple(decomp, alpha, x, t_grid, beta=None):
    """(K, R, H) from (L^{-1}, h, Y) time-changed by the inverse of x**beta int exp(beta h) dl.

    R is assembled from the Stieltjes sum x**alpha sum exp(alpha h) dY; the
    path's own clock A is never consulted.
    """
    beta = alpha if beta is None else beta
    t_grid = np.asarray(t_grid, dtype=float)
    h, dl, dY = decomp.h, decomp.dl, decomp.dY
    sup_ds = decomp.sup_durations
    theta = x ** beta * np.exp(beta * h) * dl
    Ctheta = np.concatenate([[0.0], np.cumsum(theta)])
    clock = IncreasingFn(np.concatenate([[0.0], np.cumsum(dl)]), Ctheta, "linear")
    ystep = np.exp(alpha * h) * dY
    Rstart = x ** alpha * np.concatenate([[0.0], np.cumsum(ystep)])
    j = np.searchsorted(Ctheta, t_grid, side="right") - 1
    n = len(h)
    R = np.full(len(t_grid), math.inf)
    K = np.full(len(t_grid), math.inf)
    H = np.zeros(len(t_grid))
    ok = j < n
    jj = j[ok]
    # inside the sup interval of segment j local time runs at rate dl/ds
    frac = np.where(theta[jj] > 0, (t_grid[ok] - Ctheta[jj]) / np.where(theta[jj] > 0, theta[jj], 1), 0.0)
    R[ok] = Rstart[jj] + x ** alpha * np.exp(alpha * h[jj]) * frac * sup_ds[jj]
    K[ok] = decomp.S[jj] + frac * sup_ds[jj]
    H[ok] = x * np.exp(h[jj])
    if np.any(~ok) and not (decomp.final or decomp.xi.killed):
        raise DeadPath("local time does not reach the requested level on this window")
    return LadderTriple(t_grid, K, R, H, "levy-triple", beta, clock)


# ---------------------------------------------------------------------------
# sampling (R_t, H_t)


def simulate_until_ltheta(spec, alpha, x, level, dt, seed, path_index, scale, beta=None,
                          cap=400.0):
    """Extend a Lévy path until L_theta exceeds ``level`` or Lévy time ``cap``.

    Returns the skeleton and a flag telling whether the level was reached.
    """
    beta = alpha if beta is None else beta
    ps = lm.PathStream(spec, dt, seed, path_index)
    top = -math.inf
    prev_ep = False
    acc = 0.0
    xb = x ** beta
    while ps.horizon < cap and ps.horizon < ps.lifetime:
        ps.extend()
        t, v = ps.last_block()
        m = np.maximum.accumulate(np.maximum(v, top))
        ep = v == m
        if ps.blocks > 1:
            ep[0] = prev_ep
        ds = np.diff(t)
        sel = ep[:-1]
        dl = scale.increments(ds[sel])
        acc += float(np.sum(xb * np.exp(beta * v[:-1][sel]) * dl))
        top = float(m[-1])
        prev_ep = bool(ep[-1])
        if acc > level:
            return ps.skeleton(), True
    return ps.skeleton(), False


def sample_rh(spec, alpha, x, t_list, n, dt, seed, construction="direct", beta=None,
              cap=400.0, scale=None, threads=1):
    """Samples of (R_t, H_t) at each t; censored draws are returned as inf.

    Returns an array of shape (n, len(t_list), 2).
    """
    scale = scale or fl.local_time_scale(spec, dt, seed)
    t_list = np.asarray(t_list, dtype=float)
    tmax = float(t_list.max())

    def one(i):
        xi, ok = simulate_until_ltheta(spec, alpha, x, tmax, dt, seed, i, scale, beta, cap)
        d = fl.decompose(xi, alpha, scale, final=not ok)
        if construction == "direct":
            X = lamperti.to_pssmp(xi, alpha, x)
            tr = build_direct(X, d, t_list, beta)
        else:
            tr = build_from_triple(d, alpha, x, t_list, beta)
        out = np.stack([tr.R, tr.H], axis=1)
        out[~np.isfinite(tr.R)] = math.inf
        return out

    return np.array(stats.parallel_map(one, range(n), threads))


def censor_map(pairs):
    """Map (R, H) into [0,1]^2; censored draws go to the corner (1, 1)."""
    pairs = np.asarray(pairs, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.where(np.isfinite(pairs), pairs / (1.0 + pairs), 1.0)


def check_scaling_RH(spec, alpha, x, c, t_list, n, seed, dt=1e-3, beta=None, cap=400.0,
                     threads=1, level=0.01):
    """Bivariate tests of (c**alpha R_{t c**-beta}, c H_{t c**-beta}) from x vs (R_t, H_t) from c x."""
    beta = alpha if beta is None else beta
    scale = fl.local_time_scale(spec, dt, seed)
    t_list = np.asarray(t_list, dtype=float)
    a = sample_rh(spec, alpha, x, t_list * c ** (-beta), n, dt, _rng.derive(seed, 1), "direct",
                  beta, cap, scale, threads)
    b = sample_rh(spec, alpha, c * x, t_list, n, dt, _rng.derive(seed, 2), "direct",
                  beta, cap * 1.0, scale, threads)
    reports = []
    for k in range(len(t_list)):
        sa = a[:, k, :] * np.array([c ** alpha, c])
        reports.append(stats.bivariate_test(censor_map(sa), censor_map(b[:, k, :]), level))
    return reports


# ---------------------------------------------------------------------------
# exit formula


def _exit_paths(spec, alpha, x, t, dt, seed, n, scale, threads):
    """Decompositions of paths covering X-time t, closed at the first new maximum afterwards."""

    def one(i):
        ps = lm.PathStream(spec, dt, seed, i)
        acc = 0.0
        while True:
            ps.extend()
            tt, v = ps.last_block()
            acc += float(np.dot(np.exp(alpha * v[:-1]), np.diff(tt)))
            if x ** alpha * acc >= t:
                break
        full = ps.skeleton()
        A = np.concatenate([[0.0], np.cumsum(np.exp(alpha * full.values[:-1]) * np.diff(full.times))])
        k_t = int(np.searchsorted(x ** alpha * A, t, side="right"))
        top = float(np.max(full.values[:k_t]))
        while True:
            hit = np.flatnonzero((np.arange(len(full.values)) >= k_t) & (full.values >= top))
            if len(hit):
                xi = ps.skeleton(full.times[hit[0]])
                break
            ps.extend()
            full = ps.skeleton()
        return fl.decompose(xi, alpha, scale)

    return stats.parallel_map(one, range(n), threads)


def exit_formula_check(spec, alpha, x, F_id, V_id, n, seed, dt=1e-3, t=1.0, pool_horizon=200.0,
                       pool_paths=40, batches=10, threads=1, params=None):
    """Both sides of the exit formula for one catalogue functional.

    Left side: sum over excursions of X below its maximum that start by X-time
    ``t`` of V * F.  Right side: sum over the same paths' ladder epochs of the
    local time increment times the excursion-measure integral of F at level
    M_G, the latter estimated from an independent excursion pool.  The
    excursion start G is placed at the epoch knot preceding the departure.
    """
    if pool_paths < batches:
        raise ConfigError("the excursion pool needs at least one path per batch")
    F = fn.exit_functional(F_id, dict(params or {}, alpha=alpha))
    V = fn.exit_weight(V_id, t)
    scale = fl.local_time_scale(spec, dt, seed)
    decs = _exit_paths(spec, alpha, x, t, dt, _rng.derive(seed, 1), n, scale, threads)
    pool_seed = _rng.derive(seed, 2)
    pool = fl.harvest_pool(spec, alpha, dt, pool_horizon, pool_paths, pool_seed, scale,
                           threads=threads)
    feats = fn.pool_excursion_features(pool)

    lhs = np.zeros(n)
    rhs = np.zeros(n)
    for i, d in enumerate(decs):
        nseg = d.n_segments - 1
        A = np.concatenate([[0.0], np.cumsum(np.exp(alpha * d.xi.values[:-1]) * np.diff(d.xi.times))])
        G = x ** alpha * A[d.epoch_idx[:nseg]]
        w = V(G)
        Mg = x * np.exp(d.h[:nseg])
        own = fn.decomposition_features(d, nseg)
        lhs[i] = math.fsum((w * F.pathwise(Mg, own)).tolist())
        rhs[i] = math.fsum((w * d.dl[:nseg] * F.measure(Mg, feats, pool.L)).tolist())
    lhs_m, lhs_se = stats.mc_mean(lhs)
    rhs_m, rhs_path_se = stats.mc_mean(rhs)
    # pool uncertainty from disjoint sub-pools
    sub = []
    for b in range(batches):
        sel = feats["path"] % batches == b
        Lb = math.fsum(feats["dl"][sel].tolist())
        subf = {k: v[sel] for k, v in feats.items()}
        tot = 0.0
        for d in decs:
            nseg = d.n_segments - 1
            A = np.concatenate([[0.0], np.cumsum(np.exp(alpha * d.xi.values[:-1]) * np.diff(d.xi.times))])
            G = x ** alpha * A[d.epoch_idx[:nseg]]
            Mg = x * np.exp(d.h[:nseg])
            tot += float(np.sum(V(G) * d.dl[:nseg] * F.measure(Mg, subf, Lb)))
        sub.append(tot / n)
    pool_se = float(np.std(sub, ddof=1) / math.sqrt(batches))
    rhs_se = math.hypot(rhs_path_se, pool_se)
    z = stats.pooled_z(lhs_m, lhs_se, rhs_m, rhs_se)
    return {"F": F_id, "V": V_id, "lhs": lhs_m, "lhs_se": lhs_se, "rhs": rhs_m, "rhs_se": rhs_se,
            "rel_gap": abs(lhs_m - rhs_m) / max(abs(rhs_m), 1e-300) if rhs_m else 0.0,
            "z": z, "n_paths": n, "pool_segments": pool.n_segments, "pool_dropped": pool.dropped}
