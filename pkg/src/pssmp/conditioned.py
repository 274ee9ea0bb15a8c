"""The Lévy process conditioned to stay positive, built pathwise, and the
exponential functionals that go with it.

Discrete convention: an excursion interval runs from an epoch knot to the
next epoch, so the interval spent at the supremum belongs to the
excursion that follows it.  With this convention

    W_inf = sum_j exp(-alpha h_{j+1}) dY_j

equals the integral of exp(-alpha * xi_up) along the pasted path exactly,
and e^{-alpha h} * int e^{alpha h_-} dY reversed in local time is W.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import fluctuation as fl
from . import levy_model as lm
from . import stats
from .errors import DivergenceDetected, EmptyPath, NonConvergent
from .pathkit import PathSkeleton, exp_integral


@dataclass
class ConditionedPath:
    path: PathSkeleton
    horizon: float
    construction: str
    future_inf: PathSkeleton
    tail_corrected: bool = False

    def exp_integral(self, alpha):
        return exp_integral(self.path, -alpha)


@dataclass
class WCurve:
    t_grid: np.ndarray      # local time at the end of each completed segment
    W: np.ndarray
    T: np.ndarray           # Y with every jump discounted by exp(-alpha * dh)
    I_tilde: float
    truncation_bound: float


def doney_tanaka(xi):
    """Paste the time-reversed excursions on top of the level they end at.

    On the excursion interval [g, d) of each completed segment the output
    is sup_{d} + (sup - xi)((g + d - t)-); the incomplete last segment is
    dropped, so the output ends at the last epoch.
    """
    v = xi.values
    if len(v) < 2:
        raise EmptyPath("need at least one interval")
    M = np.maximum.accumulate(v)
    ep = np.flatnonzero(v == M)
    if len(ep) < 2:
        raise EmptyPath("no completed excursion interval on this path")
    t = xi.times
    k = np.arange(ep[0], ep[-1])
    seg = np.searchsorted(ep, k, side="right") - 1
    g, d = t[ep[seg]], t[ep[seg + 1]]
    # knot k held on [t_k, t_{k+1}) maps to [g + d - t_{k+1}, g + d - t_k)
    newt = (g + d) - t[k + 1]
    newv = v[ep[seg + 1]] + (M[k] - v[k])
    order = np.argsort(newt, kind="stable")
    tt = np.append(newt[order], t[ep[-1]])
    vv = np.append(newv[order], v[ep[-1]])
    out = PathSkeleton(tt, vv)
    # future infimum inside the window
    finf = np.minimum.accumulate(vv[::-1])[::-1]
    return ConditionedPath(out, float(tt[-1]), "doney-tanaka", PathSkeleton(tt, finf))


def doney_tanaka_functional(xi, alpha):
    """int exp(-alpha * xi_up) over the pasted window, computed on the pasted path."""
    return doney_tanaka(xi).exp_integral(alpha)


def w_process(decomp, alpha, tol=1e-6):
    """W along completed segments and its terminal value.

    Raises DivergenceDetected when the increments over the last unit of
    local time are not small relative to the running value.
    """
    if alpha <= 0:
        raise DivergenceDetected("W converges only for alpha > 0")
    n = decomp.n_segments - 1
    if n < 1:
        raise EmptyPath("no completed segment")
    h, dY = decomp.h, decomp.dY[:n]
    dh = np.diff(h)[:n]
    inc = np.exp(-alpha * h[1:n + 1]) * dY
    W = np.cumsum(inc)
    T = np.cumsum(np.exp(-alpha * dh) * dY)
    tg = decomp.C[1:n + 1]
    last = tg[-1]
    recent = W[-1] - np.interp(last - 1.0, tg, W, left=0.0)
    if recent > tol * W[-1] and not decomp.final:
        raise DivergenceDetected(f"W still moving: last-unit increment {recent:.3g}")
    return WCurve(tg, W, T, float(W[-1]), float(recent))


def reversal_sample(decomp, alpha, ell):
    """exp(-alpha h_ell) * int_(0, ell] exp(alpha h_{s-}) dY_s at local time ``ell``."""
    m = int(np.searchsorted(decomp.C, ell, side="right")) - 1
    if m >= decomp.n_segments:
        raise EmptyPath("local time beyond the decomposition")
    terms = np.exp(-alpha * (decomp.h[m] - decomp.h[:m])) * decomp.dY[:m]
    return math.fsum(terms.tolist())


def w_at(decomp, alpha, ell):
    """W at local time ``ell`` (same segment convention as ``reversal_sample``)."""
    m = int(np.searchsorted(decomp.C, ell, side="right")) - 1
    terms = np.exp(-alpha * decomp.h[1:m + 1]) * decomp.dY[:m]
    return math.fsum(terms.tolist())


def _ladder_until(spec, alpha, dt, seed, i, scale, stop, cap_blocks=10_000):
    """Extend a path block by block until ``stop(decomp)`` holds."""
    ps = lm.PathStream(spec, dt, seed, i)
    while True:
        ps.extend()
        d = fl.decompose(ps.skeleton(), alpha, scale)
        if stop(d) or ps.blocks >= cap_blocks:
            return ps, d


def sample_w_terminal(spec, alpha, n, dt, seed, tol=1e-6, scale=None, threads=1):
    """Samples of W_inf (the exponential functional of h against dY)."""
    scale = scale or fl.local_time_scale(spec, dt, seed)

    def stop(d):
        try:
            w_process(d, alpha, tol)
            return True
        except (DivergenceDetected, EmptyPath):
            return False

    def one(i):
        _, d = _ladder_until(spec, alpha, dt, seed, i, scale, stop)
        return w_process(d, alpha, tol=math.inf).I_tilde

    return np.array(stats.parallel_map(one, range(n), threads))


def sample_dt_functional(spec, alpha, n, dt, seed, tol=1e-6, scale=None, threads=1):
    """Samples of int_0^inf exp(-alpha xi_up) from the pasted path, same stopping rule."""
    scale = scale or fl.local_time_scale(spec, dt, seed)

    def stop(d):
        try:
            w_process(d, alpha, tol)
            return True
        except (DivergenceDetected, EmptyPath):
            return False

    def one(i):
        ps, d = _ladder_until(spec, alpha, dt, seed, i, scale, stop)
        return doney_tanaka_functional(ps.skeleton(), alpha)

    return np.array(stats.parallel_map(one, range(n), threads))


# ---------------------------------------------------------------------------
# exponential functionals


def exp_functional_path(xi, alpha, drift):
    """int_0^inf exp(alpha xi) truncated at the path end, with a drift-based tail estimate.

    Returns (value, tail) where tail = exp(alpha xi_T) / |alpha drift|.
    """
    if not alpha * drift < 0:
        raise NonConvergent("alpha * xi must drift to -inf")
    val = exp_integral(xi, alpha)
    tail = math.exp(alpha * xi.values[-1]) / abs(alpha * drift)
    return val, tail


def sample_exp_functional(spec, alpha, n, dt, seed, rel_tol=1e-8, threads=1):
    """Samples of I = int_0^inf exp(-alpha xi_s) ds for a process with positive mean."""
    m = spec.mean()
    if not alpha * m > 0:
        raise NonConvergent("need alpha * E(xi_1) > 0")

    def one(i):
        ps = lm.PathStream(spec, dt, seed, i)
        acc = 0.0
        while True:
            ps.extend()
            t, v = ps.last_block()
            acc += math.fsum((np.exp(-alpha * v[:-1]) * np.diff(t)).tolist())
            if math.exp(-alpha * v[-1]) / (alpha * m) < rel_tol * acc:
                return acc

    return np.array(stats.parallel_map(one, range(n), threads))


def ih_from_decomposition(decomp, alpha):
    """int exp(-alpha h_s) ds over local time.

    Between epochs reached by creeping, h is interpolated linearly in local
    time and the integral taken exactly; when the closing epoch is a jump,
    the left value is used.
    """
    n = decomp.n_segments - 1
    h0 = decomp.h[:n]
    h1 = decomp.h[1:n + 1]
    dl = decomp.dl[:n]
    jump = decomp.xi.is_event[decomp.epoch_idx[1:n + 1]]
    dh = h1 - h0
    with np.errstate(invalid="ignore", divide="ignore"):
        lin = np.where(dh > 0, np.exp(-alpha * h0) * -np.expm1(-alpha * dh) / (alpha * dh), np.exp(-alpha * h0))
    piece = np.where(jump, np.exp(-alpha * h0), lin) * dl
    return math.fsum(piece.tolist())


def sample_ih_pairs(spec, alpha, n, dt, seed, rel_tol=1e-8, scale=None, threads=1):
    """Joint samples (I_tilde, I_h, h_end, L_end) from the same path decomposition."""
    scale = scale or fl.local_time_scale(spec, dt, seed)

    def stop(d):
        if d.n_segments < 3:
            return False
        return math.exp(-alpha * d.h[-1]) < rel_tol * math.exp(-alpha * d.h[0])

    def one(i):
        _, d = _ladder_until(spec, alpha, dt, seed, i, scale, stop)
        w = w_process(d, alpha, tol=math.inf)
        return (w.I_tilde, ih_from_decomposition(d, alpha), float(d.h[-1]), float(d.C[-2]))

    return np.array(stats.parallel_map(one, range(n), threads))
