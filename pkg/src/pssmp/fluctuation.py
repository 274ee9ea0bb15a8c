"""Fluctuation theory on simulated skeletons.

Ladder epochs are the knots where the path equals its running maximum.
Each epoch opens a *segment*: the interval spent at the supremum followed by
the excursion below it, closed by the next epoch.  Local time accrues at
the start of each segment, in one of two ways:

``sup-time``
    models with ``a > 0`` (no diffusion, positive drift): local time is the
    time spent at the supremum divided by ``a``, so the occupation identity
    holds exactly on the grid.

``count``
    diffusive models: every epoch carries the same local time ``dl``, chosen
    so that the ladder height grows at the rate of the continuous-time
    ladder height process normalised by ``phi(1) = 1``.

All identities checked downstream (clock identity, compensation formula,
duality of reversed excursions) are invariant under this choice.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special
from scipy.stats import norm

from . import levy_model as lm
from . import rng as _rng
from . import stats
from .errors import EmptyPath, RegularityViolation
from .pathkit import PathSkeleton, exp_integral_curve

# ---------------------------------------------------------------------------
# local time normalisation


@dataclass(frozen=True)
class LocalTimeScale:
    mode: str            # "sup-time" or "count"
    a_hat: float         # the model constant a (0 for diffusions)
    a_eff: float         # time at the supremum per unit local time on the grid
    dl_epoch: float      # local time per epoch in count mode (nan otherwise)
    dt: float
    source: str          # how the scale was obtained

    def increments(self, ds_at_epochs):
        if self.mode == "count":
            return np.full(len(ds_at_epochs), self.dl_epoch)
        return np.asarray(ds_at_epochs) / self.a_eff


def ladder_height_rate(spec):
    """Drift of the ascending ladder height of Brownian motion with drift, phi(1)=1."""
    mu, s2 = spec.drift, spec.sigma ** 2
    return s2 / (math.sqrt(mu * mu + 2 * s2) - mu)


def _gauss_series(fn, n_max=100_000):
    """sum_{n>=1} fn(n) for smooth, eventually-decaying fn.

    Head summed exactly, tail by Euler–Maclaurin with the integral taken on
    a log scale.
    """
    n = np.arange(1, n_max + 1, dtype=float)
    head = math.fsum(fn(n).tolist())

    def g(y):
        x = math.exp(y)
        return float(fn(np.array([x]))[0]) * x

    y0 = math.log(n_max)
    integral, _ = integrate.quad(g, y0, y0 + 40, limit=400)
    f0 = float(fn(np.array([float(n_max)]))[0])
    f1 = float(fn(np.array([float(n_max + 1)]))[0])
    return head + integral - f0 / 2 - (f1 - f0) / 12


def gaussian_mean_ladder_height(mu, sigma, dt):
    """E[first strict ascending ladder height | it exists] for the Gaussian walk.

    Computed from Spitzer's identities; this is exact up to series truncation.
    """
    if mu == 0:
        return sigma * math.sqrt(dt / 2)
    c = mu * math.sqrt(dt) / sigma
    if mu > 0:
        s = _gauss_series(lambda n: special.ndtr(-c * np.sqrt(n)) / n)
        return mu * dt * math.exp(s)
    p_sum = _gauss_series(lambda n: special.ndtr(c * np.sqrt(n)) / n)

    def pos_part(n):
        m = mu * dt * n
        sd = sigma * np.sqrt(dt * n)
        return (m * special.ndtr(m / sd) + sd * norm.pdf(m / sd)) / n

    e_sum = _gauss_series(pos_part)
    p_fin = -math.expm1(-p_sum)
    return math.exp(-p_sum) * e_sum / p_fin


def spitzer_ladder_laplace(mu, sigma, dt, lam, n_max=400_000):
    """E[exp(-lam * dt * tau)] for the first strict ascending ladder epoch tau (0 if tau=inf)."""
    n = np.arange(1, n_max + 1, dtype=float)
    c = mu * math.sqrt(dt) / sigma if sigma > 0 else 0.0
    terms = np.exp(-lam * dt * n) * special.ndtr(c * np.sqrt(n)) / n
    return -math.expm1(-math.fsum(terms.tolist()))


def kou_wang_roots(spec, q=1.0):
    """The two positive roots of psi(beta) = q for two-sided exponential jumps."""
    law = spec.jump_law
    eta1 = law.rate_up

    def g(beta):
        return spec.laplace_exponent(beta) - q

    lo, hi = 1e-14, eta1 * (1 - 1e-12)
    b1 = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    top = eta1 * 2 + 10
    while g(top) < 0:
        top *= 2
    b2 = optimize.brentq(g, eta1 * (1 + 1e-12), top, xtol=1e-15, rtol=1e-15, maxiter=500)
    return b1, b2


def kou_wang_scale(spec):
    """Exact ``a`` for drift plus two-sided exponential jumps (no diffusion, positive drift).

    Measuring local time by time at the supremum, the inverse local time has
    exponent ``1 + r * (1 - E exp(-D))`` at 1, where ``r`` is the rate of
    downward jumps and ``D`` the duration of the excursion one starts.  The
    Laplace transform of first passage is the two-root formula for
    hyperexponential jumps.
    """
    law = spec.jump_law
    b1, b2 = kou_wang_roots(spec, 1.0)
    eta1, eta2 = law.rate_up, law.rate_down
    c1 = (eta1 - b1) * b2 / (eta1 * (b2 - b1))
    c2 = (b2 - eta1) * b1 / (eta1 * (b2 - b1))
    e_d = c1 * eta2 / (eta2 + b1) + c2 * eta2 / (eta2 + b2)
    phi1 = 1.0 + spec.jump_rate * (1 - law.p_up) * (1.0 - e_d)
    return 1.0 / phi1


def local_time_scale(spec, dt, seed=0, mc_paths=200, mc_horizon=None):
    """Pick the local-time convention and its normalising constant for ``spec``."""
    if not lm.ladder_supported(spec):
        raise RegularityViolation("0 is not regular for [0, inf): no diffusion and negative drift")
    if spec.sigma == 0:
        if spec.has_jumps and spec.jump_law.kind == "two-sided-exponential" and spec.drift > 0:
            a = kou_wang_scale(spec)
            return LocalTimeScale("sup-time", a, a, math.nan, dt, "closed-form")
        a = _mc_sup_time_scale(spec, dt, seed, mc_paths, mc_horizon)
        return LocalTimeScale("sup-time", a, a, math.nan, dt, "monte-carlo")
    if not spec.has_jumps:
        dl = gaussian_mean_ladder_height(spec.drift, spec.sigma, dt) / ladder_height_rate(spec)
        return LocalTimeScale("count", 0.0, dt / dl, dl, dt, "closed-form")
    dl = _mc_count_scale(spec, dt, seed, mc_paths, mc_horizon)
    return LocalTimeScale("count", 0.0, dt / dl, dl, dt, "monte-carlo")


def _epoch_gaps(spec, dt, seed, n_paths, horizon):
    gaps = []
    for i in range(n_paths):
        p = lm.sample_skeleton(spec, horizon, dt, _rng.derive(seed, 77), i)
        v = p.values
        ep = np.flatnonzero(v == np.maximum.accumulate(v))
        t = p.times[ep]
        gaps.append(np.diff(t))
        # the open gap after the last epoch is at least this long
        gaps.append(np.array([-(p.end - t[-1])]))
    return np.concatenate(gaps)


def _mc_count_scale(spec, dt, seed, n_paths, horizon):
    horizon = horizon or 50.0
    g = _epoch_gaps(spec, dt, seed, n_paths, horizon)
    closed = g[g > 0]
    open_ = -g[g <= 0]
    # open gaps lasting longer than ~35 contribute nothing to E exp(-gap)
    num = math.fsum(np.exp(-closed).tolist())
    den = len(closed) + np.sum(open_ > 35)
    return -math.log(num / den)


def _mc_sup_time_scale(spec, dt, seed, n_paths, horizon):
    horizon = horizon or 200.0
    # local time = time at the supremum; phi_l(1) from E exp(-l^{-1}(s))
    s = 1.0
    vals = []
    for i in range(n_paths):
        p = lm.sample_skeleton(spec, horizon, dt, _rng.derive(seed, 78), i)
        v = p.values
        at_sup = (v == np.maximum.accumulate(v))[:-1]
        ell = np.concatenate([[0.0], np.cumsum(np.where(at_sup, np.diff(p.times), 0.0))])
        k = np.searchsorted(ell, s, side="right")
        if k >= len(ell):
            vals.append(0.0)
            continue
        # inverse local time by interpolation inside the at-sup interval
        t_hit = p.times[k - 1] + (s - ell[k - 1])
        vals.append(math.exp(-t_hit))
    return 1.0 / (-math.log(np.mean(vals)) / s)


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class ExcursionRecord:
    start_local_time: float
    duration: float
    path: PathSkeleton
    terminal: float


@dataclass
class LadderDecomposition:
    """Ladder epochs and excursion segments of one Lévy path.

    Per segment ``j``: ``S[j]`` real time of the epoch, ``h[j]`` height,
    ``dl[j]`` local time, ``dY[j]`` increment of the clock Y.  ``C`` and
    ``Ycum`` are cumulative sums with a leading 0.  Knot arrays ``seg`` and
    ``eps`` give, for every knot, its segment and depth below the supremum.
    """

    xi: PathSkeleton
    alpha: float
    scale: LocalTimeScale
    epoch_idx: np.ndarray
    S: np.ndarray
    h: np.ndarray
    dl: np.ndarray
    dY: np.ndarray
    C: np.ndarray
    Ycum: np.ndarray
    seg: np.ndarray
    eps: np.ndarray
    ds: np.ndarray
    final: bool = False

    @property
    def n_segments(self):
        return len(self.S)

    @property
    def a_hat(self):
        return self.scale.a_hat

    @property
    def L_total(self):
        return float(self.C[-1])

    @property
    def L_inf(self):
        return self.L_total if (self.final or self.xi.killed) else math.inf

    @property
    def normalization(self):
        s = self.scale
        return s.dl_epoch if s.mode == "count" else 1.0 / s.a_eff

    @property
    def epochs(self):
        """(local time, L^{-1}, h, Y) at each epoch."""
        return list(zip(self.C[:-1].tolist(), self.S.tolist(), self.h.tolist(), self.Ycum[:-1].tolist()))

    @property
    def sup_durations(self):
        return self.ds[self.epoch_idx]

    @property
    def terminals(self):
        """epsilon(zeta) of each completed excursion: h_j - h_{j+1} <= 0."""
        return self.h[:-1] - self.h[1:]

    @property
    def excursion_durations(self):
        """Time below the supremum in each completed segment."""
        return np.diff(self.S) - self.sup_durations[:-1]

    def excursion(self, j):
        n = self.n_segments
        if not 0 <= j < n - 1:
            raise IndexError("only completed segments have excursion records")
        k0, k1 = self.epoch_idx[j], self.epoch_idx[j + 1]
        start = self.xi.times[k0 + 1]
        t = self.xi.times[k0 + 1:k1 + 1] - start
        term = float(self.h[j] - self.h[j + 1])
        v = np.append(self.eps[k0 + 1:k1], term)
        return ExcursionRecord(float(self.C[j]), float(self.S[j + 1] - start), PathSkeleton(t, v), term)

    @property
    def excursions(self):
        return [self.excursion(j) for j in range(self.n_segments - 1)
                if self.epoch_idx[j + 1] > self.epoch_idx[j] + 1]

    def local_time_at_knots(self):
        """L at every knot time (local time of a segment accrues during its sup interval)."""
        k = np.arange(len(self.seg))
        j = self.seg
        after = k > self.epoch_idx[j]
        return self.C[j] + np.where(after, self.dl[j], 0.0)

    def local_time_at(self, t):
        t = np.asarray(t, dtype=float)
        j = np.searchsorted(self.S, t, side="right") - 1
        ds = self.ds[self.epoch_idx[j]]
        if self.scale.mode == "count":
            frac = (t > self.S[j]).astype(float)
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                frac = np.where(ds > 0, np.clip((t - self.S[j]) / ds, 0, 1), 1.0)
        return self.C[j] + frac * self.dl[j]

    def inverse_local_time(self, ell):
        """L^{-1}(ell) = inf{t : L_t > ell}."""
        ell = np.asarray(ell, dtype=float)
        j = np.searchsorted(self.C, ell, side="right") - 1
        inside = j < self.n_segments
        jj = np.minimum(j, self.n_segments - 1)
        ds = self.ds[self.epoch_idx[jj]]
        if self.scale.mode == "count":
            out = self.S[jj]
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                out = self.S[jj] + (ell - self.C[jj]) * ds / self.dl[jj]
        return np.where(inside, out, np.inf)


def decompose(xi, alpha, scale, final=False):
    """Split ``xi`` into ladder segments and excursions.

    ``final`` declares that the path has no epochs after its end, so that
    ``L_inf`` equals the accumulated local time.
    """
    if len(xi) < 2:
        raise EmptyPath("the path must contain at least one interval")
    v = xi.values
    n_alive = len(v) - 1 if xi.killed else len(v)
    v = v[:n_alive]
    ds = np.diff(xi.times)
    if not xi.killed:
        ds = np.append(ds, 0.0)
    M = np.maximum.accumulate(v)
    is_ep = v == M
    ep = np.flatnonzero(is_ep)
    seg = np.cumsum(is_ep) - 1
    eps = M - v
    w = np.exp(-alpha * eps) * ds
    dY = np.add.reduceat(w, ep)
    dl = scale.increments(ds[ep])
    S = xi.times[ep]
    h = v[ep]
    C = np.concatenate([[0.0], np.cumsum(dl)])
    Ycum = np.concatenate([[0.0], np.cumsum(dY)])
    return LadderDecomposition(xi=xi, alpha=float(alpha), scale=scale, epoch_idx=ep, S=S, h=h,
                               dl=dl, dY=dY, C=C, Ycum=Ycum, seg=seg, eps=eps, ds=ds, final=final)


def clock_at_epochs(decomp):
    """A(S_j) from the path and the same quantity rebuilt from (h, dY).

    The two agree up to rounding: this is the discrete form of the identity
    A(L^{-1}_t) = int_(0,t] exp(alpha h_{s-}) dY_s.
    """
    A = exp_integral_curve(decomp.xi, decomp.alpha)[decomp.epoch_idx]
    terms = np.exp(decomp.alpha * decomp.h) * decomp.dY
    rebuilt = np.concatenate([[0.0], np.cumsum(terms)[:-1]])
    return A, rebuilt


# ---------------------------------------------------------------------------
# excursion pools


@dataclass
class ExcursionPool:
    """Knot-level data of many segments harvested per unit local time.

    ``eps``/``ds``/``ybefore``/``seg`` are knot arrays (the at-sup knot of each
    segment included, with depth 0); ``dl``, ``dY``, ``terminal``, ``duration``
    are per segment.  Dividing sums over segments by ``L`` estimates
    integrals against the excursion measure plus the atom.
    """

    alpha: float
    scale: LocalTimeScale
    eps: np.ndarray
    ds: np.ndarray
    ybefore: np.ndarray
    seg: np.ndarray
    seg_start: np.ndarray
    dl: np.ndarray
    dY: np.ndarray
    terminal: np.ndarray
    duration: np.ndarray
    height_gain: np.ndarray
    seg_path: np.ndarray
    n_paths: int
    dropped: int = 0

    @property
    def L(self):
        return math.fsum(self.dl.tolist())

    @property
    def n_segments(self):
        return len(self.dl)

    def segment_sum(self, values):
        """Per-segment sums of a knot-level array."""
        return np.add.reduceat(values, self.seg_start) if len(values) else np.zeros(0)

    def per_local_time(self, seg_values):
        """sum(seg_values) / L with a delta-method standard error over paths."""
        return stats.ratio_mean(seg_values, self.dl)


def _complete_path(spec, dt, seed, path_index, horizon, cap_factor):
    """Path up to the first new maximum after ``horizon`` (or the cap)."""
    ps = lm.PathStream(spec, dt, seed, path_index)
    ps.extend_to(horizon)
    base = ps.skeleton(horizon)
    top = float(np.max(base.values))
    limit = cap_factor * horizon
    while True:
        full = ps.skeleton()
        hit = np.flatnonzero((full.times > horizon) & (full.values >= top))
        if len(hit):
            return ps.skeleton(full.times[hit[0]]), True
        if ps.horizon >= limit or ps.horizon >= ps.lifetime:
            return base, False
        ps.extend()


def harvest_pool(spec, alpha, dt, horizon, n_paths, seed, scale=None, cap_factor=4.0, threads=1):
    """Harvest complete segments that start before ``horizon`` on ``n_paths`` paths.

    The segment straddling ``horizon`` is followed to its end (up to
    ``cap_factor * horizon``); whether a segment is used depends only on its
    start, so ratio estimates of excursion-measure integrals are unbiased.
    """
    scale = scale or local_time_scale(spec, dt, seed)

    def one(i):
        p, closed = _complete_path(spec, dt, seed, i, horizon, cap_factor)
        d = decompose(p, alpha, scale)
        # the last epoch either closes the straddling segment or opens one that never closed
        nseg = d.n_segments - 1
        stop = d.epoch_idx[-1]
        if nseg <= 0:
            return None
        ks = slice(0, stop)
        eps = d.eps[ks]
        ds = d.ds[ks]
        seg = d.seg[ks]
        w = np.exp(-alpha * eps) * ds
        cs = np.cumsum(w)
        starts = d.epoch_idx[:nseg]
        offs = cs[starts] - w[starts]
        yb = cs - w - offs[seg]
        return dict(eps=eps, ds=ds, ybefore=yb, seg=seg, dl=d.dl[:nseg], dY=d.dY[:nseg],
                    terminal=d.terminals[:nseg], duration=d.excursion_durations[:nseg],
                    height_gain=np.diff(d.h)[:nseg], dropped=int(not closed),
                    seg_path=np.full(nseg, i))

    parts = [r for r in stats.parallel_map(one, range(n_paths), threads) if r is not None]
    offset = 0
    segs = []
    for r in parts:
        segs.append(r["seg"] + offset)
        offset += len(r["dl"])
    cat = {k: np.concatenate([r[k] for r in parts]) for k in
           ("eps", "ds", "ybefore", "dl", "dY", "terminal", "duration", "height_gain", "seg_path")}
    seg = np.concatenate(segs)
    seg_start = np.flatnonzero(np.diff(np.concatenate([[-1], seg])) != 0)
    return ExcursionPool(alpha=float(alpha), scale=scale, seg=seg, seg_start=seg_start,
                         n_paths=n_paths, dropped=sum(r["dropped"] for r in parts), **cat)


# ---------------------------------------------------------------------------
# occupation and renewal measures


@dataclass
class RenewalMeasureEstimate:
    grid: np.ndarray          # cell edges
    mass: np.ndarray          # mass per cell (atom excluded)
    stderr: np.ndarray
    atom_at_0: float
    source: str

    def cdf(self, y):
        """V([0, y]) including the atom, linear inside cells."""
        cum = np.concatenate([[0.0], np.cumsum(self.mass)])
        return self.atom_at_0 + np.interp(y, self.grid, cum)

    def to_csv(self, fh):
        fh.write("lower,upper,mass,stderr\n")
        fh.write(f"0.0,0.0,{self.atom_at_0!r},0.0\n")
        for lo, hi, m, s in zip(self.grid[:-1], self.grid[1:], self.mass, self.stderr):
            fh.write(f"{lo!r},{hi!r},{m!r},{s!r}\n")


def renewal_Vhat(pool, grid):
    """Occupation of the reflected process per unit local time (excursion route).

    The at-supremum intervals (depth exactly 0) form the atom.
    """
    grid = np.asarray(grid, dtype=float)
    L = pool.L
    at0 = pool.eps == 0
    atom = math.fsum(pool.ds[at0].tolist()) / L
    cells = np.searchsorted(grid, pool.eps, side="right") - 1
    valid = (~at0) & (cells >= 0) & (cells < len(grid) - 1)
    ncell = len(grid) - 1
    # per-segment occupation per cell, for standard errors
    seg_cell = np.zeros((pool.n_segments, ncell))
    np.add.at(seg_cell, (pool.seg[valid], cells[valid]), pool.ds[valid])
    mass = np.empty(ncell)
    se = np.empty(ncell)
    for c in range(ncell):
        mass[c], se[c] = stats.ratio_mean(seg_cell[:, c], pool.dl)
    return RenewalMeasureEstimate(grid, mass, se, atom, "excursion-occupation")


def renewal_V(decomps, grid):
    """E int 1{h_s in dy} ds from ladder heights of independent paths.

    Applied to decompositions of the dual path this estimates the dual
    renewal measure.  Each path must have been simulated until its ladder
    height passed the top of ``grid`` (or until it stopped for good).
    """
    grid = np.asarray(grid, dtype=float)
    ncell = len(grid) - 1
    per_path = np.zeros((len(decomps), ncell))
    atom = np.zeros(len(decomps))
    for i, d in enumerate(decomps):
        c = np.searchsorted(grid, d.h, side="right") - 1
        zero = d.h == 0
        atom[i] = d.dl[zero].sum()
        ok = (~zero) & (c >= 0) & (c < ncell)
        np.add.at(per_path[i], c[ok], d.dl[ok])
    mass = per_path.mean(axis=0)
    se = per_path.std(axis=0, ddof=1) / math.sqrt(len(decomps))
    return RenewalMeasureEstimate(grid, mass, se, float(atom.mean()), "dual-ladder-renewal")


def renewal_Vhat_levels(spec, dt, levels, n_paths, horizon, seed, scale=None, threads=1):
    """Vhat([0, y)) at a few levels from the time the path spends within y of its supremum.

    Streaming ratio estimate (occupation over local time, summed over
    paths) for grids too fine to keep an excursion pool in memory.  Returns
    (values, standard errors) over paths.
    """
    scale = scale or local_time_scale(spec, dt, seed)
    levels = np.asarray(levels, dtype=float)

    def one(i):
        d = decompose(lm.sample_skeleton(spec, horizon, dt, seed, i), 1.0, scale)
        occ = [math.fsum(d.ds[d.eps < y].tolist()) for y in levels]
        return occ, d.L_total

    res = stats.parallel_map(one, range(n_paths), threads)
    occ = np.array([r[0] for r in res])
    L = np.array([r[1] for r in res])
    out = [stats.ratio_mean(occ[:, j], L) for j in range(len(levels))]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def occupation_localtime(decomp, eps_list, vhat):
    """Occupation approximations of local time.

    For each ``eps`` returns the curve int_0^t 1{sup - xi < eps} ds / V(eps)
    on the knots, with ``V`` a renewal function (callable) of the reflected
    process, and its sup-norm distance to the decomposition's local time.
    """
    sc = decomp.scale
    if decomp.xi.values.size and sc.mode == "sup-time" and sc.a_eff <= 0:
        raise RegularityViolation("0 must be regular for (0, inf)")
    L = decomp.local_time_at_knots()
    out = []
    for e in eps_list:
        occ = np.concatenate([[0.0], np.cumsum(np.where(decomp.eps < e, decomp.ds, 0.0))[:-1]])
        approx = occ / vhat(e)
        out.append({"eps": float(e), "curve": approx, "sup_error": float(np.max(np.abs(approx - L)))})
    return out, L


# ---------------------------------------------------------------------------
# Wiener–Hopf


def inverse_local_time_samples(spec, dt, ell, n_paths, seed, scale=None, t_cut=60.0):
    """Samples of L^{-1}(ell); np.inf where it exceeds ``t_cut`` (or never happens)."""
    scale = scale or local_time_scale(spec, dt, seed)
    out = np.empty(n_paths)
    for i in range(n_paths):
        ps = lm.PathStream(spec, dt, seed, i)
        val = np.inf
        while ps.horizon < t_cut:
            ps.extend()
            d = decompose(ps.skeleton(), 1.0, scale)
            if d.C[-1] > ell:
                val = float(d.inverse_local_time(ell))
                break
        out[i] = val
    return out


def phi_raw(samples, lam, ell):
    """-log E exp(-lam L^{-1}_ell) / ell with a delta-method standard error."""
    e = np.exp(-lam * samples)
    m, se = stats.mc_mean(e)
    return -math.log(m) / ell, se / (m * ell)


def wiener_hopf_check(spec, lambdas, n_paths, dt, seed, ell=1.0, t_cut=60.0):
    """phi(lam) * phihat(lam) / lam after the phi(1) = 1 calibration of each factor."""
    sc = local_time_scale(spec, dt, seed)
    dspec = lm.dual(spec)
    dsc = local_time_scale(dspec, dt, seed)
    up = inverse_local_time_samples(spec, dt, ell, n_paths, _rng.derive(seed, 1), sc, t_cut)
    down = inverse_local_time_samples(dspec, dt, ell, n_paths, _rng.derive(seed, 2), dsc, t_cut)
    p1, _ = phi_raw(up, 1.0, ell)
    q1, _ = phi_raw(down, 1.0, ell)
    rows = []
    for lam in lambdas:
        p, ps_ = phi_raw(up, lam, ell)
        q, qs = phi_raw(down, lam, ell)
        prod = (p / p1) * (q / q1)
        rows.append({"lambda": float(lam), "phi": p / p1, "phihat": q / q1,
                     "ratio": prod / lam, "phi_raw": p, "phihat_raw": q})
    return {"rows": rows, "raw_product_at_1": p1 * q1}


def spitzer_phi_raw(mu, sigma, dt, lam, dl):
    """Exact phi_raw(lam) of the Gaussian walk with count-based local time ``dl`` per epoch."""
    return -math.log(spitzer_ladder_laplace(mu, sigma, dt, lam)) / dl
