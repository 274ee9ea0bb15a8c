"""Resolvents of the pssMp through its ladder process, and its entrance law at 0+.

Everything here is assembled from two sample sources:

* ladder paths started at ``x`` (or at 0 in the limit), giving the epochs,
  their clock values and their local-time increments;
* an excursion pool, giving integrals against the excursion measure per unit
  local time.  Reading a pool segment backwards from any knot gives a path of
  the process reflected at its future infimum run down to 0, so the partial
  sums ``ybefore`` are exactly the exponential functionals that the entrance
  measure needs.

Standard errors come from independent batches, each with its own pool, so the
pool noise shared by all paths of a batch is accounted for.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, stats as sps

from . import conditioned as cond
from . import fluctuation as fl
from . import lamperti
from . import levy_model as lm
from . import rng as _rng
from . import stats
from .errors import ArithmeticLattice, ConfigError, NonConvergent, RegularityViolation
from .functionals import test_function
from .pathkit import exp_integral


# ---------------------------------------------------------------------------
# the kernel kappa_q


@dataclass
class KappaEstimator:
    q: float
    alpha: float
    excursion_pool: fl.ExcursionPool
    a_hat: float

    def __post_init__(self):
        if self.q < 0:
            raise ConfigError("q must be nonnegative")

    def values(self, z, f_id, chunk=200_000):
        """kappa_q(z, f) for an array of ``z``.

        Each knot contributes the exact integral of exp(-q t) over the X-time
        it occupies inside its excursion, which for q=0 is just its X-time.
        """
        f = test_function(f_id)
        z = np.atleast_1d(np.asarray(z, dtype=float))
        p = self.excursion_pool
        out = np.zeros(len(z))
        za = z ** self.alpha
        for lo in range(0, len(p.eps), chunk):
            eps = p.eps[lo:lo + chunk]
            w = np.exp(-self.alpha * eps) * p.ds[lo:lo + chunk]
            yb = p.ybefore[lo:lo + chunk]
            for i, (zz, s) in enumerate(zip(z, za)):
                occ = s * w
                if self.q > 0:
                    occ = np.exp(-self.q * s * yb) * -np.expm1(-self.q * occ) / self.q
                out[i] += math.fsum((occ * f(zz * np.exp(-eps))).tolist())
        return out / p.L

    def __call__(self, z, f_id="one"):
        return self.values(z, f_id)

    def interpolator(self, z_lo, z_hi, f_id, n=160):
        """Callable approximating kappa_q(., f) on [z_lo, z_hi] from a log grid.

        kappa / z^alpha is bounded and smooth in log z, so that ratio is
        interpolated.
        """
        z_lo, z_hi = min(z_lo, z_hi / 1.001), max(z_hi, z_lo * 1.001)
        grid = np.geomspace(z_lo, z_hi, n)
        ratio = self.values(grid, f_id) / grid ** self.alpha
        lg = np.log(grid)

        def kap(z):
            z = np.asarray(z, dtype=float)
            return np.interp(np.log(z), lg, ratio) * z ** self.alpha

        return kap

    def mean_Y1(self):
        """E(Y_1): the z -> 0 limit of kappa_q(z, 1) / z^alpha."""
        p = self.excursion_pool
        return math.fsum((np.exp(-self.alpha * p.eps) * p.ds).tolist()) / p.L


def kappa(est, z, f_id="one"):
    """kappa_q(z, f) from an estimator."""
    return float(est.values([z], f_id)[0])


def kappa_estimator(spec, alpha, q, dt, seed, pool_horizon=100.0, pool_paths=20, scale=None,
                    threads=1):
    scale = scale or fl.local_time_scale(spec, dt, seed)
    pool = fl.harvest_pool(spec, alpha, dt, pool_horizon, pool_paths, seed, scale, threads=threads)
    return KappaEstimator(float(q), float(alpha), pool, scale.a_hat)


# ---------------------------------------------------------------------------
# resolvents

# per-path cap on Lévy cells for the resolvent estimators
MAX_CELLS = 4_000_000


def _x_time_cut(q, tol):
    return -math.log(tol) / q


def _levy_until_clock(spec, alpha, x, until, dt, seed, i, max_cells):
    """Lévy skeleton until x^alpha A reaches ``until``; the flag says whether the cap stopped it."""
    ps = lm.PathStream(spec, dt, seed, i)
    sc = x ** alpha
    acc = 0.0
    while True:
        ps.extend()
        t, v = ps.last_block()
        acc += float(np.dot(np.exp(alpha * v[:-1]), np.diff(t)))
        if sc * acc >= until or ps.horizon >= ps.lifetime:
            return ps.skeleton(), False
        if ps.cells >= max_cells:
            return ps.skeleton(), True


def _ladder_epochs(spec, alpha, x, dt, seed, i, scale, until, max_cells):
    """(dl, U, z, capped, clock end) for the segments whose X-time start is below ``until``."""
    xi, capped = _levy_until_clock(spec, alpha, x, until, dt, seed, i, max_cells)
    d = fl.decompose(xi, alpha, scale)
    A, _ = fl.clock_at_epochs(d)
    U = x ** alpha * A
    keep = U < until
    end = x ** alpha * exp_integral(xi, alpha)
    return d.dl[keep], U[keep], x * np.exp(d.h[keep]), capped, end


def _batch_summary(values):
    values = np.asarray(values, dtype=float)
    m, se = stats.mc_mean(values)
    return m, se


def resolvent_via_ladder(spec, alpha, x, q, f_id, N, seed, dt=1e-2, batches=10, pool_horizon=100.0,
                         pool_paths=20, tol=1e-7, scale=None, threads=1, max_cells=MAX_CELLS):
    """V_q f(x) as E sum_j dl_j exp(-q U_j) kappa_q(H_j, f) over ladder epochs.

    ``N`` paths are split into ``batches`` groups, each paired with its own
    excursion pool; the standard error is the spread of the batch means.
    Paths stopped by ``max_cells`` before the clock reaches the cut are
    counted, and their missing tail enters ``truncation_bound``.
    """
    if not q > 0:
        raise ConfigError("q must be positive")
    if batches < 2 or N < batches:
        raise ConfigError("need at least two batches with one path each")
    scale = scale or fl.local_time_scale(spec, dt, seed)
    until = _x_time_cut(q, tol)
    per = N // batches
    path_seed = _rng.derive(seed, 11)

    def batch(b):
        est = kappa_estimator(spec, alpha, q, dt, _rng.derive(seed, 10, b), pool_horizon, pool_paths,
                              scale)
        eps = [_ladder_epochs(spec, alpha, x, dt, path_seed, b * per + i, scale, until, max_cells)
               for i in range(per)]
        zs = np.concatenate([e[2] for e in eps])
        kap = est.interpolator(zs.min(), zs.max(), f_id)
        vals = [math.fsum((dl * np.exp(-q * U) * kap(z)).tolist()) for dl, U, z, _, _ in eps]
        tails = [math.exp(-q * min(end, until)) / q for *_, end in eps]
        return math.fsum(vals) / per, sum(e[3] for e in eps), math.fsum(tails) / per

    res = stats.parallel_map(batch, range(batches), threads)
    m, se = _batch_summary([r[0] for r in res])
    return {"estimate": m, "stderr": se, "n_paths": per * batches, "batches": batches,
            "capped": sum(r[1] for r in res),
            "truncation_bound": math.fsum(r[2] for r in res) / batches}


def resolvent_direct(spec, alpha, x, q, f_id, N, seed, dt=1e-2, until=None, tol=1e-7, threads=1,
                     max_cells=MAX_CELLS):
    """V_q f(x) = E int_0^inf exp(-q t) f(X_t) dt along simulated pssMp paths.

    With q = 0 an explicit X-time window ``until`` is required and no
    truncation bound is available.  The bound for q > 0 averages
    exp(-q T_end)/q over paths, sup|f| being 1 for the catalogue.
    """
    f = test_function(f_id)
    if q < 0:
        raise ConfigError("q must be nonnegative")
    if until is None:
        if q == 0:
            raise ConfigError("q = 0 needs an explicit window")
        until = _x_time_cut(q, tol)
    path_seed = _rng.derive(seed, 12)

    def one(i):
        xi, capped = _levy_until_clock(spec, alpha, x, until, dt, path_seed, i, max_cells)
        X = lamperti.to_pssmp(xi, alpha, x)
        t, vals = X.times, X.values
        t0 = t[:-1]
        dT = np.diff(t)
        keep = t0 < until
        t0, dT, vals = t0[keep], np.minimum(dT[keep], until - t0[keep]), vals[:len(t0)][keep]
        w = dT if q == 0 else np.exp(-q * t0) * -np.expm1(-q * dT) / q
        tail = math.exp(-q * min(t[-1], until)) / q if q > 0 else math.nan
        return math.fsum((w * f(vals)).tolist()), capped, tail

    res = stats.parallel_map(one, range(N), threads)
    m, se = stats.mc_mean([r[0] for r in res])
    return {"estimate": m, "stderr": se, "n_paths": N, "capped": sum(r[1] for r in res),
            "truncation_bound": math.fsum(r[2] for r in res) / N}


def resolvent_zero(V, Vhat, alpha, x, f_id):
    """V_0 f(x) = int int x^alpha e^{alpha(z - y)} f(x e^{z - y}) V(dz) Vhat(dy).

    ``V`` and ``Vhat`` are renewal-measure estimates (cell masses plus an atom
    at 0); each cell's mass is placed at its midpoint.
    """
    f = test_function(f_id)

    def atoms(R):
        pts = np.concatenate([[0.0], 0.5 * (R.grid[:-1] + R.grid[1:])])
        return pts, np.concatenate([[R.atom_at_0], R.mass])

    z, mz = atoms(V)
    y, my = atoms(Vhat)
    diff = z[:, None] - y[None, :]
    integrand = x ** alpha * np.exp(alpha * diff) * f(x * np.exp(diff))
    return math.fsum((mz[:, None] * my[None, :] * integrand).ravel().tolist())


def _cramer_root(spec):
    """theta > 0 with psi(theta) = 0; P(ever rising by K) <= exp(-theta K) when E xi_1 < 0."""
    hi = spec.jump_law.rate_up if spec.has_jumps and spec.jump_law.kind == "two-sided-exponential" \
        else math.inf
    top = 1.0
    while top < hi and spec.laplace_exponent(top) < 0:
        top *= 2
    top = min(top, hi * (1 - 1e-12))
    return optimize.brentq(spec.laplace_exponent, 1e-12, top, xtol=1e-14)


def ladder_renewal(spec, alpha, dt, seed, n_paths, grid, scale=None, threads=1, tol=1e-6):
    """Renewal measure of the ladder height from paths run until h passes the grid top.

    When xi drifts to -inf the ladder height is killed; a path then stops
    once it sits so deep below its maximum that returning has probability
    below ``tol`` (Cramér bound).
    """
    scale = scale or fl.local_time_scale(spec, dt, seed)
    top = float(grid[-1])
    depth = -math.log(tol) / _cramer_root(spec) if spec.mean() < 0 else math.inf

    def stop(d):
        return d.h[-1] > top or d.xi.values[-1] < d.h[-1] - depth

    def one(i):
        _, d = cond._ladder_until(spec, alpha, dt, seed, i, scale, stop)
        return d

    return fl.renewal_V(stats.parallel_map(one, range(n_paths), threads), grid)


# ---------------------------------------------------------------------------
# entrance laws


def _require_entrance(spec):
    if lm.is_arithmetic(spec):
        raise ArithmeticLattice("ladder heights live on a lattice")
    if not lm.ladder_supported(spec):
        raise RegularityViolation("ladder process not available for this model")
    if spec.mean() < 0:
        raise NonConvergent("the mean ladder height is infinite when xi drifts to -inf")


def rh_entrance_law(spec, alpha, t, f_id, N, seed, dt=1e-2, batches=10, component="H", scale=None,
                    threads=1, pairs=None):
    """E_{0+} F(R_t, H_t) = E[F(t Itilde / I_h, (t / I_h)^{1/alpha}) / I_h] / (alpha mu_plus).

    ``F`` applies the catalogue function ``f_id`` to H (``component='H'``)
    or to R (``component='R'``).  The mean ladder height mu_plus is the ratio
    of total height to total local time on the same paths.
    """
    _require_entrance(spec)
    f = test_function(f_id)
    if pairs is None:
        pairs = cond.sample_ih_pairs(spec, alpha, N, dt, seed, scale=scale, threads=threads)
    it, ih, hend, lend = pairs.T
    r, h = t * it / ih, (t / ih) ** (1.0 / alpha)
    g = f(h if component == "H" else r) / ih
    per = len(g) // batches
    means = []
    for b in range(batches):
        sl = slice(b * per, (b + 1) * per)
        mu = math.fsum(hend[sl].tolist()) / math.fsum(lend[sl].tolist())
        means.append(math.fsum(g[sl].tolist()) / per / (alpha * mu))
    m, se = _batch_summary(means)
    mu_all = math.fsum(hend.tolist()) / math.fsum(lend.tolist())
    return {"estimate": m, "stderr": se, "mu_plus": mu_all, "n_paths": len(g)}


def rh_entrance_samples(pairs, alpha, t):
    """(R_t, H_t) sample points with their importance weights 1/(alpha mu_plus I_h)."""
    it, ih, hend, lend = pairs.T
    mu = math.fsum(hend.tolist()) / math.fsum(lend.tolist())
    pts = np.column_stack([t * it / ih, (t / ih) ** (1.0 / alpha)])
    return pts, 1.0 / (alpha * mu * ih)


def inverse_ih_check(pairs, alpha, batches=10):
    """E(1/I_h) against alpha * mu_plus, both from the same ladder paths."""
    _, ih, hend, lend = pairs.T
    per = len(ih) // batches
    ratios = []
    for b in range(batches):
        sl = slice(b * per, (b + 1) * per)
        mu = math.fsum(hend[sl].tolist()) / math.fsum(lend[sl].tolist())
        ratios.append(math.fsum((1.0 / ih[sl]).tolist()) / per / (alpha * mu))
    m, se = _batch_summary(ratios)
    return {"ratio": m, "stderr": se}


@dataclass
class EntranceMeasure:
    eta_samples: np.ndarray        # points e^{alpha x}(t + s)
    weights: np.ndarray
    mu_plus: float
    normalization_check: float
    normalization_stderr: float
    truncation_report: dict = field(default_factory=dict)

    def integrate(self, g):
        """sum_i w_i g(y_i)."""
        return math.fsum((self.weights * g(self.eta_samples)).tolist())

    def to_csv(self, fh):
        fh.write("point,weight\n")
        for p, w in zip(self.eta_samples, self.weights):
            fh.write(f"{p!r},{w!r}\n")


def _eta_batch(pool, itilde, alpha, gen, pairings):
    """Weighted eta points from one pool and one set of Itilde draws.

    Each pool knot (depth x, reversed-excursion functional s, occupation ds)
    is paired with ``pairings`` independent Itilde draws.
    """
    mu = math.fsum(pool.height_gain.tolist()) / pool.L
    k = np.repeat(np.arange(len(pool.eps)), pairings)
    draws = itilde[gen.integers(0, len(itilde), size=len(k))]
    pts = np.exp(alpha * pool.eps[k]) * (draws + pool.ybefore[k])
    w = pool.ds[k] / (pool.L * alpha * mu * pairings)
    return pts, w, mu


def entrance_law_X(spec, alpha, t, f_ids, N, seed, dt=1e-2, batches=10, pool_horizon=100.0,
                   pool_paths=10, pairings=2, scale=None, threads=1):
    """E_{0+} f(X_t) = int f((t/y)^{1/alpha}) y^{-1} eta(dy) for each id in ``f_ids``.

    ``N`` Itilde samples are split over ``batches``; each batch has its own
    excursion pool.  Returns per-function estimates, the normalisation
    int y^{-1} eta(dy), and the measure of the first batch.
    """
    _require_entrance(spec)
    if isinstance(f_ids, str):
        f_ids = [f_ids]
    fs = [test_function(f) for f in f_ids]
    scale = scale or fl.local_time_scale(spec, dt, seed)
    itilde = cond.sample_w_terminal(spec, alpha, N, dt, _rng.derive(seed, 20), scale=scale,
                                    threads=threads)
    per = N // batches

    def batch(b):
        pool = fl.harvest_pool(spec, alpha, dt, pool_horizon, pool_paths, _rng.derive(seed, 21, b),
                               scale)
        gen = _rng.stream(seed, b, 0, _rng.TAG_AUX)
        pts, w, mu = _eta_batch(pool, itilde[b * per:(b + 1) * per], alpha, gen, pairings)
        vals = [math.fsum((w * f((t / pts) ** (1.0 / alpha)) / pts).tolist()) for f in fs]
        norm = math.fsum((w / pts).tolist())
        return vals, norm, (pts, w, mu, float(pool.eps.max()))

    res = stats.parallel_map(batch, range(batches), threads)
    out = {}
    for j, fid in enumerate(f_ids):
        m, se = _batch_summary([r[0][j] for r in res])
        out[fid] = {"estimate": m, "stderr": se}
    nm, nse = _batch_summary([r[1] for r in res])
    pts, w, mu, xmax = res[0][2]
    # share of the normalisation carried by the deepest 1% of knots
    cut = np.quantile(np.log(pts), 0.99)
    deep = math.fsum((w / pts)[np.log(pts) > cut].tolist()) / max(res[0][1], 1e-300)
    measure = EntranceMeasure(pts, w, mu, nm, nse,
                              {"x_max": xmax, "deep_share": deep, "acceptance_rate": 1.0})
    return {"estimates": out, "normalization": nm, "normalization_stderr": nse,
            "measure": measure, "n_itilde": per * batches, "batches": batches}


def bertoin_yor(spec, alpha, t, f_id, N, seed, dt=1e-2, threads=1, samples=None):
    """E_{0+} f(X_t) = E[I^{-1} f((t/I)^{1/alpha})] / (alpha E xi_1), I = int exp(-alpha xi)."""
    m = spec.mean()
    if not m > 0:
        raise NonConvergent("needs E(xi_1) > 0")
    f = test_function(f_id)
    if samples is None:
        samples = cond.sample_exp_functional(spec, alpha, N, dt, seed, threads=threads)
    g = f((t / samples) ** (1.0 / alpha)) / samples / (alpha * m)
    est, se = stats.mc_mean(g)
    return {"estimate": est, "stderr": se, "n_paths": len(samples), "samples": samples}


def dufresne_entrance(mu, sigma, alpha, t, f_id):
    """Closed form of the entrance law for Brownian motion with drift mu > 0.

    Here int exp(-alpha xi) = 2 / (alpha^2 sigma^2 G) with G ~ Gamma(nu),
    nu = 2 mu / (alpha sigma^2), so the formula reduces to one integral.
    """
    if not (mu > 0 and sigma > 0):
        raise ConfigError("needs mu > 0 and sigma > 0")
    f = test_function(f_id)
    nu = 2 * mu / (alpha * sigma ** 2)
    k = alpha ** 2 * sigma ** 2 / 2

    def integrand(g):
        inv_i = k * g
        return float(inv_i * f((t * inv_i) ** (1.0 / alpha))) * sps.gamma.pdf(g, nu) / (alpha * mu)

    val, _ = integrate.quad(integrand, 0, np.inf, limit=200)
    return val


def direct_entrance(spec, alpha, x, t, f_id, N, seed, dt=1e-2, threads=1, values=None):
    """E_x f(X_t) by plain simulation from a small starting point.

    ``values`` (X_t samples from an earlier call) skips the simulation.
    """
    f = test_function(f_id)
    if values is None:
        values = lamperti.sample_values(spec, alpha, x, [t], N, dt, seed, threads)[:, 0]
    est, se = stats.mc_mean(f(values))
    return {"estimate": est, "stderr": se, "n_paths": len(values), "values": values}


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def _exp_piece(h0, slope, length, rate):
    """int_0^length exp(rate * (h0 + slope * l)) dl, elementwise."""
    g = rate * slope * length
    safe = np.where(slope != 0, rate * slope, 1.0)
    return np.exp(rate * h0) * np.where(slope != 0, np.expm1(g) / safe, length)


def _duality_transform(decomp, alpha, lam, q):
    """int_0^inf exp(-lam t - q Q_t) dt along one ladder path started at 1.

    With B the clock int exp(alpha h) dl and tau its inverse,
    Q_t = exp(alpha h_tau) int_0^tau exp(-alpha h_{s-}) ds.  Substituting
    t = B(l) turns the integral into one over local time.  h is linear in
    local time between epochs reached by creeping and constant before a
    jump epoch; each piece is integrated by Gauss-Legendre quadrature.
    """
    n = decomp.n_segments - 1
    h0, h1 = decomp.h[:n], decomp.h[1:n + 1]
    dl = decomp.dl[:n]
    jump = decomp.xi.is_event[decomp.epoch_idx[1:n + 1]]
    slope = np.where(jump, 0.0, (h1 - h0) / dl)
    B0 = np.concatenate([[0.0], np.cumsum(_exp_piece(h0, slope, dl, alpha))[:-1]])
    J0 = np.concatenate([[0.0], np.cumsum(_exp_piece(h0, slope, dl, -alpha))[:-1]])
    # quadrature nodes inside each piece
    col = lambda a: a[:, None]
    at = col(dl) * 0.5 * (_GL_NODES + 1.0)[None, :]
    hh = col(h0) + col(slope) * at
    B = col(B0) + _exp_piece(col(h0), col(slope), at, alpha)
    J = col(J0) + _exp_piece(col(h0), col(slope), at, -alpha)
    integrand = np.exp(-lam * B - q * np.exp(alpha * hh) * J + alpha * hh)
    return math.fsum((0.5 * dl * (integrand @ _GL_WEIGHTS)).tolist())


def laplace_duality(spec, alpha, pairs, N, seed, dt=1e-2, scale=None, tol=1e-8, threads=1):
    """Both sides of the (lam, q) <-> (q, lam) duality on the same ladder paths.

    ``pairs`` is a list of (lam, q).  Returns, for each, the two transforms
    with standard errors and the paired z-score of their difference.
    """
    scale = scale or fl.local_time_scale(spec, dt, seed)
    low = min(min(p) for p in pairs)
    t_max = -math.log(tol) / low

    def stop(d):
        return math.fsum((np.exp(alpha * d.h) * d.dl).tolist()) > t_max

    def one(i):
        _, d = cond._ladder_until(spec, alpha, dt, seed, i, scale, stop)
        return [(_duality_transform(d, alpha, lam, q), _duality_transform(d, alpha, q, lam))
                for lam, q in pairs]

    res = np.array(stats.parallel_map(one, range(N), threads))
    out = []
    for k, (lam, q) in enumerate(pairs):
        g1, s1 = stats.mc_mean(res[:, k, 0])
        g2, s2 = stats.mc_mean(res[:, k, 1])
        dm, ds = stats.mc_mean(res[:, k, 0] - res[:, k, 1])
        out.append({"lam": lam, "q": q, "forward": g1, "forward_se": s1, "swapped": g2,
                    "swapped_se": s2, "z": abs(dm) / ds if ds > 0 else 0.0})
    return out
