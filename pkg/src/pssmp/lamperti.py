"""The Lamperti transformation between Lévy paths and pssMp paths.

For a Lévy path ``xi`` and index ``alpha`` the process started at ``x`` is

    X_t = x * exp(xi(tau(t * x**-alpha))),   tau = right inverse of A,
    A_s = int_0^s exp(alpha * xi_u) du.

With a piecewise-constant skeleton the image of the input grid under
``s -> x**alpha * A_s`` is an exact output grid, so no interpolation enters.
"""
from dataclasses import dataclass

import numpy as np

from . import levy_model as lm
from .errors import ConfigError, HorizonTooShort, InconsistentInputs, NonPositiveValue
from .pathkit import IncreasingFn, PathSkeleton, exp_integral_curve, running_sup
from . import stats


@dataclass
class PssmpPath:
    alpha: float
    x: float
    path: PathSkeleton      # values of X on the image grid
    T0: float               # hitting time of 0, or inf when not reached
    clock: IncreasingFn     # s -> A_s on the Lévy time axis
    tail: float = 0.0       # estimated A_inf - A_T added into T0 (0 when not applicable)
    censored: bool = False  # True when T0 lies beyond the simulated window
    collapsed: int = 0      # knots dropped because their X-duration rounded to 0
    grid_times: np.ndarray = None   # image of every Lévy knot (nondecreasing)
    grid_values: np.ndarray = None

    def __post_init__(self):
        if self.grid_times is None:
            self.grid_times = self.path.times
            self.grid_values = self.path.values

    @property
    def times(self):
        return self.path.times

    @property
    def values(self):
        return self.path.values

    @property
    def end(self):
        return self.path.end

    def value_at(self, t):
        """X_t, with 0 after the absorption time."""
        t = np.asarray(t, dtype=float)
        inside = t < min(self.T0, self.path.end if self.path.killed else np.inf)
        # past the window only an absorbed or converged path is known
        if self.censored and np.any(inside & (t > self.path.end * (1 + 1e-12))):
            raise HorizonTooShort("requested time beyond the simulated window")
        k = np.searchsorted(self.path.times, np.minimum(t, self.path.end), side="right") - 1
        return np.where(inside, self.path.values[k], 0.0)

    def running_max(self):
        return running_sup(self.path, include_events=False).values

    def ratio_to_max(self):
        return self.running_max() / self.path.values

    def to_csv(self, fh):
        m = self.running_max()
        fh.write("t,X,M,M_over_X\n")
        for t, v, mm in zip(self.path.times, self.path.values, m):
            fh.write(f"{t!r},{v!r},{mm!r},{mm / v!r}\n")


def to_pssmp(xi, alpha, x, drift=None, cover=None):
    """Map a Lévy skeleton to the pssMp started at ``x``.

    ``drift`` (the mean of xi_1) switches on the absorption-time estimate
    when ``alpha * drift < 0``; ``cover`` demands the output reach that time.
    """
    if not x > 0:
        raise ConfigError("starting point must be positive")
    if alpha == 0:
        raise ConfigError("alpha must be nonzero")
    A = exp_integral_curve(xi, alpha)
    scale = x ** alpha
    times = scale * A
    vals = x * np.exp(xi.values)
    pre = np.where(xi.is_event, x * np.exp(xi.pre), np.nan)
    tail = 0.0
    censored = False
    if xi.killed:
        T0 = float(times[-1])
    elif drift is not None and alpha * drift < 0:
        tail = float(np.exp(alpha * xi.values[-1]) / abs(alpha * drift))
        T0 = float(scale * (A[-1] + tail))
    else:
        T0 = np.inf
        censored = True
    if cover is not None and times[-1] < cover and not np.isfinite(T0):
        raise HorizonTooShort(f"clock reaches only {times[-1]:.4g} < {cover}")
    # deep below the start, exp(alpha xi) ds can vanish next to A in floating point
    keep = np.append(np.diff(times) > 0, True)
    collapsed = int(len(keep) - keep.sum())
    path = PathSkeleton(times[keep], vals[keep], xi.is_event[keep], pre[keep],
                        lifetime=T0 if xi.killed else np.inf, killed=xi.killed,
                        origin_seed=xi.origin_seed)
    return PssmpPath(alpha=float(alpha), x=float(x), path=path, T0=T0,
                     clock=IncreasingFn(xi.times, A, "linear"), tail=tail, censored=censored,
                     collapsed=collapsed, grid_times=times, grid_values=vals)


def to_levy(X):
    """Recover the Lévy skeleton from a pssMp path and its stored clock."""
    if X.collapsed:
        raise InconsistentInputs(f"{X.collapsed} knots were merged; the Lévy path is not recoverable")
    if np.any(X.path.values <= 0):
        raise NonPositiveValue("pssMp values must be positive")
    vals = np.log(X.path.values / X.x)
    pre = np.where(X.path.is_event, np.log(X.path.pre / X.x), np.nan)
    return PathSkeleton(X.clock.t, vals, X.path.is_event, pre,
                        lifetime=X.path.lifetime / X.x ** X.alpha if X.path.killed else np.inf,
                        killed=X.path.killed, origin_seed=X.path.origin_seed)


def simulate_levy_until(spec, alpha, x, until, dt, seed, path_index=0,
                        max_steps=lm.DEFAULT_MAX_STEPS, tail_tol=1e-9):
    """Sample xi until the pssMp clock covers ``until``, the path dies, or A has converged."""
    ps = lm.PathStream(spec, dt, seed, path_index, max_steps=max_steps)
    scale = x ** alpha
    m = spec.mean()
    acc = 0.0
    while True:
        ps.extend()
        t, v = ps.last_block()
        acc += float(np.dot(np.exp(alpha * v[:-1]), np.diff(t)))
        last = float(v[-1])
        if scale * acc >= until or ps.horizon >= ps.lifetime:
            break
        if alpha * m < 0 and np.exp(alpha * last) / abs(alpha * m) < tail_tol * acc:
            break
    return ps.skeleton()


def simulate(spec, alpha, x, until, dt, seed, path_index=0, max_steps=lm.DEFAULT_MAX_STEPS):
    """Sample a pssMp path started at ``x`` that covers X-time ``until``."""
    xi = simulate_levy_until(spec, alpha, x, until, dt, seed, path_index, max_steps)
    return to_pssmp(xi, alpha, x, drift=spec.mean())


def sample_values(spec, alpha, x, t_list, n, dt, seed, threads=1):
    """Matrix of X_t (rows: paths, columns: t_list) from independent paths."""
    t_list = np.asarray(t_list, dtype=float)

    def one(i):
        X = simulate(spec, alpha, x, float(t_list.max()), dt, seed, i)
        return X.value_at(t_list)

    return np.array(stats.parallel_map(one, range(n), threads))


def check_scaling(spec, alpha, x, c, t_list, n, seed, dt=1e-2, threads=1, level=0.01):
    """KS test of c*X_{t c^-alpha} from x against X_t from c*x, per t.

    The two samples are drawn from independent seeds.
    """
    from . import rng as _rng

    t_list = np.asarray(t_list, dtype=float)
    a = sample_values(spec, alpha, x, t_list * c ** (-alpha), n, dt, _rng.derive(seed, 1), threads)
    b = sample_values(spec, alpha, c * x, t_list, n, dt, _rng.derive(seed, 2), threads)
    return [stats.ks_two_sample(c * a[:, j], b[:, j], level) for j in range(len(t_list))]
