"""Parametric Lévy models and exact-in-law skeleton samplers.

The catalogue is Brownian motion with drift plus an optional compound
Poisson component whose jumps are two-sided exponential, deterministic or
finitely supported.  Every downstream quantity has either a closed form or
a brute-force oracle for these families.
"""
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rng as _rng
from .errors import BudgetExceeded, ConfigError, InvalidGrid, UnsupportedSpec
from .pathkit import PathSkeleton

JUMP_KINDS = ("two-sided-exponential", "deterministic", "discrete")

#: cells per random block; blocks are the unit of deterministic extension
BLOCK_CELLS = 4096

#: default cap on the number of grid cells in one path
DEFAULT_MAX_STEPS = 50_000_000


@dataclass(frozen=True)
class JumpLaw:
    """Law of a single jump of the compound Poisson component."""

    kind: str
    p_up: float = 0.5
    rate_up: float = 1.0
    rate_down: float = 1.0
    size: float = 0.0
    atoms: tuple = ()
    p_down: float = None    # stored so that mirroring twice is exact

    def __post_init__(self):
        if self.kind not in JUMP_KINDS:
            raise UnsupportedSpec(f"jump family {self.kind!r} is not in the catalogue")
        if self.kind == "two-sided-exponential":
            if not 0.0 <= self.p_up <= 1.0:
                raise ConfigError("p_up must lie in [0, 1]")
            if self.p_down is None:
                object.__setattr__(self, "p_down", 1.0 - self.p_up)
            elif abs(self.p_up + self.p_down - 1.0) > 1e-12:
                raise ConfigError("p_up and p_down must sum to 1")
            if self.rate_up <= 0 or self.rate_down <= 0:
                raise ConfigError("exponential rates must be positive")
        elif self.kind == "discrete":
            if not self.atoms:
                raise ConfigError("a discrete jump law needs at least one atom")
            probs = np.array([p for _, p in self.atoms], dtype=float)
            if np.any(probs < 0) or np.any(probs > 1) or abs(probs.sum() - 1.0) > 1e-12:
                raise ConfigError("atom probabilities must lie in [0,1] and sum to 1")

    @classmethod
    def two_sided_exponential(cls, p_up, rate_up, rate_down, p_down=None):
        return cls("two-sided-exponential", p_up=float(p_up), rate_up=float(rate_up),
                   rate_down=float(rate_down), p_down=None if p_down is None else float(p_down))

    @classmethod
    def deterministic(cls, size):
        return cls("deterministic", size=float(size))

    @classmethod
    def discrete(cls, atoms):
        return cls("discrete", atoms=tuple((float(v), float(p)) for v, p in atoms))

    def mean(self):
        if self.kind == "two-sided-exponential":
            return self.p_up / self.rate_up - self.p_down / self.rate_down
        if self.kind == "deterministic":
            return self.size
        return sum(v * p for v, p in self.atoms)

    def prob_up(self):
        if self.kind == "two-sided-exponential":
            return self.p_up
        if self.kind == "deterministic":
            return float(self.size > 0)
        return sum(p for v, p in self.atoms if v > 0)

    def prob_down(self):
        if self.kind == "two-sided-exponential":
            return self.p_down
        if self.kind == "deterministic":
            return float(self.size < 0)
        return sum(p for v, p in self.atoms if v < 0)

    def mirror(self):
        """Law of ``-J``."""
        if self.kind == "two-sided-exponential":
            return JumpLaw.two_sided_exponential(self.p_down, self.rate_down, self.rate_up, self.p_up)
        if self.kind == "deterministic":
            return JumpLaw.deterministic(-self.size)
        return JumpLaw.discrete([(-v, p) for v, p in self.atoms])

    def sample(self, gen, n):
        if n == 0:
            return np.zeros(0)
        if self.kind == "two-sided-exponential":
            up = gen.random(n) < self.p_up
            e = gen.standard_exponential(n)
            return np.where(up, e / self.rate_up, -e / self.rate_down)
        if self.kind == "deterministic":
            return np.full(n, self.size)
        vals = np.array([v for v, _ in self.atoms])
        probs = np.array([p for _, p in self.atoms])
        return vals[gen.choice(len(vals), size=n, p=probs)]

    def mgf(self, beta):
        """E exp(beta J), where finite."""
        if self.kind == "two-sided-exponential":
            return (self.p_up * self.rate_up / (self.rate_up - beta)
                    + self.p_down * self.rate_down / (self.rate_down + beta))
        if self.kind == "deterministic":
            return np.exp(beta * self.size)
        return sum(p * np.exp(beta * v) for v, p in self.atoms)

    def to_dict(self):
        if self.kind == "two-sided-exponential":
            return {"kind": self.kind, "p_up": self.p_up, "p_down": self.p_down, "rate_up": self.rate_up,
                    "rate_down": self.rate_down}
        if self.kind == "deterministic":
            return {"kind": self.kind, "size": self.size}
        return {"kind": self.kind, "atoms": [list(a) for a in self.atoms]}

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind")
        if kind == "two-sided-exponential":
            return cls.two_sided_exponential(d["p_up"], d["rate_up"], d["rate_down"], d.get("p_down"))
        if kind == "deterministic":
            return cls.deterministic(d["size"])
        if kind == "discrete":
            return cls.discrete(d["atoms"])
        raise UnsupportedSpec(f"jump family {kind!r} is not in the catalogue")


@dataclass(frozen=True)
class LevySpec:
    """Drift, Brownian volatility, compound Poisson jumps and killing rate."""

    drift: float = 0.0
    sigma: float = 0.0
    jump_rate: float = 0.0
    jump_law: JumpLaw = None
    kill_rate: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.sigma < 0 or self.jump_rate < 0 or self.kill_rate < 0:
            raise ConfigError("sigma, jump rate and kill rate must be nonnegative")
        if self.jump_rate > 0 and self.jump_law is None:
            raise ConfigError("a positive jump rate needs a jump law")
        if not (self.sigma > 0 or self.drift != 0 or self.jump_rate > 0):
            raise ConfigError("degenerate Lévy process: no drift, diffusion or jumps")

    @property
    def has_jumps(self):
        return self.jump_rate > 0

    def mean(self):
        """E(xi_1) of the unkilled process."""
        m = self.drift
        if self.has_jumps:
            m += self.jump_rate * self.jump_law.mean()
        return m

    def laplace_exponent(self, beta):
        """psi(beta) = log E exp(beta xi_1) on the unkilled process."""
        val = self.drift * beta + 0.5 * self.sigma ** 2 * beta ** 2
        if self.has_jumps:
            val = val + self.jump_rate * (self.jump_law.mgf(beta) - 1.0)
        return val

    def to_dict(self):
        d = {"drift": self.drift, "sigma": self.sigma, "jump_rate": self.jump_rate,
             "kill_rate": self.kill_rate, "label": self.label}
        d["jumps"] = self.jump_law.to_dict() if self.jump_law is not None else None
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("levy section must be a mapping")
        unknown = set(d) - {"drift", "sigma", "jump_rate", "jumps", "kill_rate", "label"}
        if unknown:
            raise ConfigError(f"unknown levy keys: {sorted(unknown)}")
        jumps = d.get("jumps")
        if not jumps and float(d.get("jump_rate") or 0.0) > 0:
            raise ConfigError("jump_rate > 0 needs a jumps section")
        law = JumpLaw.from_dict(jumps) if jumps else None
        try:
            return cls(drift=float(d.get("drift", 0.0)), sigma=float(d.get("sigma", 0.0)),
                       jump_rate=float(d.get("jump_rate", 0.0)) if law is not None else 0.0,
                       jump_law=law, kill_rate=float(d.get("kill_rate", 0.0)),
                       label=str(d.get("label", "")))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class RegularityReport:
    reg_up: bool
    reg_down: bool
    drifts_to: str
    a_positive: bool


def classify(spec):
    """Regularity of 0 and long-run behaviour from closed-form criteria."""
    if spec.jump_law is not None and spec.jump_law.kind not in JUMP_KINDS:
        raise UnsupportedSpec(spec.jump_law.kind)
    if spec.sigma > 0:
        reg_up = reg_down = True
    else:
        # bounded variation: the sign of the drift decides
        reg_up = spec.drift > 0
        reg_down = spec.drift < 0
    m = spec.mean()
    if m > 0:
        drifts = "+inf"
    elif m < 0:
        drifts = "-inf"
    else:
        drifts = "oscillates"
    return RegularityReport(reg_up=reg_up, reg_down=reg_down, drifts_to=drifts,
                            a_positive=not reg_down)


def dual(spec):
    """The dual process -xi."""
    law = spec.jump_law.mirror() if spec.jump_law is not None else None
    label = spec.label[:-5] if spec.label.endswith(":dual") else (spec.label + ":dual")
    return LevySpec(drift=-spec.drift, sigma=spec.sigma, jump_rate=spec.jump_rate,
                    jump_law=law, kill_rate=spec.kill_rate, label=label)


def ladder_supported(spec):
    """True when 0 is regular for [0, inf), the standing assumption of ladder ops."""
    return spec.sigma > 0 or spec.drift >= 0


def is_arithmetic(spec, tol=1e-9):
    """Lattice check for the upward ladder height process.

    Diffusion or a positive drift make the ladder height non-lattice.  With
    neither, the ladder height moves only by jumps, which are lattice exactly
    when every jump atom is a rational multiple of the others.
    """
    if spec.sigma > 0 or spec.drift != 0:
        return False
    if not spec.has_jumps:
        return False
    law = spec.jump_law
    if law.kind == "two-sided-exponential":
        return False
    vals = [law.size] if law.kind == "deterministic" else [v for v, _ in law.atoms]
    vals = [abs(v) for v in vals if v != 0]
    if not vals:
        return False
    base = vals[0]
    for v in vals[1:]:
        # small denominators only: with a large bound every real passes the tolerance
        r = Fraction(v / base).limit_denominator(1000)
        if abs(float(r) - v / base) > tol:
            return False
    return True


def _sample_block(spec, dt, block, gen):
    """One block of BLOCK_CELLS grid cells; returns knot arrays after the block start."""
    nc = BLOCK_CELLS
    cell0 = block * nc
    if spec.has_jumps:
        counts = gen.poisson(spec.jump_rate * dt, nc)
    else:
        counts = np.zeros(nc, dtype=np.int64)
    ne = int(counts.sum())
    if ne:
        ev_cell = np.repeat(np.arange(nc), counts)
        u = gen.random(ne)
        u = np.clip(u, 1e-9, 1.0 - 1e-9)
        order = np.lexsort((u, ev_cell))
        ev_cell, u = ev_cell[order], u[order]
        jumps = spec.jump_law.sample(gen, ne)
        kcell = np.concatenate([ev_cell, np.arange(nc)])
        koff = np.concatenate([u, np.ones(nc)])
        kev = np.concatenate([np.ones(ne, bool), np.zeros(nc, bool)])
        kjump = np.concatenate([jumps, np.zeros(nc)])
        order = np.lexsort((koff, kcell))
        kcell, koff, kev, kjump = kcell[order], koff[order], kev[order], kjump[order]
        prev = np.empty_like(koff)
        prev[0] = 0.0
        prev[1:] = np.where(kcell[1:] == kcell[:-1], koff[:-1], 0.0)
        frac = koff - prev
    else:
        kcell = np.arange(nc)
        koff = np.ones(nc)
        kev = np.zeros(nc, bool)
        kjump = np.zeros(nc)
        frac = koff
    length = frac * dt
    inc = spec.drift * length
    if spec.sigma > 0:
        inc = inc + spec.sigma * np.sqrt(length) * gen.standard_normal(len(length))
    times = np.where(kev, (cell0 + kcell + koff) * dt, (cell0 + kcell + 1) * dt)
    return kcell + cell0, times, inc, kev, kjump


class PathStream:
    """Incrementally sampled skeleton of one Lévy path.

    Blocks are generated in order from independent counter streams, so a
    path extended in several steps is bit-identical to one sampled at once.
    """

    def __init__(self, spec, dt, seed, path_index=0, max_steps=DEFAULT_MAX_STEPS):
        if not dt > 0:
            raise InvalidGrid("dt must be positive")
        if spec.has_jumps and spec.jump_rate * dt > 0.1:
            raise InvalidGrid("jump_rate * dt must not exceed 0.1")
        self.spec = spec
        self.dt = float(dt)
        self.seed = _rng.normalize_seed(seed)
        self.path_index = int(path_index)
        self.max_steps = int(max_steps)
        self._times = [np.zeros(1)]
        self._vals = [np.zeros(1)]
        self._ev = [np.zeros(1, bool)]
        self._pre = [np.full(1, np.nan)]
        self._last = 0.0
        self.blocks = 0
        if spec.kill_rate > 0:
            g = _rng.stream(self.seed, self.path_index, 0, _rng.TAG_LIFETIME)
            self.lifetime = float(g.exponential(1.0 / spec.kill_rate))
        else:
            self.lifetime = np.inf

    @property
    def cells(self):
        return self.blocks * BLOCK_CELLS

    @property
    def horizon(self):
        return self.cells * self.dt

    def extend(self, nblocks=1):
        for _ in range(nblocks):
            if (self.blocks + 1) * BLOCK_CELLS > self.max_steps:
                raise BudgetExceeded(f"path would exceed {self.max_steps} steps")
            gen = _rng.stream(self.seed, self.path_index, self.blocks)
            cells, times, inc, ev, jump = _sample_block(self.spec, self.dt, self.blocks, gen)
            vals = self._last + np.cumsum(inc + jump)
            pre = np.where(ev, vals - jump, np.nan)
            self._last = float(vals[-1])
            self._times.append(times)
            self._vals.append(vals)
            self._ev.append(ev)
            self._pre.append(pre)
            self.blocks += 1
            if self.horizon >= self.lifetime:
                break

    def last_block(self):
        """Knot times and values of the newest block, prefixed by the knot before it."""
        t = np.concatenate([self._times[-2][-1:], self._times[-1]])
        v = np.concatenate([self._vals[-2][-1:], self._vals[-1]])
        return t, v

    def extend_to(self, horizon):
        need = int(np.ceil(horizon / self.dt - 1e-9))
        while self.cells < need and self.horizon < self.lifetime:
            self.extend()

    def skeleton(self, horizon=None):
        """Return the sampled path up to ``horizon`` (default: everything sampled)."""
        times = np.concatenate(self._times)
        vals = np.concatenate(self._vals)
        ev = np.concatenate(self._ev)
        pre = np.concatenate(self._pre)
        if horizon is not None:
            keep = times <= horizon * (1 + 1e-12) + 1e-300
            times, vals, ev, pre = times[keep], vals[keep], ev[keep], pre[keep]
        lifetime = self.lifetime
        killed = False
        if np.isfinite(lifetime) and lifetime <= times[-1]:
            alive = times < lifetime
            times, vals, ev, pre = times[alive], vals[alive], ev[alive], pre[alive]
            # terminal knot at the killing time; its value repeats the last one
            times = np.append(times, lifetime)
            vals = np.append(vals, vals[-1])
            ev = np.append(ev, False)
            pre = np.append(pre, np.nan)
            killed = True
        return PathSkeleton(times, vals, ev, pre, lifetime=lifetime, killed=killed,
                            origin_seed=(self.seed, self.path_index))


def sample_skeleton(spec, horizon, dt, seed, path_index=0, max_steps=DEFAULT_MAX_STEPS):
    """Sample a Lévy skeleton on the grid {0, dt, 2dt, ...} up to ``horizon``.

    Gaussian increments are exact per cell, jump counts are Poisson per cell
    and jump epochs are uniform inside the cell; every jump becomes an
    intra-cell knot so that suprema do not miss jump peaks.
    """
    if not (dt > 0 and horizon > 0) or dt > horizon * (1 + 1e-12):
        raise InvalidGrid("need 0 < dt <= horizon")
    ncell = int(np.floor(horizon / dt + 1e-9))
    if ncell > max_steps:
        raise BudgetExceeded(f"{ncell} steps exceed the cap {max_steps}")
    ps = PathStream(spec, dt, seed, path_index, max_steps=max(max_steps, BLOCK_CELLS))
    ps.extend_to(ncell * dt)
    return ps.skeleton(ncell * dt)


def catalogue():
    """The three reference models used by the acceptance suite."""
    return {
        "bm_drift": LevySpec(drift=0.5, sigma=1.0, label="bm_drift"),
        "bm": LevySpec(sigma=1.0, label="bm"),
        "cp": LevySpec(drift=1.0, jump_rate=1.0,
                       jump_law=JumpLaw.two_sided_exponential(0.4, 2.0, 1.5), label="cp"),
    }
