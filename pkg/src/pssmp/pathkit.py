"""Path containers and path algebra on piecewise-constant skeletons.

A skeleton stores knots ``t_0 = 0 < t_1 < ...`` and the value held on
``[t_k, t_{k+1})``.  Knots created by a jump also carry the left limit
(``pre``) so that suprema can see the value just before the jump.
"""
import io
import json
import struct

import numpy as np

from .errors import EmptyPath, OutOfRange

BINARY_MAGIC = b"PSSMPATH"
BINARY_VERSION = 1


class PathSkeleton:
    """Immutable knot representation of a càdlàg path.

    ``killed`` marks a path sent to the cemetery at ``lifetime``; the final
    knot then sits at the killing time and only closes the last interval.
    """

    __slots__ = ("times", "values", "is_event", "pre", "lifetime", "killed", "origin_seed")

    def __init__(self, times, values, is_event=None, pre=None, lifetime=np.inf,
                 killed=False, origin_seed=None):
        times = np.ascontiguousarray(times, dtype=float)
        values = np.ascontiguousarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if len(times) == 0:
            raise EmptyPath("a path needs at least one knot")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        n = len(times)
        if is_event is None:
            is_event = np.zeros(n, dtype=bool)
        if pre is None:
            pre = np.full(n, np.nan)
        self.times = times
        self.values = values
        self.is_event = np.ascontiguousarray(is_event, dtype=bool)
        self.pre = np.ascontiguousarray(pre, dtype=float)
        self.lifetime = float(lifetime)
        self.killed = bool(killed)
        self.origin_seed = origin_seed
        for a in (self.times, self.values, self.is_event, self.pre):
            a.setflags(write=False)

    def __len__(self):
        return len(self.times)

    def __repr__(self):
        return (f"PathSkeleton(n={len(self)}, end={self.end:.6g}, "
                f"events={int(self.is_event.sum())}, killed={self.killed})")

    @property
    def end(self):
        return float(self.times[-1])

    @property
    def events(self):
        """List of (time, pre-value, post-value) for intra-cell jumps."""
        idx = np.flatnonzero(self.is_event)
        return [(float(self.times[i]), float(self.pre[i]), float(self.values[i])) for i in idx]

    @property
    def durations(self):
        """Length of the interval on which each knot value is held (last one is 0)."""
        return np.append(np.diff(self.times), 0.0)

    def value_at(self, t):
        """Right-continuous evaluation at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.end * (1 + 1e-12)):
            raise OutOfRange("evaluation time outside the path")
        k = np.searchsorted(self.times, t, side="right") - 1
        return self.values[k]

    def left_limits(self):
        """Value just before each knot; the first entry is the initial value."""
        left = np.empty_like(self.values)
        left[0] = self.values[0]
        left[1:] = self.values[:-1]
        left = np.where(self.is_event, self.pre, left)
        return left

    def with_values(self, values, pre=None):
        return PathSkeleton(self.times, values, self.is_event,
                            self.pre if pre is None else pre, self.lifetime,
                            self.killed, self.origin_seed)

    def __eq__(self, other):
        if not isinstance(other, PathSkeleton):
            return NotImplemented
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.is_event, other.is_event)
                and np.array_equal(self.pre, other.pre, equal_nan=True)
                and self.killed == other.killed)

    __hash__ = None

    # exports

    def to_csv(self, fh):
        fh.write("t,value,is_event\n")
        for t, v, e in zip(self.times, self.values, self.is_event):
            fh.write(f"{t!r},{v!r},{int(e)}\n")

    def to_bytes(self):
        header = json.dumps({"lifetime": self.lifetime if np.isfinite(self.lifetime) else None,
                             "killed": self.killed,
                             "origin_seed": list(self.origin_seed) if self.origin_seed else None},
                            sort_keys=True).encode()
        buf = io.BytesIO()
        buf.write(BINARY_MAGIC)
        buf.write(struct.pack("<HQI", BINARY_VERSION, len(self), len(header)))
        buf.write(header)
        for a in (self.times, self.values, self.pre):
            buf.write(a.astype("<f8").tobytes())
        buf.write(self.is_event.astype(np.uint8).tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data):
        if data[:8] != BINARY_MAGIC:
            raise ValueError("not a path file (bad magic)")
        version, n, hlen = struct.unpack_from("<HQI", data, 8)
        if version != BINARY_VERSION:
            raise ValueError(f"unsupported path file version {version}")
        off = 8 + struct.calcsize("<HQI")
        meta = json.loads(data[off:off + hlen])
        off += hlen
        arrs = []
        for _ in range(3):
            arrs.append(np.frombuffer(data, "<f8", n, off).astype(float))
            off += 8 * n
        ev = np.frombuffer(data, np.uint8, n, off).astype(bool)
        lifetime = meta["lifetime"] if meta["lifetime"] is not None else np.inf
        seed = tuple(meta["origin_seed"]) if meta["origin_seed"] else None
        return cls(arrs[0], arrs[1], ev, arrs[2], lifetime, meta["killed"], seed)


class IncreasingFn:
    """Nondecreasing function given by knots, either step or piecewise linear.

    A step function holds ``v_k`` on ``[t_k, t_{k+1})``; a linear one
    interpolates between knots.  Both are constant beyond the last knot.
    """

    __slots__ = ("t", "v", "kind")

    def __init__(self, t, v, kind="linear"):
        t = np.asarray(t, dtype=float)
        v = np.asarray(v, dtype=float)
        if t.shape != v.shape or t.ndim != 1 or len(t) == 0:
            raise ValueError("knot arrays must be 1-d, nonempty and of equal length")
        if np.any(np.diff(t) < 0) or np.any(np.diff(v) < 0):
            raise ValueError("knots must be nondecreasing in both coordinates")
        if kind not in ("linear", "step"):
            raise ValueError("kind must be 'linear' or 'step'")
        self.t, self.v, self.kind = t, v, kind

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "linear":
            return np.interp(s, self.t, self.v)
        k = np.searchsorted(self.t, s, side="right") - 1
        return np.where(k < 0, self.v[0], self.v[np.maximum(k, 0)])

    @property
    def sup(self):
        return float(self.v[-1])


def right_inverse(f, y):
    """inf{s : f(s) > y}, or +inf when f never exceeds ``y``."""
    y_arr = np.asarray(y, dtype=float)
    k = np.searchsorted(f.v, y_arr, side="right")
    n = len(f.v)
    kk = np.minimum(k, n - 1)
    if f.kind == "step":
        out = f.t[kk]
    else:
        lo = np.maximum(kk - 1, 0)
        dv = f.v[kk] - f.v[lo]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(dv > 0, (y_arr - f.v[lo]) / dv, 0.0)
        out = np.where(k == 0, f.t[0], f.t[lo] + frac * (f.t[kk] - f.t[lo]))
    out = np.where(k >= n, np.inf, out)
    return float(out) if np.ndim(out) == 0 else out


def running_sup(path, include_events=True):
    """Running supremum; with ``include_events`` the left limits at jumps count too."""
    vals = path.values
    if include_events and path.is_event.any():
        peaks = np.where(path.is_event, np.fmax(path.pre, vals), vals)
    else:
        peaks = vals
    sup = np.maximum.accumulate(peaks)
    return path.with_values(sup)


def reflect_at_sup(path, include_events=False):
    """``sup_{s<=t} xi_s - xi_t``; zero exactly at knots carrying a running maximum."""
    sup = running_sup(path, include_events).values
    return path.with_values(sup - path.values)


def exp_integral(path, alpha, upto=None):
    """Left-endpoint integral of exp(alpha * xi) over [0, upto]."""
    t_end = path.end if upto is None else float(upto)
    if t_end < 0 or t_end > path.end * (1 + 1e-12) + 1e-15:
        raise OutOfRange(f"t={t_end} outside [0, {path.end}]")
    times = path.times
    k = int(np.searchsorted(times, t_end, side="right")) - 1
    w = np.exp(alpha * path.values[:k])
    full = np.dot(w, np.diff(times[:k + 1])) if k > 0 else 0.0
    return float(full + np.exp(alpha * path.values[k]) * (t_end - times[k]))


def exp_integral_curve(path, alpha):
    """Cumulative left-endpoint integral at every knot."""
    w = np.exp(alpha * path.values[:-1]) * np.diff(path.times)
    return np.concatenate([[0.0], np.cumsum(w)])


def time_reverse(path, at=None):
    """Path ``s -> xi_t - xi_{(t-s)-}`` on the reversed grid, jumps mirrored.

    Grid knots map to ``xi_t - xi_{t_k}``; a jump knot with left limit
    ``pre`` and value ``post`` becomes one with left limit ``xi_t - post``
    and value ``xi_t - pre``.
    """
    if at is not None and at < path.end:
        k = int(np.searchsorted(path.times, at, side="right"))
        t_cut = path.times[:k]
        if t_cut[-1] < at:
            sub = PathSkeleton(np.append(t_cut, at), np.append(path.values[:k], path.values[k - 1]),
                               np.append(path.is_event[:k], False), np.append(path.pre[:k], np.nan))
        else:
            sub = PathSkeleton(t_cut, path.values[:k], path.is_event[:k], path.pre[:k])
        return time_reverse(sub)
    t_end = path.end
    v_end = path.values[-1]
    times = t_end - path.times[::-1]
    ev = path.is_event[::-1]
    post = path.values[::-1]
    pre = path.pre[::-1]
    vals = np.where(ev, v_end - pre, v_end - post)
    new_pre = np.where(ev, v_end - post, np.nan)
    return PathSkeleton(times, vals, ev, new_pre)
