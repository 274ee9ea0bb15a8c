"""Catalogue of bounded test functions and excursion functionals.

Identifiers are what configuration files and the CLI refer to.
"""

import numpy as np

from .errors import UnknownFunctional

# bounded test functions f: (0, inf) -> R
TEST_FUNCTIONS = {
    "one": lambda y: np.ones_like(np.asarray(y, dtype=float)),
    "exp_neg": lambda y: np.exp(-np.asarray(y, dtype=float)),
    "inv1p": lambda y: 1.0 / (1.0 + np.asarray(y, dtype=float)),
    "le1": lambda y: (np.asarray(y, dtype=float) <= 1.0).astype(float),
    "tanh": lambda y: np.tanh(np.asarray(y, dtype=float)),
}


def test_function(f_id):
    try:
        return TEST_FUNCTIONS[f_id]
    except KeyError:
        raise UnknownFunctional(f"unknown test function {f_id!r}") from None


test_function.__test__ = False


def pool_excursion_features(pool):
    """Per-segment summaries of an excursion pool."""
    depth = np.maximum.reduceat(pool.eps, pool.seg_start)
    sup_ds = pool.ds[pool.seg_start]
    nonempty = np.diff(np.append(pool.seg_start, len(pool.eps))) > 1
    return {"depth": depth, "yexc": pool.dY - sup_ds, "terminal": pool.terminal,
            "dl": pool.dl, "nonempty": nonempty, "path": pool.seg_path}


def decomposition_features(decomp, nseg):
    """The same summaries for the first ``nseg`` (completed) segments of one path."""
    ep = decomp.epoch_idx
    depth = np.maximum.reduceat(decomp.eps, ep)[:nseg]
    return {"depth": depth, "yexc": (decomp.dY - decomp.ds[ep])[:nseg],
            "terminal": decomp.terminals[:nseg], "nonempty": (np.diff(ep) > 1)[:nseg]}


class ExitFunctional:
    """F(M_G, excursion): ``pathwise`` evaluates it on observed excursions,
    ``measure`` integrates it against the excursion measure at level M_G
    using pool features normalised by the pool's local time ``L``."""

    def __init__(self, name, pathwise, measure):
        self.name = name
        self.pathwise = pathwise
        self.measure = measure


def exit_functional(F_id, params=None):
    p = {"depth": 0.5, "delta": 0.05, "alpha": 1.0}
    p.update(params or {})
    d, delta, alpha = p["depth"], p["delta"], p["alpha"]

    if F_id == "one":
        return ExitFunctional(
            F_id,
            lambda Mg, own: own["nonempty"].astype(float),
            lambda Mg, pf, L: np.full(len(Mg), pf["nonempty"].sum() / L))
    if F_id == "deep":
        return ExitFunctional(
            F_id,
            lambda Mg, own: (own["depth"] > d).astype(float),
            lambda Mg, pf, L: np.full(len(Mg), np.sum(pf["depth"] > d) / L))
    if F_id == "deep_weighted":
        return ExitFunctional(
            F_id,
            lambda Mg, own: (own["depth"] > d) / (1.0 + Mg),
            lambda Mg, pf, L: np.sum(pf["depth"] > d) / L / (1.0 + Mg))
    if F_id == "long":
        def measure(Mg, pf, L):
            ys = np.sort(pf["yexc"])
            thr = delta * Mg ** (-alpha)
            return (len(ys) - np.searchsorted(ys, thr, side="right")) / L

        return ExitFunctional(
            F_id,
            lambda Mg, own: (Mg ** alpha * own["yexc"] > delta).astype(float),
            measure)
    if F_id == "ends_below":
        # the excursion ends strictly below where it started
        return ExitFunctional(
            F_id,
            lambda Mg, own: (own["terminal"] > 0).astype(float),
            lambda Mg, pf, L: np.full(len(Mg), np.sum(pf["terminal"] > 0) / L))
    raise UnknownFunctional(f"unknown excursion functional {F_id!r}")


def exit_weight(V_id, t):
    if V_id == "window":
        return lambda s: (np.asarray(s) <= t).astype(float)
    if V_id == "zero":
        return lambda s: np.zeros_like(np.asarray(s, dtype=float))
    raise UnknownFunctional(f"unknown weight process {V_id!r}")


EXIT_FUNCTIONALS = ("one", "deep", "deep_weighted", "long", "ends_below")
EXIT_WEIGHTS = ("window", "zero")
