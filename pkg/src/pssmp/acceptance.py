"""The acceptance suite: fourteen pass/fail checks at three budget tiers.

Each check returns a ``CriterionResult`` whose ``data`` holds only numbers
that are fixed by (profile, seed); wall-clock timings are kept apart in
``seconds`` so that data files can be compared byte for byte.
"""
import json
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import conditioned as cond
from . import fluctuation as fl
from . import lamperti
from . import ladder_process as lp
from . import levy_model as lm
from . import resolvent_entrance as rx
from . import rng as _rng
from . import stats
from .errors import ConfigError

NAMES = {
    1: "Lamperti round trip",
    2: "clock identity at ladder epochs",
    3: "time at the supremum equals a times local time",
    4: "occupation approximation of local time",
    5: "direct and triple constructions of (R, H) agree in law",
    6: "scaling of (R, H)",
    7: "exit formula",
    8: "resolvent of the constant function",
    9: "Wiener-Hopf product",
    10: "Itilde against the pasted-path functional",
    11: "entrance measure normalisation",
    12: "entrance law: three routes and the closed form",
    13: "E(1/I_h) = alpha mu_plus",
    14: "determinism across thread counts",
}

# budgets; ``tol`` multiplies every numeric (non-statistical) tolerance
PROFILES = {
    "smoke": dict(tol=1.0, c1_paths=2, c2_paths=3, c3_paths=3,
                  c4_dt_exp=18, c4_eps=(3, 4, 5, 6, 7), c4_paths=4, c4_horizon=2.0, c4_cal_paths=8,
                  c5_n=120, c5_dt=1e-2, c6_n=120, c6_dt=1e-2,
                  c7_n=300, c7_dt=1e-2, c7_pool=(50.0, 10),
                  c8_n=60, c8_direct=200, c8_dt=1e-2, c8_pool=(30.0, 5), c8_models=("bm_drift",),
                  c9_n=400, c9_dt=0.04,
                  c10_n=120, c10_dt=1e-2,
                  c11_n=400, c11_dt=1e-2, c11_pool=(40.0, 5),
                  c12_eta=400, c12_by=1000, c12_direct=1000, c12_dt=1e-2, c12_pool=(40.0, 5),
                  c13_n=300, c13_dt=1e-2),
    "desk": dict(tol=1.0, c1_paths=5, c2_paths=20, c3_paths=20,
                 c4_dt_exp=20, c4_eps=(3, 4, 5, 6, 7, 8), c4_paths=8, c4_horizon=4.0, c4_cal_paths=16,
                 c5_n=10_000, c5_dt=1e-3, c6_n=5000, c6_dt=1e-3,
                 c7_n=4000, c7_dt=1e-3, c7_pool=(200.0, 40),
                 c8_n=1000, c8_direct=4000, c8_dt=1e-2, c8_pool=(50.0, 10),
                 c8_models=("bm_drift", "cp", "bm"),
                 c9_n=4000, c9_dt=1e-2,
                 c10_n=5000, c10_dt=1e-3,
                 c11_n=4000, c11_dt=1e-3, c11_pool=(100.0, 10),
                 c12_eta=5000, c12_by=20_000, c12_direct=20_000, c12_dt=1e-3, c12_pool=(100.0, 20),
                 c13_n=4000, c13_dt=1e-3),
}
PROFILES["deep"] = dict(PROFILES["desk"], tol=0.5, c5_n=20_000, c6_n=10_000, c7_n=10_000,
                        c8_n=4000, c8_direct=10_000, c9_n=20_000, c10_n=10_000, c11_n=10_000,
                        c12_eta=20_000, c12_by=80_000, c12_direct=80_000, c13_n=10_000,
                        c4_paths=16, c4_cal_paths=64, c4_horizon=16.0)

# criteria rerun by the determinism check, at the smoke budget
DETERMINISM_SUBSET = (1, 2, 3, 5, 7, 13)


@dataclass
class CriterionResult:
    number: int
    passed: bool
    data: dict
    tables: dict = field(default_factory=dict)   # name -> (header, rows) written as CSV
    seconds: float = 0.0

    def __post_init__(self):
        self.passed = bool(self.passed)

    @property
    def name(self):
        return NAMES[self.number]

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:2d}: {self.name}"


def _models(names=None):
    cat = lm.catalogue()
    return {k: cat[k] for k in (names or cat)}


def _clean(obj):
    """Plain JSON types only."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


# ---------------------------------------------------------------------------
# criteria


def c1(p, seed, threads):
    worst = {}
    for name, spec in _models().items():
        gap = 0.0
        for dt in (1e-2, 1e-3):
            for alpha in (1.0, 0.5, -1.0):
                for i in range(p["c1_paths"]):
                    xi = lm.sample_skeleton(spec, 5.0, dt, seed, i)
                    back = lamperti.to_levy(lamperti.to_pssmp(xi, alpha, 1.7))
                    gap = max(gap, float(np.max(np.abs(back.values - xi.values))))
                    ev = xi.is_event
                    if ev.any():
                        gap = max(gap, float(np.max(np.abs(back.pre[ev] - xi.pre[ev]))))
        worst[name] = gap
    bound = 1e-12 * p["tol"]
    return CriterionResult(1, all(g <= bound for g in worst.values()),
                           {"max_abs_gap": worst, "bound": bound})


def c2(p, seed, threads):
    worst = {}
    for name, spec in _models().items():
        sc = fl.local_time_scale(spec, 1e-3, seed)

        def one(i):
            xi = lm.sample_skeleton(spec, 20.0, 1e-3, seed, i)
            A, rebuilt = fl.clock_at_epochs(fl.decompose(xi, 1.0, sc))
            ok = A > 0
            return float(np.max(np.abs(A[ok] - rebuilt[ok]) / A[ok])) if ok.any() else 0.0

        worst[name] = max(stats.parallel_map(one, range(p["c2_paths"]), threads))
    bound = 1e-10 * p["tol"]
    return CriterionResult(2, all(g <= bound for g in worst.values()),
                           {"max_rel_gap": worst, "bound": bound})


def c3(p, seed, threads):
    spec = _models(["cp"])["cp"]
    sc = fl.local_time_scale(spec, 1e-3, seed)

    def one(i):
        xi = lm.sample_skeleton(spec, 20.0, 1e-3, seed, i)
        X = lamperti.to_pssmp(xi, 1.0, 1.0)
        lhs, rhs = lp.occupation_identity(X, fl.decompose(xi, 1.0, sc))
        return float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))

    gap = max(stats.parallel_map(one, range(p["c3_paths"]), threads))
    bound = 1e-12 * p["tol"]
    return CriterionResult(3, gap <= bound, {"model": "cp", "a": sc.a_eff, "max_gap": gap,
                                             "bound": bound})


def c4(p, seed, threads):
    spec = _models(["bm_drift"])["bm_drift"]
    dt = 2.0 ** -p["c4_dt_exp"]
    eps = [2.0 ** -k for k in p["c4_eps"]]
    lv = np.log1p(eps)
    sc = fl.local_time_scale(spec, dt, seed)
    vh, vse = fl.renewal_Vhat_levels(spec, dt, lv, p["c4_cal_paths"], p["c4_horizon"],
                                     _rng.derive(seed, 1), sc, threads)
    order = np.argsort(lv)

    def vhat(y):
        return float(np.interp(y, lv[order], vh[order]))

    def one(i):
        xi = lm.sample_skeleton(spec, p["c4_horizon"], dt, _rng.derive(seed, 2), i)
        X = lamperti.to_pssmp(xi, 1.0, 1.0)
        out, curve = lp.occupation_ltheta(X, fl.decompose(xi, 1.0, sc), eps, vhat)
        return [o["sup_error"] / curve.values[-1] for o in out]

    errs = np.array(stats.parallel_map(one, range(p["c4_paths"]), threads))
    mean = errs.mean(axis=0)
    monotone = bool(np.all(np.diff(mean) < 0))
    bound = 0.10 * p["tol"]
    rows = [[e, m, s] for e, m, s in zip(eps, mean, errs.std(axis=0, ddof=1) / math.sqrt(len(errs)))]
    return CriterionResult(4, monotone and mean[-1] <= bound,
                           {"dt": dt, "eps": eps, "mean_rel_sup_error": mean, "monotone": monotone,
                            "final": mean[-1], "bound": bound, "vhat": vh, "vhat_se": vse},
                           {"occupation_errors": (["eps", "mean_rel_sup_error", "stderr"], rows)})


def c5(p, seed, threads):
    out = {}
    ok = True
    for name, spec in _models().items():
        dt = p["c5_dt"]
        sc = fl.local_time_scale(spec, dt, seed)
        t = [0.5, 1.0]
        a = lp.sample_rh(spec, 1.0, 1.0, t, p["c5_n"], dt, _rng.derive(seed, 1), "direct",
                         scale=sc, threads=threads)
        b = lp.sample_rh(spec, 1.0, 1.0, t, p["c5_n"], dt, _rng.derive(seed, 2), "levy-triple",
                         scale=sc, threads=threads)
        ps = [stats.bivariate_test(lp.censor_map(a[:, k]), lp.censor_map(b[:, k])).p_value
              for k in range(len(t))]
        out[name] = {"t": t, "p_values": ps, "censored": float(np.mean(~np.isfinite(a[..., 0])))}
        ok &= all(q > 0.01 for q in ps)
    return CriterionResult(5, ok, out)


def c6(p, seed, threads):
    out = {}
    ok = True
    for name, spec in _models().items():
        reps = lp.check_scaling_RH(spec, 1.0, 1.0, 2.0, [0.5, 1.0], p["c6_n"], seed, dt=p["c6_dt"],
                                   threads=threads)
        ps = [r.p_value for r in reps]
        out[name] = {"c": 2.0, "t": [0.5, 1.0], "p_values": ps}
        ok &= all(q > 0.01 for q in ps)
    return CriterionResult(6, ok, out)


def c7(p, seed, threads):
    spec = _models(["bm_drift"])["bm_drift"]
    out = {}
    for F in ("deep", "deep_weighted", "long"):
        r = lp.exit_formula_check(spec, 1.0, 1.0, F, "window", p["c7_n"], seed, dt=p["c7_dt"],
                                  pool_horizon=p["c7_pool"][0], pool_paths=p["c7_pool"][1],
                                  threads=threads)
        out[F] = r
    return CriterionResult(7, all(r["z"] <= 3 for r in out.values()), out)


def c8(p, seed, threads):
    out = {}
    ok = True
    dt = p["c8_dt"]
    for name, spec in _models(list(p["c8_models"])).items():
        sc = fl.local_time_scale(spec, dt, seed)
        for q in (0.5, 2.0):
            row = {}
            for f in ("one", "exp_neg") if name == "bm_drift" or name == "cp" else ("one",):
                lad = rx.resolvent_via_ladder(spec, 1.0, 1.0, q, f, p["c8_n"], seed, dt=dt,
                                              pool_horizon=p["c8_pool"][0],
                                              pool_paths=p["c8_pool"][1], scale=sc, threads=threads)
                dire = rx.resolvent_direct(spec, 1.0, 1.0, q, f, p["c8_direct"], seed, dt=dt,
                                           threads=threads)
                entry = {"ladder": lad["estimate"], "ladder_se": lad["stderr"],
                         "direct": dire["estimate"], "direct_se": dire["stderr"],
                         "pair_z": stats.pooled_z(lad["estimate"], lad["stderr"],
                                                  dire["estimate"], dire["stderr"]),
                         "capped": lad["capped"] + dire["capped"]}
                if f == "one":
                    slack = {}
                    for key, r in (("ladder", lad), ("direct", dire)):
                        gap = abs(r["estimate"] - 1 / q)
                        slack[key] = gap <= 3 * r["stderr"] + r["truncation_bound"] + 1e-12 / q
                    entry["within_3se_of_1_over_q"] = slack
                    ok &= all(slack.values())
                ok &= entry["pair_z"] <= 3
                row[f] = entry
            out[f"{name}/q={q}"] = row
    return CriterionResult(8, ok, out)


def c9(p, seed, threads):
    spec = _models(["bm"])["bm"]
    dt = p["c9_dt"]
    bound = 0.10 * p["tol"]
    lams = [0.5, 1.0, 2.0]
    runs = {}
    for d in (dt, dt / 4):
        r = fl.wiener_hopf_check(spec, lams, p["c9_n"], d, seed)
        runs[d] = [row["ratio"] for row in r["rows"]]

    def exact(d):
        sc = fl.local_time_scale(spec, d)
        raw = {lam: fl.spitzer_phi_raw(0.0, spec.sigma, d, lam, sc.dl_epoch) for lam in lams}
        # the model is symmetric, so both factors coincide
        return [(raw[lam] / raw[1.0]) ** 2 / lam for lam in lams]

    ex = {d: exact(d) for d in (dt, dt / 4)}
    gap = {d: max(abs(v - 1) for v in ex[d]) for d in ex}
    mc_ok = all(abs(v - 1) <= bound for v in runs[dt / 4])
    shrinks = gap[dt / 4] < gap[dt]
    rows = [[d, lam, runs[d][k], ex[d][k]] for d in (dt, dt / 4) for k, lam in enumerate(lams)]
    return CriterionResult(9, mc_ok and shrinks,
                           {"lambdas": lams, "mc_ratio": {repr(d): v for d, v in runs.items()},
                            "exact_discrete_ratio": {repr(d): v for d, v in ex.items()},
                            "bias_shrinks": shrinks, "bound": bound},
                           {"wiener_hopf_ladder": (["dt", "lambda", "mc_ratio", "exact_discrete_ratio"],
                                                   rows)})


def c10(p, seed, threads):
    spec = _models(["bm_drift"])["bm_drift"]
    dt = p["c10_dt"]
    sc = fl.local_time_scale(spec, dt, seed)
    a = cond.sample_w_terminal(spec, 1.0, p["c10_n"], dt, _rng.derive(seed, 1), scale=sc,
                               threads=threads)
    b = cond.sample_dt_functional(spec, 1.0, p["c10_n"], dt, _rng.derive(seed, 2), scale=sc,
                                  threads=threads)
    rep = stats.ks_two_sample(a, b)
    return CriterionResult(10, rep.p_value > 0.01,
                           {"ks": rep.to_dict(), "mean_w": float(a.mean()), "mean_pasted": float(b.mean())})


def c11(p, seed, threads):
    out = {}
    ok = True
    for name in ("bm_drift", "cp"):
        spec = _models([name])[name]
        e = rx.entrance_law_X(spec, 1.0, 1.0, ["exp_neg"], p["c11_n"], _rng.derive(seed, 1),
                              dt=p["c11_dt"], batches=20, pool_horizon=p["c11_pool"][0],
                              pool_paths=p["c11_pool"][1], threads=threads)
        z = abs(e["normalization"] - 1) / e["normalization_stderr"]
        out[name] = {"normalization": e["normalization"], "stderr": e["normalization_stderr"],
                     "z": z, "truncation_report": e["measure"].truncation_report}
        ok &= z <= 3
    return CriterionResult(11, ok, out)


def c12(p, seed, threads):
    spec = _models(["bm_drift"])["bm_drift"]
    dt = p["c12_dt"]
    fids = ["exp_neg", "inv1p"]
    t = 1.0
    eta = rx.entrance_law_X(spec, 1.0, t, fids, p["c12_eta"], _rng.derive(seed, 1), dt=dt,
                            batches=20, pool_horizon=p["c12_pool"][0], pool_paths=p["c12_pool"][1],
                            threads=threads)
    isamp = None
    xvals = None
    out = {}
    ok = True
    gap_bound = 0.05 * p["tol"]
    oracle_bound = 0.02 * p["tol"]
    for f in fids:
        by = rx.bertoin_yor(spec, 1.0, t, f, p["c12_by"], _rng.derive(seed, 2), dt=dt,
                            threads=threads, samples=isamp)
        isamp = by.pop("samples")
        di = rx.direct_entrance(spec, 1.0, 1e-3, t, f, p["c12_direct"], _rng.derive(seed, 3), dt=dt,
                                threads=threads, values=xvals)
        xvals = di.pop("values")
        est = {"eta": eta["estimates"][f]["estimate"], "bertoin_yor": by["estimate"],
               "direct_small_x": di["estimate"]}
        se = {"eta": eta["estimates"][f]["stderr"], "bertoin_yor": by["stderr"],
              "direct_small_x": di["stderr"]}
        oracle = rx.dufresne_entrance(spec.drift, spec.sigma, 1.0, t, f)
        keys = list(est)
        gaps = {f"{a}~{b}": abs(est[a] - est[b]) / abs(est[b]) for i, a in enumerate(keys)
                for b in keys[i + 1:]}
        og = abs(est["bertoin_yor"] - oracle) / oracle
        out[f] = {"estimates": est, "stderr": se, "pairwise_rel_gap": gaps,
                  "closed_form": oracle, "bertoin_yor_vs_closed_form": og}
        ok &= all(g <= gap_bound for g in gaps.values()) and og <= oracle_bound
    out["normalization"] = eta["normalization"]
    return CriterionResult(12, ok, out)


def c13(p, seed, threads):
    out = {}
    ok = True
    for name in ("bm_drift", "cp"):
        spec = _models([name])[name]
        pairs = cond.sample_ih_pairs(spec, 1.0, p["c13_n"], p["c13_dt"], _rng.derive(seed, 1),
                                     threads=threads)
        r = rx.inverse_ih_check(pairs, 1.0, batches=20)
        z = abs(r["ratio"] - 1) / r["stderr"]
        out[name] = dict(r, z=z)
        ok &= z <= 3
    return CriterionResult(13, ok, out)


def c14(p, seed, threads):
    digests = []
    with tempfile.TemporaryDirectory() as tmp:
        for k, th in enumerate((1, 4)):
            d = Path(tmp) / f"run{k}"
            verify_all("smoke", seed, th, only=DETERMINISM_SUBSET, out_dir=d)
            digests.append({f.name: f.read_bytes() for f in sorted(d.iterdir())
                            if f.name != "metadata.json"})
    same = digests[0] == digests[1]
    return CriterionResult(14, same, {"subset": list(DETERMINISM_SUBSET), "threads": [1, 4],
                                      "files": sorted(digests[0]), "identical": same})


RUNNERS = {1: c1, 2: c2, 3: c3, 4: c4, 5: c5, 6: c6, 7: c7, 8: c8, 9: c9, 10: c10, 11: c11,
           12: c12, 13: c13, 14: c14}


# ---------------------------------------------------------------------------
# driver


def run_criterion(number, profile="desk", seed=20240601, threads=1):
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    if number not in RUNNERS:
        raise ConfigError(f"no criterion {number}")
    t0 = time.perf_counter()
    res = RUNNERS[number](PROFILES[profile], _rng.derive(seed, number), threads)
    res.seconds = time.perf_counter() - t0
    return res


def write_results(results, out_dir, profile, seed, threads):
    """Data files (deterministic) plus a metadata file with timings."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {"profile": profile, "seed": seed,
               "criteria": {str(r.number): {"name": r.name, "passed": r.passed,
                                            "data": _clean(r.data)} for r in results}}
    (out_dir / "acceptance.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    plots = []
    for r in results:
        for name, (header, rows) in r.tables.items():
            fname = f"criterion{r.number:02d}_{name}.csv"
            with open(out_dir / fname, "w") as fh:
                fh.write(",".join(header) + "\n")
                for row in rows:
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
            plots.append({"file": fname, "x": header[0], "series": header[1:],
                          "title": f"criterion {r.number}: {r.name}"})
    (out_dir / "plots.json").write_text(json.dumps(plots, indent=1, sort_keys=True) + "\n")
    meta = {"threads": threads, "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "seconds": {str(r.number): r.seconds for r in results}}
    (out_dir / "metadata.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def verify_all(profile="desk", seed=20240601, threads=1, only=None, out_dir=None, echo=None):
    """Run the suite (or the criteria in ``only``) and optionally persist results."""
    results = []
    for k in sorted(only or RUNNERS):
        res = run_criterion(k, profile, seed, threads)
        results.append(res)
        if echo:
            echo(res.line() + f"  ({res.seconds:.1f}s)")
    if out_dir is not None:
        write_results(results, out_dir, profile, seed, threads)
    return results
