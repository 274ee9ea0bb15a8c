"""Command-line experiment runner.

Every subcommand reads an optional YAML config, merges it over defaults,
runs one operation and writes ``summary.json`` plus CSV tables, a plot
manifest and ``metadata.json`` (the only file holding timestamps).

Exit codes: 0 pass, 1 a gate failed, 2 bad config, 3 budget exceeded.
"""
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np
import yaml

from . import acceptance
from . import fluctuation as fl
from . import lamperti
from . import ladder_process as lp
from . import levy_model as lm
from . import resolvent_entrance as rx
from . import rng as _rng
from . import stats
from .errors import BudgetExceeded, ConfigError, PssmpError, TooFewSamples

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "levy": "bm_drift",
    "alpha": 1.0,
    "x0": 1.0,
    "horizon": 5.0,
    "dt": 1e-2,
    "n_paths": 200,
    "seed": 20240601,
    "output_dir": "pssmp-out",
    "eps_ladder": [0.125, 0.0625, 0.03125],
    "tolerances": {"z": 3.0, "p_value": 0.01},
    "max_cells": 2_000_000_000,
    "params": {},
}

EXIT_PASS, EXIT_GATE, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


class Config(dict):
    """Validated experiment config (a dict with attribute-free access)."""

    @property
    def spec(self):
        lv = self["levy"]
        if isinstance(lv, str):
            cat = lm.catalogue()
            if lv not in cat:
                raise ConfigError(f"unknown catalogue model {lv!r}; choose from {sorted(cat)}")
            return cat[lv]
        return lm.LevySpec.from_dict(lv)

    @property
    def params(self):
        return self["params"]


def load_config(path=None, overrides=None):
    raw = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        if raw.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = Config(DEFAULTS)
    cfg["tolerances"] = dict(DEFAULTS["tolerances"], **(raw.pop("tolerances", None) or {}))
    cfg.update(raw)
    cfg.update({k: v for k, v in (overrides or {}).items() if v is not None})
    _validate(cfg)
    return cfg


def _validate(cfg):
    try:
        for key in ("horizon", "dt", "max_cells"):
            if not float(cfg[key]) > 0:
                raise ConfigError(f"{key} must be positive")
        if int(cfg["n_paths"]) < 1:
            raise ConfigError("n_paths must be at least 1")
        x0 = cfg["x0"] if isinstance(cfg["x0"], list) else [cfg["x0"]]
        if not all(float(v) > 0 for v in x0):
            raise ConfigError("x0 must be positive")
        if float(cfg["alpha"]) == 0:
            raise ConfigError("alpha must be nonzero")
        if not all(float(e) > 0 for e in cfg["eps_ladder"]):
            raise ConfigError("eps_ladder entries must be positive")
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not isinstance(cfg["params"], dict):
        raise ConfigError("params must be a mapping")
    cfg.spec  # noqa: B018  (parses the model)


def _check_budget(cfg, cells):
    if cells > float(cfg["max_cells"]):
        raise BudgetExceeded(f"planned {cells:.3g} Lévy steps exceed max_cells={cfg['max_cells']:.3g}")


def _x0(cfg):
    return float(cfg["x0"][0] if isinstance(cfg["x0"], list) else cfg["x0"])


def _jsonable(obj):
    return acceptance._clean(obj)


def write_outputs(out_dir, command, cfg, summary, tables, seconds, threads):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    body = {"command": command, "config": _jsonable(dict(cfg)), "result": _jsonable(summary)}
    (out / "summary.json").write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")
    manifest = []
    for name, (header, rows) in tables.items():
        with open(out / f"{name}.csv", "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        manifest.append({"file": f"{name}.csv", "x": header[0], "series": header[1:], "title": name})
    (out / "plots.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    meta = {"command": command, "threads": threads, "seconds": seconds,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}
    (out / "metadata.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# operations: each returns (summary, tables, passed or None)


def op_simulate(cfg, threads):
    spec, a, x, dt, n = cfg.spec, float(cfg["alpha"]), _x0(cfg), float(cfg["dt"]), int(cfg["n_paths"])
    until = float(cfg["horizon"])
    _check_budget(cfg, n * until / dt)
    seed = int(cfg["seed"])

    def one(i):
        X = lamperti.simulate(spec, a, x, until, dt, seed, i)
        return X, float(X.value_at(np.array([until]))[0])

    res = stats.parallel_map(one, range(n), threads)
    X0 = res[0][0]
    end = np.array([r[1] for r in res])
    summary = {"n_paths": n, "until": until, "mean_X_until": stats.mc_mean(end),
               "share_absorbed": float(np.mean([np.isfinite(r[0].T0) and r[0].T0 <= until
                                                for r in res]))}
    tables = {"path0": (["t", "X"], list(zip(X0.times, X0.values))),
              "terminal_values": (["path", "X_until"], list(enumerate(end)))}
    return summary, tables, None


def op_decompose(cfg, threads):
    spec, a, dt = cfg.spec, float(cfg["alpha"]), float(cfg["dt"])
    seed, n, horizon = int(cfg["seed"]), int(cfg["n_paths"]), float(cfg["horizon"])
    _check_budget(cfg, n * horizon / dt)
    sc = fl.local_time_scale(spec, dt, seed)

    def one(i):
        xi = lm.sample_skeleton(spec, horizon, dt, seed, i)
        d = fl.decompose(xi, a, sc)
        A, rebuilt = fl.clock_at_epochs(d)
        ok = A > 0
        gap = float(np.max(np.abs(A[ok] - rebuilt[ok]) / A[ok])) if ok.any() else 0.0
        return d, gap

    res = stats.parallel_map(one, range(n), threads)
    d0 = res[0][0]
    gap = max(r[1] for r in res)
    summary = {"local_time_mode": sc.mode, "a": sc.a_eff, "mean_epochs": float(np.mean([r[0].n_segments for r in res])),
               "mean_local_time": float(np.mean([r[0].C[-1] for r in res])),
               "clock_identity_max_rel_gap": gap}
    rows = list(zip(d0.S, d0.h, d0.dl, d0.dY))
    passed = gap <= float(cfg["tolerances"].get("clock_identity", 1e-10))
    return summary, {"epochs_path0": (["S", "h", "dl", "dY"], rows)}, passed


def op_ladder(cfg, threads):
    spec, a, x, dt, n = cfg.spec, float(cfg["alpha"]), _x0(cfg), float(cfg["dt"]), int(cfg["n_paths"])
    t_list = [float(t) for t in cfg.params.get("t", [0.5, 1.0])]
    seed = int(cfg["seed"])
    sc = fl.local_time_scale(spec, dt, seed)
    out = {}
    for cons, tag in (("direct", 1), ("levy-triple", 2)):
        out[cons] = lp.sample_rh(spec, a, x, t_list, n, dt, _rng.derive(seed, tag), cons, scale=sc,
                                 threads=threads)
    ps = [stats.bivariate_test(lp.censor_map(out["direct"][:, k]),
                               lp.censor_map(out["levy-triple"][:, k])).p_value
          for k in range(len(t_list))]
    rows = [[t, i, *out["direct"][i, k], *out["levy-triple"][i, k]]
            for k, t in enumerate(t_list) for i in range(n)]
    summary = {"t": t_list, "p_values": ps}
    passed = all(p > float(cfg["tolerances"]["p_value"]) for p in ps)
    return summary, {"rh_samples": (["t", "path", "R_direct", "H_direct", "R_triple", "H_triple"],
                                    rows)}, passed


def op_occupation(cfg, threads):
    spec, a, x, dt = cfg.spec, float(cfg["alpha"]), _x0(cfg), float(cfg["dt"])
    seed, n, horizon = int(cfg["seed"]), int(cfg["n_paths"]), float(cfg["horizon"])
    eps = sorted((float(e) for e in cfg["eps_ladder"]), reverse=True)
    cal = int(cfg.params.get("calibration_paths", 16))
    _check_budget(cfg, (n + cal) * horizon / dt)
    sc = fl.local_time_scale(spec, dt, seed)
    lv = np.log1p(eps)
    vh, _ = fl.renewal_Vhat_levels(spec, dt, lv, cal, horizon, _rng.derive(seed, 1), sc, threads)
    order = np.argsort(lv)

    def one(i):
        xi = lm.sample_skeleton(spec, horizon, dt, _rng.derive(seed, 2), i)
        X = lamperti.to_pssmp(xi, a, x)
        res, curve = lp.occupation_ltheta(X, fl.decompose(xi, a, sc), eps,
                                          lambda y: float(np.interp(y, lv[order], vh[order])))
        return [r["sup_error"] / curve.values[-1] for r in res]

    errs = np.array(stats.parallel_map(one, range(n), threads)).mean(axis=0)
    summary = {"eps": eps, "mean_rel_sup_error": errs, "monotone": bool(np.all(np.diff(errs) < 0))}
    return summary, {"occupation_error": (["eps", "mean_rel_sup_error"], list(zip(eps, errs)))}, \
        summary["monotone"]


def op_exit_check(cfg, threads):
    spec, a, x, dt, n = cfg.spec, float(cfg["alpha"]), _x0(cfg), float(cfg["dt"]), int(cfg["n_paths"])
    fids = cfg.params.get("functionals", ["deep", "deep_weighted", "long"])
    pool = cfg.params.get("pool", [100.0, 20])
    rows = {}
    for F in fids:
        rows[F] = lp.exit_formula_check(spec, a, x, F, cfg.params.get("weight", "window"), n,
                                        int(cfg["seed"]), dt=dt, pool_horizon=float(pool[0]),
                                        pool_paths=int(pool[1]), threads=threads)
    zmax = float(cfg["tolerances"]["z"])
    table = [[k, r["lhs"], r["lhs_se"], r["rhs"], r["rhs_se"], r["z"]] for k, r in enumerate(rows.values())]
    return rows, {"exit_formula": (["functional", "lhs", "lhs_se", "rhs", "rhs_se", "z"], table)}, \
        all(r["z"] <= zmax for r in rows.values())


def op_resolvent(cfg, threads):
    spec, a, x, dt, n = cfg.spec, float(cfg["alpha"]), _x0(cfg), float(cfg["dt"]), int(cfg["n_paths"])
    qs = [float(q) for q in cfg.params.get("q", [0.5, 2.0])]
    fids = cfg.params.get("f", ["one", "exp_neg"])
    pool = cfg.params.get("pool", [50.0, 10])
    seed = int(cfg["seed"])
    zmax = float(cfg["tolerances"]["z"])
    sc = fl.local_time_scale(spec, dt, seed)
    out, table, ok = {}, [], True
    for q in qs:
        for f in fids:
            lad = rx.resolvent_via_ladder(spec, a, x, q, f, n, seed, dt=dt, batches=min(20, n),
                                          pool_horizon=float(pool[0]), pool_paths=int(pool[1]),
                                          scale=sc, threads=threads)
            dire = rx.resolvent_direct(spec, a, x, q, f, int(cfg.params.get("direct_paths", 4 * n)),
                                       seed, dt=dt, threads=threads)
            z = stats.pooled_z(lad["estimate"], lad["stderr"], dire["estimate"], dire["stderr"])
            ok &= z <= zmax
            if f == "one":
                for r in (lad, dire):
                    ok &= abs(r["estimate"] - 1 / q) <= zmax * r["stderr"] + r["truncation_bound"] + 1e-12 / q
            out[f"q={q}/{f}"] = {"ladder": lad, "direct": dire, "pair_z": z}
            table.append([q, lad["estimate"], lad["stderr"], dire["estimate"], dire["stderr"]])
    return out, {"resolvent": (["q", "ladder", "ladder_se", "direct", "direct_se"], table)}, ok


def op_entrance(cfg, threads):
    spec, a, dt, n = cfg.spec, float(cfg["alpha"]), float(cfg["dt"]), int(cfg["n_paths"])
    t = float(cfg.params.get("t", 1.0))
    fids = cfg.params.get("f", ["exp_neg", "inv1p"])
    pool = cfg.params.get("pool", [100.0, 10])
    seed = int(cfg["seed"])
    e = rx.entrance_law_X(spec, a, t, fids, n, _rng.derive(seed, 1), dt=dt, batches=min(20, n),
                          pool_horizon=float(pool[0]), pool_paths=int(pool[1]), threads=threads)
    z = abs(e["normalization"] - 1) / e["normalization_stderr"]
    summary = {"estimates": e["estimates"], "normalization": e["normalization"],
               "normalization_stderr": e["normalization_stderr"], "normalization_z": z,
               "truncation_report": e["measure"].truncation_report}
    if spec.mean() > 0:
        for f in fids:
            by = rx.bertoin_yor(spec, a, t, f, n, _rng.derive(seed, 2), dt=dt, threads=threads)
            by.pop("samples")
            summary.setdefault("bertoin_yor", {})[f] = by
            if not spec.has_jumps:
                summary.setdefault("closed_form", {})[f] = rx.dufresne_entrance(spec.drift, spec.sigma,
                                                                                a, t, f)
    m = e["measure"]
    rows = list(zip(m.eta_samples, m.weights))
    return summary, {"entrance_measure": (["x", "weight"], rows)}, z <= float(cfg["tolerances"]["z"])


def op_stats_calibrate(cfg, threads):
    spec, dt, n = cfg.spec, float(cfg["dt"]), int(cfg["n_paths"])
    repeats = int(cfg.params.get("repeats", 500))
    horizon = float(cfg["horizon"])
    _check_budget(cfg, 2 * repeats * n * horizon / dt)

    def sampler(seed, m):
        return np.array([lm.sample_skeleton(spec, horizon, dt, seed, i).values[-1] for i in range(m)])

    rate, med = stats.calibrate_ks(sampler, n, repeats, int(cfg["seed"]))
    lo, hi = cfg["tolerances"].get("rejection_band", [0.002, 0.03])
    return {"rejection_rate": rate, "median_p": med, "repeats": repeats, "band": [lo, hi]}, {}, \
        lo <= rate <= hi


OPS = {"simulate": op_simulate, "decompose": op_decompose, "ladder": op_ladder,
       "occupation": op_occupation, "exit-check": op_exit_check, "resolvent": op_resolvent,
       "entrance": op_entrance, "stats-calibrate": op_stats_calibrate}


def run(command, cfg, threads=1, out_dir=None, echo=print):
    """Run one operation, persist its outputs and return the exit status."""
    t0 = time.perf_counter()
    summary, tables, passed = OPS[command](cfg, threads)
    summary = dict(summary) if isinstance(summary, dict) else {"value": summary}
    summary["passed"] = passed
    write_outputs(out_dir or cfg["output_dir"], command, cfg, summary, tables,
                  time.perf_counter() - t0, threads)
    echo(f"{command}: {'PASS' if passed in (True, None) else 'FAIL'} -> {out_dir or cfg['output_dir']}")
    return EXIT_PASS if passed in (True, None) else EXIT_GATE


# ---------------------------------------------------------------------------
# click wiring


def _common(fn):
    fn = click.option("--out", type=click.Path(file_okay=False), default=None,
                      help="Output directory (env PSSMP_OUT).")(fn)
    fn = click.option("--threads", type=int, default=None, help="Worker threads (env PSSMP_THREADS).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override the config seed.")(fn)
    fn = click.option("--config", type=click.Path(dir_okay=False), default=None,
                      help="YAML experiment config.")(fn)
    return fn


def _runtime(threads, out):
    threads = threads if threads is not None else int(os.environ.get("PSSMP_THREADS", "1"))
    out = out or os.environ.get("PSSMP_OUT")
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    return threads, out


def _guard(body):
    try:
        return body()
    except BudgetExceeded as exc:
        click.echo(f"budget exceeded: {exc}", err=True)
        return EXIT_BUDGET
    except (ConfigError, TooFewSamples) as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except PssmpError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        return EXIT_GATE


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="pssmp")
def main():
    """Simulate self-similar Markov processes and check their ladder identities."""


def _make(name):
    @main.command(name, help=(OPS[name].__doc__ or f"Run the {name} operation."))
    @_common
    def cmd(config, seed, threads, out):
        def body():
            th, o = _runtime(threads, out)
            cfg = load_config(config, {"seed": seed})
            return run(name, cfg, th, o, click.echo)
        sys.exit(_guard(body))
    return cmd


op_simulate.__doc__ = "Simulate pssMp paths and record their values at the horizon."
op_decompose.__doc__ = "Ladder decomposition of Lévy paths and the clock identity at epochs."
op_ladder.__doc__ = "Sample (R_t, H_t) by both constructions and compare their laws."
op_occupation.__doc__ = "Occupation approximation of the ladder local time along eps_ladder."
op_exit_check.__doc__ = "Both sides of the exit formula for catalogue functionals."
op_resolvent.__doc__ = "Resolvent by ladder decomposition and by direct simulation."
op_entrance.__doc__ = "Entrance law from zero and its normalisation."
op_stats_calibrate.__doc__ = "Null rejection rate of the two-sample KS test."

for _name in OPS:
    _make(_name)


@main.command("verify-all")
@click.option("--profile", type=click.Choice(sorted(acceptance.PROFILES)), default="smoke",
              show_default=True)
@click.option("--only", type=str, default=None, help="Comma-separated criterion numbers.")
@_common
def verify_all_cmd(profile, only, config, seed, threads, out):
    """Run the acceptance suite at the chosen budget tier."""
    def body():
        th, o = _runtime(threads, out)
        cfg = load_config(config, {"seed": seed})
        sel = None
        if only:
            try:
                sel = [int(s) for s in only.split(",")]
            except ValueError as exc:
                raise ConfigError("--only takes integers") from exc
        res = acceptance.verify_all(profile, int(cfg["seed"]), th, only=sel,
                                    out_dir=o or cfg["output_dir"], echo=click.echo)
        ok = all(r.passed for r in res)
        click.echo(f"{sum(r.passed for r in res)}/{len(res)} criteria passed")
        return EXIT_PASS if ok else EXIT_GATE
    sys.exit(_guard(body))


if __name__ == "__main__":  # pragma: no cover
    main()
