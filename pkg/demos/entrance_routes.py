"""Three estimates of the entrance law from zero against the gamma closed form.

    python demos/entrance_routes.py
"""
from pssmp import levy_model as lm
from pssmp import resolvent_entrance as rx

spec = lm.catalogue()["bm_drift"]
alpha, t = 1.0, 1.0
for f in ("exp_neg", "inv1p"):
    exact = rx.dufresne_entrance(spec.drift, spec.sigma, alpha, t, f)
    by = rx.bertoin_yor(spec, alpha, t, f, 800, seed=1, dt=1e-3)
    eta = rx.entrance_law_X(spec, alpha, t, [f], 400, seed=2, dt=1e-3, batches=10,
                            pool_horizon=60.0, pool_paths=10)
    est = eta["estimates"][f]
    print(f"{f:8s} exact {exact:.4f} | exponential functional {by['estimate']:.4f} +- {by['stderr']:.4f}"
          f" | excursion measure {est['estimate']:.4f} +- {est['stderr']:.4f}")
