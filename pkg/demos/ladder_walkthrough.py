"""Walk through one path: Lévy skeleton, pssMp, ladder epochs and (R, H).

    python demos/ladder_walkthrough.py
"""
import numpy as np

from pssmp import fluctuation as fl
from pssmp import ladder_process as lp
from pssmp import lamperti
from pssmp import levy_model as lm

spec = lm.catalogue()["cp"]
alpha, x, dt, seed = 1.0, 1.0, 1e-3, 11

xi = lm.sample_skeleton(spec, 20.0, dt, seed, 0)
X = lamperti.to_pssmp(xi, alpha, x)
print(f"Lévy path: {len(xi.times)} knots up to time {xi.times[-1]:.1f}")
print(f"pssMp path: clock ran to {X.times[-1]:.3f}, final value {X.values[-1]:.4g}")

scale = fl.local_time_scale(spec, dt, seed)
d = fl.decompose(xi, alpha, scale)
A, rebuilt = fl.clock_at_epochs(d)
ok = A > 0
print(f"local time mode {scale.mode}, a = {scale.a_eff:.5f}, {d.n_segments} ladder epochs")
print(f"clock identity at epochs: max relative gap {np.max(np.abs(A[ok] - rebuilt[ok]) / A[ok]):.2e}")

t = [0.5, 1.0, 2.0]
direct = lp.sample_rh(spec, alpha, x, t, 300, 1e-2, seed, "direct", scale=scale)
triple = lp.sample_rh(spec, alpha, x, t, 300, 1e-2, seed + 1, "levy-triple", scale=scale)
for k, tk in enumerate(t):
    print(f"t={tk}: median H direct {np.nanmedian(direct[:, k, 1]):.3f}, "
          f"triple {np.nanmedian(triple[:, k, 1]):.3f}")
