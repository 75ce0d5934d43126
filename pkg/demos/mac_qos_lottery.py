"""Time sharing under rate guarantees on a two-user multiple access channel.

Without CSI each deterministic power profile is a single point. Enumerating
them and solving a small LP over lotteries gives the best weighted rate that
still meets per-user minimum rates.

Run: python demos/mac_qos_lottery.py
"""
# %%
import numpy as np

from partialcsi import enumerate_vertices, qos_mixture_lp
from partialcsi.presets import mac_qos_problem

pb, qos = mac_qos_problem(snr_db=20.0)
verts = enumerate_vertices(pb.scenario, pb.observation, pb.spec)
print(f"{len(verts)} frontier vertices")
for v in verts:
    print("  payoff", np.round(v.payoff, 4))

# %% [markdown]
# Minimum rates of 45% and 15% of the single-user capacity. Neither user
# alone satisfies both, and transmitting together is interference limited,
# so the LP mixes the two single-user vertices.

# %%
sol = qos_mixture_lp(verts, pb.spec.weights, qos)
print("status:", sol.status, " value:", round(sol.value, 5))
for p, prof in sol.mix.support:
    active = [i + 1 for i, t in enumerate(prof.tables) if np.any(t > 0)]
    print(f"  P = {p:.4f}: transmitters {active} on")
print("rates", np.round(sol.payoff, 4), "targets", np.round(qos, 4))

# %%
tight = qos_mixture_lp(verts, pb.spec.weights, qos * 3)
print("tripled targets:", tight.status)
