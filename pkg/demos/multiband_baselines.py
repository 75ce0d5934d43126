"""Synthesized decision functions against classical power control.

Three users share two bands towards one receiver. Each point pairs the
synthesized profile with the same fading draws as the baselines, so the
differences have small standard errors.

Run: python demos/multiband_baselines.py   (a couple of minutes)
"""
# %%
from partialcsi import BaselinePolicy, goodman_target_sinr, paired_difference, simulate, synthesize
from partialcsi.model import Psi
from partialcsi.presets import multiband_mac_problem

beta = goodman_target_sinr(Psi("packet_success", 100))
print(f"target SINR for M=100: {beta:.4f}")

# %% [markdown]
# Energy efficiency, 12 log-spaced power levels per band.

# %%
for gain in (0.1, 0.3, 1.0):
    pb = multiband_mac_problem(gain)
    sc, ob, spec = pb.scenario, pb.observation, pb.spec
    syn = simulate(synthesize(sc, ob, spec).profile, sc, ob, spec, 50_000, seed=1)
    print(f"gain mean {gain}: synthesized sum-EE {syn.sum_mean:.4e}")
    for name, pol in (("goodman", BaselinePolicy("goodman_inversion", {"beta": beta})),
                      ("bpc_cs", BaselinePolicy("bpc_cs")),
                      ("full", BaselinePolicy("full_power"))):
        res = simulate(pol, sc, ob, spec, 50_000, seed=1)
        d, se = paired_difference(syn, res)
        print(f"   vs {name:>8}: {res.sum_mean:.4e}  gain {d:.3e} +- {se:.1e}")

# %% [markdown]
# Sum rate, where iterative water-filling is the natural competitor.

# %%
for gain in (0.1, 1.0):
    pb = multiband_mac_problem(gain, "shannon_rate", n_levels=5, spacing="uniform")
    sc, ob, spec = pb.scenario, pb.observation, pb.spec
    syn = simulate(synthesize(sc, ob, spec).profile, sc, ob, spec, 50_000, seed=2)
    iw = simulate(BaselinePolicy("iwfa"), sc, ob, spec, 50_000, seed=2)
    print(f"gain mean {gain}: synthesized {syn.sum_mean:.3f} bit/s/Hz, iwfa {iw.sum_mean:.3f}")
