"""Power control on the two-link reference scenario.

Synthesizes decision functions from quantized individual CSI, prints the
resulting power maps, then repeats the synthesis with noisy estimates to show
how the maps coarsen as the estimate quality drops.

Run: python demos/threshold_and_cooling.py   (about half a minute)
"""
# %%
import math

import numpy as np

from partialcsi import synthesize
from partialcsi.presets import reference_problem

# %% [markdown]
# Perfect individual CSI: each transmitter sees its own direct gain,
# quantized into 15 equiprobable cells.

# %%
pb = reference_problem("individual")
rep = synthesize(pb.scenario, pb.observation, pb.spec)
levels = pb.scenario.actions.actions[:, 0]
print(f"converged={rep.converged} after {rep.iterations} sweeps, W = {rep.value:.4e} bit/J")
for i, table in enumerate(rep.profile.tables):
    print(f"tx{i + 1} power per cell (mW):", np.round(1e3 * levels[table], 2))

# %% [markdown]
# Each map is zero on the weakest cells and positive above a threshold.
# Now the same scenario with noisy estimates of the direct gain.

# %%
for esnr in (math.inf, 6.0, 0.0):
    if esnr == math.inf:
        pb_e = pb
    else:
        pb_e = reference_problem("noisy_individual", esnr_db=esnr)
    rep_e = synthesize(pb_e.scenario, pb_e.observation, pb_e.spec)
    distinct = [len(np.unique(t)) for t in rep_e.profile.tables]
    print(f"ESNR {esnr:>4} dB: distinct power levels {distinct}, "
          f"W = {rep_e.value:.4e}, loss {1 - rep_e.value / rep.value:.1%}")
