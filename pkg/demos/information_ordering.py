"""How much does each observation structure buy?

Exhaustive search over all decision profiles on a small two-link problem with
binary power, for four observation structures. Richer observations can only
help, and the gap between individual and global CSI is the price of
decentralization.

Run: python demos/information_ordering.py   (about a second)
"""
# %%
from partialcsi import (Psi, build_observation, build_state_alphabet, energy_efficiency,
                        exhaustive_optimum, interference_scenario)
from partialcsi.region import profile_count

sc = interference_scenario(2, 1, cross_db=5.0, noise=0.01, p_max=0.1, n_levels=2)
states = build_state_alphabet(sc, 3)
spec = energy_efficiency(Psi("outage", 1.0), 2)

# %%
best = {}
for label in ("individual", "direct", "local", "global"):
    ob = build_observation(label, sc, states)
    best[label], _ = exhaustive_optimum(sc, ob, spec)
    print(f"{label:>10}: {float(profile_count(sc, ob)):>9.3g} profiles, W* = {best[label]:.5e}")

# %%
print(f"decentralization gap: {1 - best['individual'] / best['global']:.2%}")
