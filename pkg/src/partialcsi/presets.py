"""Ready-made problem instances.

Each builder returns a ``Problem`` bundling a scenario, its state alphabet,
an observation structure and a utility specification.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Psi, energy_efficiency, interference_scenario, mac_scenario, shannon_rate
from .observe import (build_noisy_individual, build_observation, build_state_alphabet,
                      discrete_state_alphabet)


@dataclass(frozen=True, eq=False)
class Problem:
    scenario: object
    states: object
    observation: object
    spec: object


def observation_for(label, scenario, states, esnr_db=None, mc_samples=100_000, seed=0):
    """Build a deterministic structure or, for ``noisy_individual``, the
    noisy one at ``esnr_db``."""
    if label == "noisy_individual":
        if esnr_db is None:
            raise ValueError("noisy_individual needs esnr_db")
        return build_noisy_individual(scenario, states, esnr_db, mc_samples=mc_samples, seed=seed)
    return build_observation(label, scenario, states)


def reference_problem(structure="individual", esnr_db=None, n_cells=15, n_levels=75,
                      mc_samples=100_000, seed=0):
    """Two-user single-band interference channel: noise 10 mW, 100 mW power
    cap, direct gains 5 dB above cross gains, outage-type EE utility with
    ``c = 1`` and no static power, equal weights."""
    sc = interference_scenario(2, 1, direct_mean=1.0, cross_db=5.0, noise=0.01, p_max=0.1,
                               p0=0.0, n_levels=n_levels)
    st = build_state_alphabet(sc, n_cells)
    ob = observation_for(structure, sc, st, esnr_db, mc_samples, seed)
    return Problem(sc, st, ob, energy_efficiency(Psi("outage", 1.0), 2))


MAC_QOS_LEVELS = (0.3, 1.0)
MAC_QOS_FRACTIONS = (0.45, 0.15)


def mac_qos_problem(snr_db=20.0, p_max=0.1):
    """Two-user MAC with binary power, gains equiprobably 0.3 or 1, each
    transmitter observing its own gain, sum-rate utility. Returns the
    problem and the QoS floors ``(0.45, 0.15) * log2(1 + SNR)``."""
    noise = p_max / 10 ** (snr_db / 10)
    sc = mac_scenario(2, 1, gain_mean=float(np.mean(MAC_QOS_LEVELS)), noise=noise,
                      p_max=p_max, n_levels=2)
    st = discrete_state_alphabet(sc, MAC_QOS_LEVELS)
    ob = build_observation("individual", sc, st)
    qos = np.asarray(MAC_QOS_FRACTIONS) * np.log2(1 + p_max / noise)
    return Problem(sc, st, ob, shannon_rate(2)), qos


def multiband_mac_problem(gain_mean, utility="energy_efficiency", n_cells=6, n_levels=12,
                          spacing="log"):
    """Three-user two-band MAC: 10 W per-band cap and total budget, 10 mW
    noise and static power, individual CSI. ``utility`` is
    ``energy_efficiency`` (packet success with ``M = 100``) or
    ``shannon_rate``."""
    sc = mac_scenario(3, 2, gain_mean=gain_mean, noise=0.01, p_max=10.0, p0=0.01,
                      n_levels=n_levels, spacing=spacing)
    st = build_state_alphabet(sc, n_cells)
    ob = build_observation("individual", sc, st)
    if utility == "energy_efficiency":
        spec = energy_efficiency(Psi("packet_success", 100), 3)
    elif utility == "shannon_rate":
        spec = shannon_rate(3)
    else:
        raise ValueError(f"unknown utility {utility!r}")
    return Problem(sc, st, ob, spec)


def random_problem(rng, K=None, n_cells=None, n_actions=None, structure="individual",
                   max_states=4096):
    """Small random single-band interference instance.

    ``K`` in {1, 2, 3}, ``n_cells`` in {2..6} and ``n_actions`` in {2..5}
    are drawn when not given. Direct gains fade with ``n_cells`` cells;
    cross gains fade too unless that would exceed ``max_states`` states, in
    which case they are held at their means. Utilities are EE with a random
    ``psi``; weights are a random simplex point.
    """
    K = int(rng.integers(1, 4)) if K is None else K
    n_cells = int(rng.integers(2, 7)) if n_cells is None else n_cells
    n_actions = int(rng.integers(2, 6)) if n_actions is None else n_actions
    direct = float(rng.uniform(0.5, 2.0))
    cross = float(rng.uniform(0.05, 0.8))
    noise = float(rng.uniform(0.005, 0.05))
    sc = interference_scenario(K, 1, direct_mean=direct, cross_mean=cross, noise=noise,
                               p_max=0.1, p0=float(rng.uniform(0.0, 0.02)), n_levels=n_actions)
    n_vars = len(sc.link_variables)
    fading = np.zeros(n_vars, bool)
    for v, group in enumerate(sc.link_variables):
        fading[v] = all(tx == rx for tx, rx, _ in group)
    if n_cells ** n_vars <= max_states:
        fading[:] = True
    st = build_state_alphabet(sc, n_cells, fading=fading)
    ob = observation_for(structure, sc, st)
    kind = rng.integers(3)
    psi = (Psi("outage", float(rng.uniform(0.5, 3.0))), Psi("packet_success", int(rng.integers(1, 20))),
           Psi("shannon"))[kind]
    spec = energy_efficiency(psi, K, rng.dirichlet(np.ones(K)))
    return Problem(sc, st, ob, spec)
