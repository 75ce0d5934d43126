"""Monte Carlo evaluation of policies over block-fading channels.

Blocks are processed in fixed-size chunks. Chunk ``c`` draws from its own
Philox stream derived from ``SeedSequence(seed).spawn``, split into fading,
observation-noise and lottery substreams, so results do not depend on the
number of worker threads and every policy evaluated with the same seed sees
the same fading draws.
"""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import BaselinePolicy
from .model import utility_array
from .region import AuxiliaryMix
from .synth import DecisionProfile

CHUNK = 8192


@dataclass
class EvalResult:
    means: np.ndarray
    stderrs: np.ndarray
    n_blocks: int
    seed: int
    policy: str
    draw_digest: str
    samples: np.ndarray | None = None   # (n_blocks, K) per-block utilities

    @property
    def sum_mean(self):
        return float(self.means.sum())

    @property
    def sum_stderr(self):
        if self.samples is None:
            raise ValueError("per-block samples were not kept")
        s = self.samples.sum(axis=1)
        return float(s.std(ddof=1) / np.sqrt(len(s)))


def describe(policy):
    if isinstance(policy, BaselinePolicy):
        return policy.kind
    if isinstance(policy, AuxiliaryMix):
        return f"lottery[{len(policy.support)}]"
    if isinstance(policy, DecisionProfile):
        return "decision_functions"
    raise TypeError(f"unsupported policy {type(policy).__name__}")


def _chunk_streams(seed, n_chunks):
    out = []
    for child in np.random.SeedSequence(seed).spawn(n_chunks):
        fading, noise, lottery = child.spawn(3)
        out.append(tuple(np.random.Generator(np.random.Philox(s)) for s in (fading, noise, lottery)))
    return out


def _powers(policy, scenario, observation, gains, signals, lottery_rng):
    acts = scenario.actions.actions
    if isinstance(policy, BaselinePolicy):
        return policy.powers(scenario, gains)
    if isinstance(policy, DecisionProfile):
        return np.stack([acts[policy.tables[i][signals[:, i]]] for i in range(scenario.K)], axis=1)
    v = lottery_rng.choice(len(policy.support), size=len(gains), p=policy.probs)
    idx = np.empty(signals.shape, dtype=np.int64)
    for k, prof in enumerate(policy.profiles):
        rows = v == k
        for i in range(scenario.K):
            idx[rows, i] = prof.tables[i][signals[rows, i]]
    return acts[idx]


def _run_chunk(policy, scenario, observation, spec, n, streams, channel):
    fading, noise, lottery = streams
    states = observation.states
    if channel == "continuous":
        values = states.sample_values(n, fading)
        gains = scenario.gains_from_variables(values)
        signals = observation.observe(values, noise)
        draws = values
    else:
        z = fading.choice(len(states), size=n, p=states.probs)
        gains = states.gains[z]
        signals = observation.sample_signals(z, noise)
        draws = z
    powers = _powers(policy, scenario, observation, gains, signals, lottery)
    return utility_array(spec, scenario, gains, powers), np.ascontiguousarray(draws).tobytes()


def simulate(policy, scenario, observation, spec, n_blocks=100_000, seed=0,
             channel="continuous", threads=1, keep_samples=True):
    """Long-term utilities of ``policy`` estimated over ``n_blocks`` blocks.

    ``channel="continuous"`` draws every fading gain from its continuous law,
    forms each transmitter's signal from the drawn gains (adding the
    calibrated estimation noise for noisy structures), and scores the
    chosen powers on the continuous gains. ``channel="discrete"`` draws
    states and signals from the discrete model instead.
    """
    if n_blocks < 1:
        raise ValueError("n_blocks must be positive")
    if channel not in ("continuous", "discrete"):
        raise ValueError(f"unknown channel mode {channel!r}")
    sizes = [CHUNK] * (n_blocks // CHUNK) + ([n_blocks % CHUNK] if n_blocks % CHUNK else [])
    streams = _chunk_streams(seed, len(sizes))

    def work(k):
        return _run_chunk(policy, scenario, observation, spec, sizes[k], streams[k], channel)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(k) for k in range(len(sizes))]
    u = np.concatenate([p[0] for p in parts])
    digest = hashlib.sha256()
    for _, raw in parts:
        digest.update(raw)
    stderr = u.std(axis=0, ddof=1) / np.sqrt(n_blocks) if n_blocks > 1 else np.zeros(scenario.K)
    return EvalResult(u.mean(axis=0), stderr, n_blocks, seed, describe(policy),
                      digest.hexdigest(), u if keep_samples else None)


def paired_difference(a, b, weights=None):
    """Mean and standard error of the per-block difference of the
    (weighted) sum utility between two results drawn with common random
    numbers."""
    if a.draw_digest != b.draw_digest:
        raise ValueError("results were not drawn with common random numbers")
    w = np.ones(a.samples.shape[1]) if weights is None else np.asarray(weights)
    d = a.samples @ w - b.samples @ w
    return float(d.mean()), float(d.std(ddof=1) / np.sqrt(len(d)))


@dataclass
class SweepRow:
    x: float
    policy: str
    result: EvalResult


def sweep_curve(policies, family, axis, n_blocks=100_000, seed=0, **kwargs):
    """Evaluate every policy at every axis point with common random numbers.

    ``family(x)`` returns ``(scenario, observation, spec)`` and each value of
    the ``policies`` mapping builds a policy from that triple.
    """
    axis = list(axis)
    if not axis:
        raise ValueError("axis must be nonempty")
    rows = []
    for x in axis:
        scenario, observation, spec = family(x)
        for name, build in policies.items():
            policy = build(scenario, observation, spec)
            res = simulate(policy, scenario, observation, spec, n_blocks, seed, **kwargs)
            rows.append(SweepRow(float(x), name, res))
    return rows
