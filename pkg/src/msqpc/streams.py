"""Seed substream derivation.

Every random choice in a run descends from one 64-bit seed through
``numpy.random.SeedSequence`` spawn keys::

    (TRIAL, trial)                   -> per-trial seed for Monte Carlo
    (attempt, user, TP1)             -> preparation basis, index, TP1 measurement draws
    (attempt, user, USER)            -> r bits, user measurement draws
    (attempt, user, TP2)             -> v bits, TP2 measurement draws
    (attempt, user, PARTITION)       -> Case-8 check-set selection
    (attempt, user, EVE)             -> adversary randomness
    (INPUTS,)                        -> random private inputs / key for sweeps

Keeping the adversary on its own stream means installing an attack never
shifts any honest party's draws.
"""
from __future__ import annotations

import numpy as np

TP1, USER, TP2, PARTITION, EVE = range(5)
TRIAL = 1 << 20
INPUTS = (1 << 20) + 1

MASK64 = (1 << 64) - 1


def substream(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(path)))


def derive_seed(seed: int, *path: int) -> int:
    state = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(path)).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
