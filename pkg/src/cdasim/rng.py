"""Deterministic child RNG streams derived from one master seed.

Each consumer of randomness (the fundamental path, each agent's decisions,
each agent's arrival schedule, ...) gets its own stream keyed by a stable
label.  Adding or removing consumers never perturbs the streams of others,
so growing the agent population leaves the fundamental path untouched.
"""

from __future__ import annotations

import hashlib

import numpy as np


def child_stream(master_seed: int, label: str) -> np.random.Generator:
    """Independent generator for ``label``, reproducible from the master seed."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([master_seed, key]))
