"""Stochastic perturbations for robustness studies."""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import DegenerateAfterClamp
from .fusion import Distribution


def stable_seed(*parts) -> int:
    """Map arbitrary labels to a 63-bit RNG seed, stably across runs and platforms."""
    h = hashlib.sha256("\x1f".join(repr(p) for p in parts).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big") >> 1


def add_probability_noise(dist: Distribution, std: float, seed: int) -> Distribution:
    """Gaussian-perturb each probability, clamp at zero, renormalize.

    A draw that zeroes the whole vector is resampled once; a second failure
    raises, since the caller's noise level is then meaninglessly large.
    """
    if std < 0:
        raise ValueError("std must be >= 0")
    if std == 0:
        return dist
    rng = np.random.default_rng(seed)
    for _ in range(2):
        noisy = np.maximum(dist.probs + rng.normal(0.0, std, len(dist)), 0.0)
        total = noisy.sum()
        if total > 0:
            return Distribution(dist.vocab_fingerprint, noisy / total)
    raise DegenerateAfterClamp(f"noise std={std} wiped out the entire distribution twice")
