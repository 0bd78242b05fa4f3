import numpy as np
import pytest

from chorus.errors import DegenerateAfterClamp
from chorus.fusion import Distribution
from chorus.noise import add_probability_noise, stable_seed


def random_dist(rng, size):
    raw = rng.random(size) + 1e-6
    return Distribution("f" * 16, raw / raw.sum())


def test_zero_std_is_identity():
    dist = Distribution("f" * 16, [0.25, 0.75])
    assert add_probability_noise(dist, 0.0, seed=7) is dist


def test_output_valid_over_many_draws():
    # Every perturbed vector must remain a probability distribution.
    rng = np.random.default_rng(123)
    for i in range(1000):
        dist = random_dist(rng, int(rng.integers(2, 20)))
        out = add_probability_noise(dist, float(rng.uniform(0.01, 0.5)), seed=i)
        assert np.all(out.probs >= 0.0)
        assert abs(out.probs.sum() - 1.0) < 1e-9


def test_same_seed_same_noise():
    rng = np.random.default_rng(5)
    dist = random_dist(rng, 8)
    a = add_probability_noise(dist, 0.1, seed=42)
    b = add_probability_noise(dist, 0.1, seed=42)
    c = add_probability_noise(dist, 0.1, seed=43)
    assert np.array_equal(a.probs, b.probs)
    assert not np.array_equal(a.probs, c.probs)


def test_negative_std_rejected():
    dist = Distribution("f" * 16, [1.0])
    with pytest.raises(ValueError):
        add_probability_noise(dist, -0.1, seed=0)


def test_degenerate_after_clamp_eventually_raised():
    # With one token and absurd std, roughly a quarter of seeds push both the
    # draw and its retry below zero.  Some seed in a modest range must trip it.
    dist = Distribution("f" * 16, [1.0])
    tripped = 0
    for seed in range(200):
        try:
            add_probability_noise(dist, 1000.0, seed=seed)
        except DegenerateAfterClamp:
            tripped += 1
    assert tripped > 0


def test_stable_seed_is_deterministic_and_sensitive():
    assert stable_seed("cell", 0.1, 3) == stable_seed("cell", 0.1, 3)
    assert stable_seed("cell", 0.1, 3) != stable_seed("cell", 0.1, 4)
    assert 0 <= stable_seed("x") < 2**63
