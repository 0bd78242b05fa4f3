"""Slow, loop-based re-derivation of the fusion math for cross-checking.

This module intentionally avoids numpy and never imports the production
fusion code. Every quantity is computed with plain floats and explicit
loops, straight from the defining formulas, so that agreement between this
and `fusion.fuse` is evidence of correctness rather than of shared code.
The `selftest` CLI subcommand and the equivalence test suite both call in
here.
"""

from __future__ import annotations

import math


def oracle_kernel(kind: str, delta: float, sigma: float, alpha: float, beta: float, gamma: float) -> float:
    if kind == "rbf":
        return math.exp(-delta / sigma)
    if kind == "power":
        return alpha * (1.0 - delta) ** beta
    if kind == "sigmoid":
        return 1.0 - 1.0 / (1.0 + math.exp(-gamma * (delta - 0.5)))
    raise ValueError(f"unknown kernel kind {kind!r}")


def oracle_entropy(probs: list[float]) -> float:
    h = 0.0
    for p in probs:
        if p > 0.0:
            h -= p * math.log(p)
    return h


def oracle_fuse(
    main: list[float],
    assists: list[list[float]],
    kind: str = "rbf",
    sigma: float = 0.5,
    alpha: float = 1.0,
    beta: float = 1.0,
    gamma: float = 1.0,
    mode: str = "core",
    main_weight_floor: float = 0.5,
    entropy_floor: float = 1e-3,
) -> list[float]:
    """Fused distribution over the main vocabulary, computed the slow way."""
    size = len(main)
    count = 1 + len(assists)

    reference = []
    for v in range(size):
        total = main[v]
        for a in assists:
            total += a[v]
        reference.append(total / count)

    if mode == "vanilla":
        return reference

    # Per-assistant token consistency and entropy-regularized model score.
    token_scores = []
    model_scores = []
    for a in assists:
        row = []
        for v in range(size):
            disparity = abs(a[v] - reference[v])
            row.append(oracle_kernel(kind, disparity, sigma, alpha, beta, gamma))
        token_scores.append(row)
        model_scores.append(sum(row) / max(oracle_entropy(a), entropy_floor))
    main_score = size / max(oracle_entropy(main), entropy_floor)

    if mode in ("model_only", "core"):
        total_score = main_score + sum(model_scores)
        weights = [main_score / total_score] + [s / total_score for s in model_scores]
        if count > 1 and weights[0] < main_weight_floor:
            shrink = (1.0 - main_weight_floor) / sum(weights[1:])
            weights = [main_weight_floor] + [w * shrink for w in weights[1:]]
    else:
        weights = [1.0 / count] * count

    fused = []
    for v in range(size):
        value = weights[0] * main[v]
        for i, a in enumerate(assists):
            mass = a[v]
            if mode in ("token_only", "core"):
                mass *= token_scores[i][v]
            value += weights[1 + i] * mass
        fused.append(value)

    norm = sum(fused)
    return [value / norm for value in fused]
