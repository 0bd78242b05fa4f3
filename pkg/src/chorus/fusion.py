"""Consistency-weighted fusion of next-token distributions.

One main model anchors the token space; assistant distributions arrive
already projected into it. Fusion proceeds in four steps: average the
participants into a reference, measure each assistant's per-token disparity
from that reference, squash disparity through a kernel into a token
consistency filter, and combine models with weights driven by summed
consistency over output entropy. Ablation modes switch the filter and the
weighting on and off independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AllZeroScores, FingerprintMismatch, InvalidKernelParam

RBF = "rbf"
POWER = "power"
SIGMOID = "sigmoid"
KERNEL_KINDS = (RBF, POWER, SIGMOID)

VANILLA = "vanilla"
TOKEN_ONLY = "token_only"
MODEL_ONLY = "model_only"
CORE = "core"
MODES = (VANILLA, TOKEN_ONLY, MODEL_ONLY, CORE)


@dataclass(frozen=True, eq=False)
class Distribution:
    """A normalized probability vector tied to one vocabulary."""

    vocab_fingerprint: str
    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("probs must be a non-empty 1-D vector")
        if np.any(arr < 0):
            raise ValueError("probs must be non-negative")
        total = float(arr.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probs sum to {total}, not 1")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    def __len__(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class ConsistencyKernel:
    """Disparity -> consistency squashing function.

    rbf: exp(-delta/sigma); power: alpha*(1-delta)^beta;
    sigmoid: 1 - 1/(1 + exp(-gamma*(delta-0.5))). All three are strictly
    decreasing on [0,1] at the default parameters.
    """

    kind: str = RBF
    sigma: float = 0.5
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise InvalidKernelParam(f"unknown kernel kind {self.kind!r}")
        if self.kind == RBF and self.sigma <= 0:
            raise InvalidKernelParam(f"sigma must be positive, got {self.sigma}")
        if self.kind == POWER and self.beta < 0:
            raise InvalidKernelParam(f"beta must be non-negative, got {self.beta}")


def kernel_eval(kernel: ConsistencyKernel, delta: np.ndarray) -> np.ndarray:
    """Elementwise token consistency for disparities delta in [0,1]."""
    d = np.asarray(delta, dtype=np.float64)
    if kernel.kind == RBF:
        return np.exp(-d / kernel.sigma)
    if kernel.kind == POWER:
        return kernel.alpha * (1.0 - d) ** kernel.beta
    return 1.0 - 1.0 / (1.0 + np.exp(-kernel.gamma * (d - 0.5)))


@dataclass(frozen=True)
class EnsembleConfig:
    kernel: ConsistencyKernel = field(default_factory=ConsistencyKernel)
    mode: str = CORE
    main_weight_floor: float = 0.5
    entropy_floor: float = 1e-3

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 <= self.main_weight_floor <= 1.0:
            raise ValueError("main_weight_floor must lie in [0, 1]")
        if self.entropy_floor <= 0:
            raise ValueError("entropy_floor must be positive")


@dataclass(frozen=True)
class ModelReport:
    """Per-model fusion diagnostics for one decode step. Index 0 is main."""

    weight: float
    entropy: float | None
    raw_score: float | None
    abstain: bool
    delta: np.ndarray | None
    s_t: np.ndarray | None
    probs: np.ndarray | None


@dataclass(frozen=True)
class ConsistencyReport:
    models: tuple[ModelReport, ...]

    def to_dict(self, model_ids: Sequence[str]) -> dict:
        """JSON-ready summary: scalar fields only, one entry per model."""
        if len(model_ids) != len(self.models):
            raise ValueError("one id required per model report")
        return {
            "models": [
                {
                    "id": mid,
                    "weight": m.weight,
                    "entropy": m.entropy,
                    "raw_score": m.raw_score,
                    "abstain": m.abstain,
                }
                for mid, m in zip(model_ids, self.models)
            ]
        }


def _require_same_space(a: Distribution, b: Distribution) -> None:
    if a.vocab_fingerprint != b.vocab_fingerprint:
        raise FingerprintMismatch(
            f"distributions live in different spaces: {a.vocab_fingerprint} vs {b.vocab_fingerprint}"
        )


def reference_distribution(main: Distribution, assists: Sequence[Distribution]) -> Distribution:
    """Arithmetic mean of the main and all participating assistant distributions."""
    total = np.array(main.probs, dtype=np.float64)
    for a in assists:
        _require_same_space(main, a)
        total += a.probs
    return Distribution(main.vocab_fingerprint, total / (1 + len(assists)))


def token_disparity(p_tilde: Distribution, p_star: Distribution) -> np.ndarray:
    _require_same_space(p_tilde, p_star)
    return np.abs(p_tilde.probs - p_star.probs)


def entropy(dist: Distribution) -> float:
    """Shannon entropy in nats, with 0*ln(0) taken as 0."""
    p = dist.probs
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def model_consistency(s_t: np.ndarray, dist: Distribution, entropy_floor: float = 1e-3) -> float:
    """Summed token consistency over (floored) entropy: confident agreement scores high."""
    return float(np.sum(s_t)) / max(entropy(dist), entropy_floor)


def rbf_consistency_sum(delta: np.ndarray, sigma: float = 0.5) -> float:
    """Scalar consistency diagnostic: sum of exp(-delta/sigma) over the vocabulary."""
    if sigma <= 0:
        raise InvalidKernelParam(f"sigma must be positive, got {sigma}")
    return float(np.exp(-np.asarray(delta, dtype=np.float64) / sigma).sum())


def normalize_weights(raw: Sequence[float], main_weight_floor: float = 0.0) -> np.ndarray:
    """Project raw scores onto the simplex; raw[0] is the main model.

    If the main model's normalized share falls below the floor, it is raised
    to the floor and the assistant shares are rescaled proportionally to fill
    the remainder.
    """
    scores = np.asarray(raw, dtype=np.float64)
    if np.any(scores < 0):
        raise ValueError("raw scores must be non-negative")
    total = float(scores.sum())
    if total <= 0:
        raise AllZeroScores("all model consistency scores are zero")
    w = scores / total
    if len(w) > 1 and w[0] < main_weight_floor:
        rest = float(w[1:].sum())
        w = w.copy()
        w[0] = main_weight_floor
        w[1:] *= (1.0 - main_weight_floor) / rest
    return w


def fuse(
    main: Distribution,
    assists: Sequence[Distribution | None],
    config: EnsembleConfig,
) -> tuple[Distribution, ConsistencyReport]:
    """Fuse one step's distributions into the ensemble output.

    `assists` entries are already projected into the main space; None marks
    an abstaining assistant (zero mapped mass or failed endpoint), which is
    excluded from the reference average and carries weight 0. Diagnostics
    (disparity, entropy, raw scores) are computed in every mode; the mode
    only controls how the fused vector is assembled.
    """
    live = [a for a in assists if a is not None]
    for a in live:
        _require_same_space(main, a)
    v_size = len(main)

    p_star = reference_distribution(main, live)
    deltas = [token_disparity(a, p_star) for a in live]
    filters = [kernel_eval(config.kernel, d) for d in deltas]
    entropies = [entropy(a) for a in live]
    raw = [float(np.sum(f)) / max(h, config.entropy_floor) for f, h in zip(filters, entropies)]

    delta_main = token_disparity(main, p_star)
    h_main = entropy(main)
    # Main is never filtered, so its numerator is a full vocabulary of ones.
    raw_main = v_size / max(h_main, config.entropy_floor)

    if config.mode in (MODEL_ONLY, CORE):
        weights = normalize_weights([raw_main] + raw, config.main_weight_floor)
    else:
        weights = np.full(1 + len(live), 1.0 / (1 + len(live)))

    if config.mode == VANILLA:
        fused = p_star
    else:
        apply_filter = config.mode in (TOKEN_ONLY, CORE)
        acc = weights[0] * main.probs
        for k, a in enumerate(live):
            mass = filters[k] * a.probs if apply_filter else a.probs
            acc = acc + weights[k + 1] * mass
        fused = Distribution(main.vocab_fingerprint, acc / acc.sum())

    entries = [
        ModelReport(
            weight=float(weights[0]),
            entropy=h_main,
            raw_score=raw_main,
            abstain=False,
            delta=delta_main,
            s_t=np.ones(v_size),
            probs=main.probs,
        )
    ]
    k = 0
    for a in assists:
        if a is None:
            entries.append(ModelReport(0.0, None, None, True, None, None, None))
        else:
            entries.append(
                ModelReport(
                    weight=float(weights[k + 1]),
                    entropy=entropies[k],
                    raw_score=raw[k],
                    abstain=False,
                    delta=deltas[k],
                    s_t=filters[k],
                    probs=a.probs,
                )
            )
            k += 1
    return fused, ConsistencyReport(tuple(entries))
