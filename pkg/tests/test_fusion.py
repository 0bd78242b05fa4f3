import numpy as np
import pytest

from chorus.errors import AllZeroScores, FingerprintMismatch, InvalidKernelParam
from chorus.fusion import (
    CORE,
    MODEL_ONLY,
    MODES,
    TOKEN_ONLY,
    VANILLA,
    ConsistencyKernel,
    Distribution,
    EnsembleConfig,
    entropy,
    fuse,
    kernel_eval,
    model_consistency,
    normalize_weights,
    rbf_consistency_sum,
    reference_distribution,
    token_disparity,
)
from chorus.oracle import oracle_fuse

FP = "f" * 16
FP_OTHER = "0" * 16

# Frozen independently computed constants.
EXP_NEG_1 = 0.36787944117144233
LN_2 = 0.6931471805599453
LN_4 = 1.3862943611198906
TWO_OVER_LN_2 = 2.8853900817779268
TWO_EXP_NEG_2 = 0.2706705664732254


def dist(*probs: float, fp: str = FP) -> Distribution:
    return Distribution(fp, np.array(probs))


def random_dist(rng: np.random.Generator, size: int, fp: str = FP) -> Distribution:
    # Squaring sharpens some entries toward zero so low-entropy cases occur.
    raw = rng.random(size) ** 2 + 1e-12
    return Distribution(fp, raw / raw.sum())


def test_distribution_validation():
    with pytest.raises(ValueError):
        Distribution(FP, np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        Distribution(FP, np.array([1.5, -0.5]))
    with pytest.raises(ValueError):
        Distribution(FP, np.array([]))
    d = dist(0.25, 0.75)
    with pytest.raises(ValueError):
        d.probs[0] = 1.0  # frozen storage


def test_reference_is_elementwise_mean():
    main = dist(0.6, 0.3, 0.1)
    assist = dist(0.2, 0.5, 0.3)
    ref = reference_distribution(main, [assist])
    assert np.allclose(ref.probs, [0.4, 0.4, 0.2], atol=1e-15)
    alone = reference_distribution(main, [])
    assert np.array_equal(alone.probs, main.probs)
    two_sided = reference_distribution(dist(1.0, 0.0), [dist(0.0, 1.0)])
    assert np.allclose(two_sided.probs, [0.5, 0.5], atol=0)


def test_reference_rejects_foreign_space():
    with pytest.raises(FingerprintMismatch):
        reference_distribution(dist(1.0, 0.0), [dist(1.0, 0.0, fp=FP_OTHER)])


def test_token_disparity():
    a = dist(0.5, 0.5)
    assert np.array_equal(token_disparity(a, a), [0.0, 0.0])
    assert np.array_equal(token_disparity(dist(1.0, 0.0), dist(0.0, 1.0)), [1.0, 1.0])
    rng = np.random.default_rng(7)
    for _ in range(50):
        p = random_dist(rng, 6)
        q = random_dist(rng, 6)
        expected = [abs(x - y) for x, y in zip(p.probs, q.probs)]
        assert np.allclose(token_disparity(p, q), expected, atol=1e-15)
    with pytest.raises(FingerprintMismatch):
        token_disparity(a, dist(0.5, 0.5, fp=FP_OTHER))


def test_kernel_reference_values():
    rbf = ConsistencyKernel("rbf", sigma=0.5)
    assert kernel_eval(rbf, np.array([0.0]))[0] == 1.0
    assert abs(kernel_eval(rbf, np.array([0.5]))[0] - EXP_NEG_1) <= 1e-12
    power = ConsistencyKernel("power", alpha=1.0, beta=1.0)
    assert kernel_eval(power, np.array([1.0]))[0] == 0.0
    sig = ConsistencyKernel("sigmoid", gamma=1.0)
    assert kernel_eval(sig, np.array([0.5]))[0] == 0.5


def test_kernels_strictly_decreasing_at_defaults():
    grid = np.linspace(0.0, 1.0, 101)
    for kind in ("rbf", "power", "sigmoid"):
        values = kernel_eval(ConsistencyKernel(kind), grid)
        assert np.all(np.diff(values) < 0), kind
        assert np.all(np.isfinite(values)) and np.all(values >= 0)


def test_kernel_param_validation():
    with pytest.raises(InvalidKernelParam):
        ConsistencyKernel("rbf", sigma=0.0)
    with pytest.raises(InvalidKernelParam):
        ConsistencyKernel("power", beta=-1.0)
    with pytest.raises(InvalidKernelParam):
        ConsistencyKernel("triangle")


def test_entropy_values():
    assert entropy(dist(1.0, 0.0, 0.0)) == 0.0
    assert abs(entropy(dist(0.25, 0.25, 0.25, 0.25)) - LN_4) <= 1e-12
    assert abs(entropy(dist(0.5, 0.5)) - LN_2) <= 1e-12


def test_model_consistency_reference_value():
    # p_tilde equals p_star, so every disparity is 0 and rbf gives s_t = 1.
    d = dist(0.5, 0.5)
    s_t = kernel_eval(ConsistencyKernel("rbf"), token_disparity(d, d))
    assert abs(model_consistency(s_t, d) - TWO_OVER_LN_2) <= 1e-12


def test_model_consistency_entropy_floor():
    sharp = dist(1.0, 0.0)
    score = model_consistency(np.array([1.0, 1.0]), sharp, entropy_floor=1e-3)
    assert score == 2.0 / 1e-3


def test_model_consistency_numerator_linearity():
    # Same entropy (ln 2), all-consistent tokens: doubling the vocabulary
    # doubles the summed numerator and hence the score.
    small = model_consistency(np.ones(2), dist(0.5, 0.5))
    large = model_consistency(np.ones(4), dist(0.5, 0.5, 0.0, 0.0))
    assert abs(large - 2.0 * small) <= 1e-12


def test_normalize_weights_floor():
    w = normalize_weights([1.0, 3.0], main_weight_floor=0.5)
    assert np.allclose(w, [0.5, 0.5], atol=1e-15)
    w = normalize_weights([4.0, 1.0], main_weight_floor=0.5)
    assert np.allclose(w, [0.8, 0.2], atol=1e-15)
    assert np.array_equal(normalize_weights([0.3], main_weight_floor=0.9), [1.0])
    # Floor redistribution preserves relative assistant ordering.
    w = normalize_weights([1.0, 6.0, 2.0], main_weight_floor=0.5)
    assert abs(w[0] - 0.5) <= 1e-15
    assert abs(w[1] / w[2] - 3.0) <= 1e-12
    assert abs(w.sum() - 1.0) <= 1e-12


def test_normalize_weights_scale_invariance():
    rng = np.random.default_rng(11)
    for _ in range(100):
        raw = rng.random(4) + 1e-9
        scale = float(rng.random() * 99 + 0.01)
        a = normalize_weights(raw, 0.5)
        b = normalize_weights(raw * scale, 0.5)
        assert np.allclose(a, b, atol=1e-12)


def test_normalize_weights_all_zero():
    with pytest.raises(AllZeroScores):
        normalize_weights([0.0, 0.0])


def test_rbf_consistency_sum():
    assert rbf_consistency_sum(np.zeros(5)) == 5.0
    assert abs(rbf_consistency_sum(np.array([1.0, 1.0]), 0.5) - TWO_EXP_NEG_2) <= 1e-12
    rng = np.random.default_rng(3)
    delta = rng.random(16)
    via_kernel = kernel_eval(ConsistencyKernel("rbf", sigma=0.5), delta).sum()
    assert abs(rbf_consistency_sum(delta, 0.5) - via_kernel) <= 1e-12


def all_configs() -> list[EnsembleConfig]:
    return [
        EnsembleConfig(kernel=ConsistencyKernel(kind), mode=mode)
        for kind in ("rbf", "power", "sigmoid")
        for mode in MODES
    ]


def test_fixed_point_under_every_mode_and_kernel():
    rng = np.random.default_rng(5)
    for config in all_configs():
        shared = random_dist(rng, 7)
        fused, report = fuse(shared, [shared, shared], config)
        assert np.max(np.abs(fused.probs - shared.probs)) <= 1e-9
        weights = [m.weight for m in report.models]
        assert abs(sum(weights) - 1.0) <= 1e-12 and min(weights) >= 0


def test_no_assistants_returns_main():
    rng = np.random.default_rng(6)
    for config in all_configs():
        main = random_dist(rng, 5)
        fused, _ = fuse(main, [], config)
        assert np.max(np.abs(fused.probs - main.probs)) <= 1e-12


def test_vanilla_equals_reference_exactly():
    rng = np.random.default_rng(8)
    config = EnsembleConfig(mode=VANILLA)
    for _ in range(200):
        main = random_dist(rng, 9)
        assists = [random_dist(rng, 9) for _ in range(int(rng.integers(0, 4)))]
        fused, _ = fuse(main, assists, config)
        ref = reference_distribution(main, assists)
        assert np.max(np.abs(fused.probs - ref.probs)) <= 1e-12


def test_fuse_matches_loop_oracle():
    rng = np.random.default_rng(9)
    kinds = ("rbf", "power", "sigmoid")
    worst = 0.0
    for _ in range(250):
        size = int(rng.integers(2, 17))
        main = random_dist(rng, size)
        assists = [random_dist(rng, size) for _ in range(int(rng.integers(0, 4)))]
        kernel = ConsistencyKernel(
            kind=kinds[int(rng.integers(0, 3))],
            sigma=float(rng.random() * 1.5 + 0.1),
            alpha=float(rng.random() * 2 + 0.1),
            beta=float(rng.random() * 3),
            gamma=float(rng.random() * 4 - 1),
        )
        mode = MODES[int(rng.integers(0, 4))]
        config = EnsembleConfig(kernel=kernel, mode=mode)
        fused, _ = fuse(main, assists, config)
        expected = oracle_fuse(
            list(main.probs),
            [list(a.probs) for a in assists],
            kind=kernel.kind,
            sigma=kernel.sigma,
            alpha=kernel.alpha,
            beta=kernel.beta,
            gamma=kernel.gamma,
            mode=mode,
            main_weight_floor=config.main_weight_floor,
            entropy_floor=config.entropy_floor,
        )
        worst = max(worst, float(np.max(np.abs(fused.probs - np.array(expected)))))
    assert worst <= 1e-9


def test_fused_output_is_a_distribution():
    rng = np.random.default_rng(10)
    for config in all_configs():
        main = random_dist(rng, 12)
        assists = [random_dist(rng, 12) for _ in range(3)]
        fused, _ = fuse(main, assists, config)
        assert abs(float(fused.probs.sum()) - 1.0) <= 1e-9
        assert np.all(fused.probs >= 0)


def test_raising_disparity_never_raises_contribution():
    # An assistant's unnormalized contribution at token v is
    # raw_score * s_t[v] * p[v]; pushing delta[v] up must not increase it.
    rng = np.random.default_rng(12)
    for kind in ("rbf", "power", "sigmoid"):
        kernel = ConsistencyKernel(kind)
        for _ in range(50):
            p = random_dist(rng, 8)
            delta = rng.random(8)
            v = int(rng.integers(0, 8))
            bumped = delta.copy()
            bumped[v] = min(1.0, bumped[v] + float(rng.random() * (1 - bumped[v])))
            before_t = kernel_eval(kernel, delta)
            after_t = kernel_eval(kernel, bumped)
            before = model_consistency(before_t, p) * before_t[v] * p.probs[v]
            after = model_consistency(after_t, p) * after_t[v] * p.probs[v]
            assert after <= before + 1e-12


def test_abstaining_assistant_gets_zero_weight():
    rng = np.random.default_rng(13)
    main = random_dist(rng, 6)
    live = random_dist(rng, 6)
    config = EnsembleConfig(mode=CORE)
    fused_with_gap, report = fuse(main, [None, live], config)
    assert report.models[1].abstain and report.models[1].weight == 0.0
    assert not report.models[2].abstain
    fused_dense, _ = fuse(main, [live], config)
    assert np.max(np.abs(fused_with_gap.probs - fused_dense.probs)) <= 1e-12


def test_report_serialization_shape():
    main = dist(0.5, 0.5)
    fused, report = fuse(main, [dist(0.25, 0.75), None], EnsembleConfig(mode=TOKEN_ONLY))
    blob = report.to_dict(["main", "a0", "a1"])
    assert [m["id"] for m in blob["models"]] == ["main", "a0", "a1"]
    assert blob["models"][2]["abstain"] is True
    assert blob["models"][2]["entropy"] is None
    with pytest.raises(ValueError):
        report.to_dict(["main"])


def test_mode_validation():
    with pytest.raises(ValueError):
        EnsembleConfig(mode="hybrid")
    with pytest.raises(ValueError):
        EnsembleConfig(main_weight_floor=1.5)
    with pytest.raises(ValueError):
        EnsembleConfig(entropy_floor=0.0)


def test_model_only_weights_follow_consistency_at_equal_entropy():
    # Two equally confident assistants (same entropy, permuted masses): the
    # one agreeing with main has smaller disparities, so its summed token
    # consistency and hence its model weight must be larger.
    main = dist(0.7, 0.2, 0.1)
    agree = dist(0.7, 0.2, 0.1)
    disagree = dist(0.1, 0.2, 0.7)
    _, report = fuse(main, [agree, disagree], EnsembleConfig(mode=MODEL_ONLY))
    assert report.models[1].weight > report.models[2].weight
