import numpy as np
import pytest

from primex_track.belief import GaussianBelief, MotionModel, SensorModel, predict, trace_cov, update
from primex_track.errors import DimensionError
from primex_track.fusion import (
    FusionStats,
    centralized_step,
    ci_optimal_weight,
    ci_pairwise_optimal,
    ci_uniform_fuse,
    golden_section,
    primex_pairwise_fuse,
    select_weight,
    solve_primex_weights,
)
from primex_track.ic_codes import InformationCode as IC
from primex_track.oracles import ci_trace_grid, grid_search_weights, ls_objective


def scalar(mean, var):
    return GaussianBelief.from_moments([mean], [[var]])


def test_weights_symmetric_case():
    sol = solve_primex_weights(IC([1, 1, 0]), IC([1, 0, 1]))
    assert sol.w_i == pytest.approx(0.5) and sol.w_j == pytest.approx(0.5)
    assert sol.residual_norm_sq == pytest.approx(0.5)
    assert not sol.clamped and not sol.fallback


def test_weights_subset_case():
    sol = solve_primex_weights(IC([1, 1, 1, 0]), IC([1, 1, 0, 0]))
    assert sol.w_i == pytest.approx(0.0, abs=1e-12) and sol.w_j == pytest.approx(1.0)
    assert sol.residual_norm_sq == pytest.approx(0.0, abs=1e-20)
    assert sol.fused_exponents == pytest.approx((1.0, 0.0))


def test_weights_match_grid_on_12_bit_pairs():
    rng = np.random.default_rng(12)
    for _ in range(50):
        a, b = IC(rng.integers(0, 2, 12)), IC(rng.integers(0, 2, 12))
        if a == b:
            continue
        sol = solve_primex_weights(a, b)
        w, j = grid_search_weights(a.tolist(), b.tolist())
        assert abs(sol.w_i - w) <= 1e-3
        assert ls_objective(a.tolist(), b.tolist(), sol.w_i)[0] <= j + 1e-8
        assert sol.w_i + sol.w_j == pytest.approx(1.0, abs=1e-10)


def test_weights_closed_form():
    # only-local bits n10 and only-received bits n01 give w_i = n01 / (n10 + n01)
    sol = solve_primex_weights(IC([1, 1, 1, 0, 0, 1]), IC([1, 0, 0, 1, 0, 1]))
    assert sol.w_i == pytest.approx(1 / 3)
    assert sol.w_i + sol.w_j == 1.0


def test_identical_codes_fall_back_to_equal_weights():
    sol = solve_primex_weights(IC([1, 0, 1]), IC([1, 0, 1]))
    assert sol.fallback and sol.w_i == 0.5 and np.isnan(sol.lagrange_multiplier)


def test_weights_dimension_error():
    with pytest.raises(DimensionError):
        solve_primex_weights(IC([1]), IC([1, 0]))


def test_pairwise_fuse_identical_codes_returns_local():
    local = (scalar(0, 1), IC([1, 1]))
    assert primex_pairwise_fuse(local, (scalar(5, 2), IC([1, 1]))) is local


def test_pairwise_fuse_subset_is_noop():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((3, 3))
    local = GaussianBelief.from_moments([1.0, 2.0, 3.0], a @ a.T + np.eye(3))
    received = GaussianBelief.from_moments([-4.0, 0.0, 9.0], 5 * np.eye(3))
    fused, ic = primex_pairwise_fuse((local, IC([1, 1, 0, 1])), (received, IC([1, 0, 0, 1])))
    assert ic == IC([1, 1, 0, 1])
    assert np.max(np.abs(fused.mean - local.mean)) < 1e-9
    assert np.max(np.abs(fused.covariance - local.covariance)) < 1e-9


def test_pairwise_fuse_symmetric_scalar_case():
    fused, ic = primex_pairwise_fuse((scalar(0, 1), IC([1, 1, 0])), (scalar(2, 1), IC([1, 0, 1])))
    assert ic == IC([1, 1, 1])
    assert fused.mean[0] == pytest.approx(1.0) and fused.covariance[0, 0] == pytest.approx(1.0)


def test_pairwise_fuse_records_stats_and_disjoint_flag():
    stats = FusionStats()
    a, b = (scalar(0, 1), IC([1, 0])), (scalar(2, 1), IC([0, 1]))
    fused, _ = primex_pairwise_fuse(a, b, stats=stats)
    assert fused.covariance[0, 0] == pytest.approx(1.0)
    exact, _ = primex_pairwise_fuse(a, b, exact_product_when_disjoint=True, stats=stats)
    assert exact.covariance[0, 0] == pytest.approx(0.5) and exact.mean[0] == pytest.approx(1.0)
    assert stats.fusions == 2 and stats.disjoint == 1 and stats.clamped == 0


def test_pairwise_fuse_stays_positive_definite():
    rng = np.random.default_rng(9)
    for _ in range(50):
        n = 4
        covs = [(lambda m: m @ m.T + 0.1 * np.eye(n))(rng.standard_normal((n, n))) for _ in range(2)]
        bits = [rng.integers(0, 2, 20) for _ in range(2)]
        fused, _ = primex_pairwise_fuse(
            (GaussianBelief.from_moments(np.zeros(n), covs[0]), IC(bits[0])),
            (GaussianBelief.from_moments(np.ones(n), covs[1]), IC(bits[1])),
        )
        assert np.linalg.eigvalsh(fused.covariance).min() > 0


def test_golden_section_and_tie_rule():
    w = golden_section(lambda x: (x - 0.3) ** 2)
    assert abs(w - 0.3) < 1e-4
    assert select_weight([0.49, 0.0, 0.5, 1.0], [1.0, 2.0, 1.0, 3.0]) == 0.5
    assert select_weight([0.2, 0.0, 0.5, 1.0], [0.5, 2.0, 1.0, 3.0]) == 0.2


def test_ci_optimal_examples():
    a, b = scalar(0, 1), scalar(3, 4)
    assert ci_optimal_weight(a, b) == 1.0
    fused = ci_pairwise_optimal(a, b)
    assert fused.mean[0] == pytest.approx(0.0) and fused.covariance[0, 0] == pytest.approx(1.0)
    w_grid, _ = ci_trace_grid(np.array([[1.0]]), np.array([[4.0]]))
    assert w_grid == 1.0

    same = ci_pairwise_optimal(a, a)
    assert same.mean[0] == pytest.approx(0.0) and same.covariance[0, 0] == pytest.approx(1.0)

    pa = GaussianBelief.from_moments([0.0, 0.0], np.diag([1.0, 100.0]))
    pb = GaussianBelief.from_moments([0.0, 0.0], np.diag([100.0, 1.0]))
    assert ci_optimal_weight(pa, pb) == 0.5


def test_ci_optimal_beats_endpoints_and_grid():
    rng = np.random.default_rng(5)
    for _ in range(30):
        m = [rng.standard_normal((3, 3)) for _ in range(2)]
        ca, cb = (x @ x.T + 0.5 * np.eye(3) for x in m)
        a, b = GaussianBelief.from_moments(np.zeros(3), ca), GaussianBelief.from_moments(np.zeros(3), cb)
        tr = trace_cov(ci_pairwise_optimal(a, b))
        endpoints = [trace_cov(ci_pairwise_optimal_fixed(a, b, w)) for w in (0.0, 0.5, 1.0)]
        assert tr <= min(endpoints) + 1e-8
        _, tr_grid = ci_trace_grid(ca, cb)
        assert tr <= tr_grid * (1 + 1e-6)


def ci_pairwise_optimal_fixed(a, b, w):
    return GaussianBelief.from_information(
        w * a.info_matrix + (1 - w) * b.info_matrix, w * a.info_vector + (1 - w) * b.info_vector
    )


def test_ci_dimension_error():
    with pytest.raises(DimensionError):
        ci_optimal_weight(scalar(0, 1), GaussianBelief.from_moments([0.0, 0.0], np.eye(2)))


def test_ci_uniform_examples():
    a = scalar(0, 1)
    assert ci_uniform_fuse(a, []) is a
    fused = ci_uniform_fuse(a, [scalar(2, 1)])
    assert fused.mean[0] == pytest.approx(1.0) and fused.covariance[0, 0] == pytest.approx(1.0)
    b = scalar(3, 2)
    fused = ci_uniform_fuse(b, [b, b])
    assert fused.mean[0] == pytest.approx(3.0) and fused.covariance[0, 0] == pytest.approx(2.0)


def test_centralized_examples(prior, motion, sensor):
    pure = centralized_step(prior, [], motion)
    ref = predict(prior, motion)
    assert np.allclose(pure.mean, ref.mean) and np.allclose(pure.covariance, ref.covariance)

    z = np.array([4.0, -3.0])
    one = centralized_step(prior, [(z, sensor)], motion)
    ref = update(predict(prior, motion), z, sensor)
    assert np.allclose(one.mean, ref.mean, atol=1e-12) and np.allclose(one.covariance, ref.covariance)

    nine = centralized_step(prior, [(z, sensor)] * 9, motion)
    pooled_sensor = SensorModel(sensor.H, sensor.R / 9)
    ref = update(predict(prior, motion), z, pooled_sensor)
    assert np.allclose(nine.mean, ref.mean, atol=1e-9) and np.allclose(nine.covariance, ref.covariance, atol=1e-9)

    seq = predict(prior, motion)
    for _ in range(9):
        seq = update(seq, z, sensor)
    assert np.allclose(nine.mean, seq.mean, atol=1e-9)


def test_centralized_order_invariance(prior, motion, sensor):
    rng = np.random.default_rng(2)
    zs = [(rng.normal(0, 10, 2), sensor) for _ in range(9)]
    fwd = centralized_step(prior, zs, motion)
    rev = centralized_step(prior, zs[::-1], motion)
    assert np.max(np.abs(fwd.mean - rev.mean)) < 1e-9
    assert np.max(np.abs(fwd.covariance - rev.covariance)) < 1e-9


def test_centralized_skips_prediction_without_motion(prior, sensor):
    z = np.zeros(2)
    step = centralized_step(prior, [(z, sensor)], None)
    ref = update(prior, z, sensor)
    assert np.allclose(step.mean, ref.mean) and np.allclose(step.covariance, ref.covariance)
