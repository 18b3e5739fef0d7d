import numpy as np
import pytest

from primex_track.belief import (
    GaussianBelief,
    MotionModel,
    SensorModel,
    geometric_pool,
    predict,
    trace_cov,
    update,
)
from primex_track.errors import DimensionError, FusionError, ModelError
from primex_track.oracles import pool_quadrature_1d


def scalar(mean, var):
    return GaussianBelief.from_moments([mean], [[var]])


def kalman_update(mean, cov, z, H, R):
    S = H @ cov @ H.T + R
    K = cov @ H.T @ np.linalg.inv(S)
    return mean + K @ (z - H @ mean), (np.eye(len(mean)) - K @ H) @ cov


def test_moment_information_round_trip():
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    b = GaussianBelief.from_moments([1.0, -2.0], cov)
    again = GaussianBelief.from_information(b.info_matrix, b.info_vector)
    assert np.allclose(again.mean, [1.0, -2.0]) and np.allclose(again.covariance, cov)
    with pytest.raises(DimensionError):
        GaussianBelief.from_moments([0.0, 0.0], np.eye(3))
    with pytest.raises(FusionError):
        GaussianBelief.from_moments([0.0], [[-1.0]])


def test_constant_velocity_matrices(motion):
    T = 1.0
    assert np.array_equal(motion.F, [[1, 0, T, 0], [0, 1, 0, T], [0, 0, 1, 0], [0, 0, 0, 1]])
    expected_q = 25 * np.array(
        [[1 / 3, 0, 1 / 2, 0], [0, 1 / 3, 0, 1 / 2], [1 / 2, 0, 1, 0], [0, 1 / 2, 0, 1]]
    )
    assert np.allclose(motion.Q, expected_q, rtol=0, atol=1e-12)


def test_predict_examples(motion):
    b = predict(GaussianBelief.from_moments(np.zeros(4), np.eye(4)), motion)
    assert np.allclose(b.mean, 0)
    assert np.allclose(b.covariance, motion.F @ motion.F.T + motion.Q)

    ident = MotionModel(np.eye(3), np.zeros((3, 3)))
    b0 = GaussianBelief.from_moments([1.0, 2.0, 3.0], np.diag([1.0, 2.0, 3.0]))
    b1 = predict(b0, ident)
    assert np.allclose(b1.mean, b0.mean) and np.allclose(b1.covariance, b0.covariance)

    s = predict(scalar(1.0, 1.0), MotionModel(np.array([[2.0]]), np.array([[1.0]])))
    assert s.mean[0] == pytest.approx(2.0) and s.covariance[0, 0] == pytest.approx(5.0)


def test_predict_dimension_mismatch(motion):
    with pytest.raises(DimensionError):
        predict(scalar(0.0, 1.0), motion)


def test_motion_model_rejects_indefinite_q():
    with pytest.raises(ModelError):
        MotionModel(np.eye(2), -np.eye(2))
    with pytest.raises(ModelError):
        MotionModel(np.eye(2), np.eye(3))


def test_update_examples(sensor):
    one = SensorModel(np.array([[1.0]]), np.array([[1.0]]))
    post = update(scalar(0.0, 1.0), [2.0], one)
    assert post.mean[0] == pytest.approx(1.0) and post.covariance[0, 0] == pytest.approx(0.5)

    vague = SensorModel(np.array([[1.0]]), np.array([[1e12]]))
    post = update(scalar(3.0, 2.0), [100.0], vague)
    assert post.mean[0] == pytest.approx(3.0, rel=1e-5) and post.covariance[0, 0] == pytest.approx(2.0, rel=1e-5)

    prior = GaussianBelief.from_moments([1.0, 2.0, 3.0, 4.0], 25 * np.eye(4))
    post = update(prior, sensor.H @ prior.mean, sensor)
    assert np.allclose(post.mean, prior.mean, atol=1e-12)
    assert np.all(np.diag(post.covariance)[:2] < 25) and np.allclose(np.diag(post.covariance)[2:], 25)


def test_update_matches_kalman_form(sensor):
    rng = np.random.default_rng(3)
    a = rng.standard_normal((4, 4))
    cov = a @ a.T + np.eye(4)
    mean = rng.normal(size=4)
    z = rng.normal(size=2) * 10
    post = update(GaussianBelief.from_moments(mean, cov), z, sensor)
    m, c = kalman_update(mean, cov, z, sensor.H, sensor.R)
    assert np.allclose(post.mean, m, rtol=0, atol=1e-9)
    assert np.allclose(post.covariance, c, rtol=0, atol=1e-9)


def test_update_order_invariance(sensor):
    b = GaussianBelief.from_moments([1.0, 2.0, 3.0, 4.0], 9 * np.eye(4))
    z1, z2 = np.array([3.0, -1.0]), np.array([0.5, 7.0])
    ab = update(update(b, z1, sensor), z2, sensor)
    ba = update(update(b, z2, sensor), z1, sensor)
    assert np.max(np.abs(ab.mean - ba.mean)) < 1e-9
    assert np.max(np.abs(ab.covariance - ba.covariance)) < 1e-9


def test_singular_noise_is_rejected():
    with pytest.raises(ModelError):
        SensorModel(np.eye(2), np.zeros((2, 2)))
    with pytest.raises(ModelError):
        SensorModel(np.eye(2), np.eye(3))


def test_pool_examples():
    p = geometric_pool([scalar(0, 1), scalar(2, 1)], [0.5, 0.5])
    assert p.mean[0] == pytest.approx(1.0) and p.covariance[0, 0] == pytest.approx(1.0)
    a = scalar(3, 2)
    assert geometric_pool([a, scalar(0, 1)], [1.0, 0.0]) is a
    p = geometric_pool([scalar(0, 1), scalar(0, 4)], [0.5, 0.5])
    assert p.covariance[0, 0] == pytest.approx(1.6)
    q_mean, q_var = pool_quadrature_1d([0, 0], [1, 4], [0.5, 0.5])
    assert q_var == pytest.approx(1.6, abs=1e-6) and abs(q_mean) < 1e-9


def test_pool_matches_quadrature_on_random_cases():
    rng = np.random.default_rng(7)
    for _ in range(10):
        n = int(rng.integers(2, 4))
        means, var, w = rng.normal(0, 3, n), rng.uniform(0.5, 5, n), rng.dirichlet(np.ones(n))
        p = geometric_pool([scalar(m, v) for m, v in zip(means, var)], w)
        q_mean, q_var = pool_quadrature_1d(means, var, w)
        assert abs(p.mean[0] - q_mean) < 1e-6 and abs(p.covariance[0, 0] - q_var) < 1e-6


def test_pool_of_copies_is_identity():
    b = GaussianBelief.from_moments([1.0, -1.0], [[2.0, 0.5], [0.5, 1.0]])
    p = geometric_pool([b, b], [0.4, 0.6])
    assert np.allclose(p.info_matrix, b.info_matrix, rtol=1e-12, atol=0)
    assert np.allclose(p.mean, b.mean, rtol=1e-12, atol=0)


def test_pool_errors():
    with pytest.raises(FusionError):
        geometric_pool([scalar(0, 1)], [0.0])
    with pytest.raises(FusionError):
        geometric_pool([scalar(0, 1), scalar(0, 1)], [-0.1, 1.1])
    with pytest.raises(DimensionError):
        geometric_pool([scalar(0, 1)], [0.5, 0.5])


def test_trace_cov_examples(prior):
    assert trace_cov(GaussianBelief.from_moments(np.zeros(4), np.eye(4))) == pytest.approx(4)
    assert trace_cov(GaussianBelief.from_moments(np.zeros(3), np.diag([1.0, 2.0, 3.0]))) == pytest.approx(6)
    assert trace_cov(prior) == pytest.approx(100)
