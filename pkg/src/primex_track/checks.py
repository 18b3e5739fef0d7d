"""Randomized comparisons of the library against the independent oracles.

Each check draws its cases from a fixed seed and reports the worst
discrepancy it saw. The CLI ``oracle`` command prints these results and the
acceptance tests assert on them.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import oracles
from .belief import GaussianBelief, MotionModel, SensorModel, geometric_pool, trace_cov, update
from .fusion import ci_optimal_weight, centralized_step, primex_pairwise_fuse, solve_primex_weights
from .ic_codes import InformationCode, ic_lcm, ic_multi_fuse_alternating


@dataclass(frozen=True)
class CheckResult:
    name: str
    cases: int
    metrics: dict[str, float]
    seconds: float

    def lines(self) -> list[str]:
        head = f"{self.name}: {self.cases} cases in {self.seconds:.3f}s"
        return [head] + [f"  {k} = {v:.6g}" for k, v in self.metrics.items()]


def _random_code(rng: np.random.Generator, length: int) -> InformationCode:
    return InformationCode(rng.integers(0, 2, size=length))


def _random_spd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((n, n))
    return scale * (a @ a.T + n * np.eye(n))


def check_ic_algebra(cases: int = 1000, seed: int = 0) -> CheckResult:
    """Alternating multi-code product against folded LCM and the binomial count."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    lcm_mismatch = binom_mismatch = 0
    for _ in range(cases):
        n = int(rng.integers(1, 6))
        length = int(rng.integers(1, 65))
        codes = [_random_code(rng, length) for _ in range(n)]
        fused = ic_multi_fuse_alternating(codes)
        lcm_mismatch += fused != reduce(ic_lcm, codes)
        binom_mismatch += fused.tolist() != oracles.alternating_fuse_binomial([c.tolist() for c in codes])
    return CheckResult(
        "ic",
        cases,
        {"lcm_mismatches": lcm_mismatch, "binomial_mismatches": binom_mismatch},
        time.perf_counter() - start,
    )


def check_weights(cases: int = 500, seed: int = 0, step: float = 1e-4) -> CheckResult:
    """Least-squares weights against a grid search over ``w_i``."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    max_dw = max_gap = max_sum = 0.0
    for _ in range(cases):
        length = int(rng.integers(1, 65))
        a, b = _random_code(rng, length), _random_code(rng, length)
        sol = solve_primex_weights(a, b)
        w_grid, j_grid = oracles.grid_search_weights(a.tolist(), b.tolist(), step)
        j_sol = float(oracles.ls_objective(a.tolist(), b.tolist(), sol.w_i)[0])
        if a != b:
            # identical codes give a flat objective with no unique minimizer
            max_dw = max(max_dw, abs(sol.w_i - w_grid))
        max_gap = max(max_gap, j_sol - j_grid)
        max_sum = max(max_sum, abs(sol.w_i + sol.w_j - 1.0))
    return CheckResult(
        "weights",
        cases,
        {"max_weight_error": max_dw, "max_objective_gap": max_gap, "max_constraint_error": max_sum},
        time.perf_counter() - start,
    )


def check_pool(cases: int = 20, seed: int = 0) -> CheckResult:
    """Scalar geometric pooling against numerical quadrature of the pooled density."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    max_mean = max_var = 0.0
    for _ in range(cases):
        n = int(rng.integers(2, 5))
        means = rng.normal(0.0, 5.0, n)
        variances = rng.uniform(0.5, 10.0, n)
        weights = rng.dirichlet(np.ones(n))
        beliefs = [GaussianBelief.from_moments([m], [[v]]) for m, v in zip(means, variances)]
        pooled = geometric_pool(beliefs, weights)
        q_mean, q_var = oracles.pool_quadrature_1d(means, variances, weights)
        max_mean = max(max_mean, abs(pooled.mean[0] - q_mean))
        max_var = max(max_var, abs(pooled.covariance[0, 0] - q_var) / q_var)
    return CheckResult(
        "pool",
        cases,
        {"max_mean_error": max_mean, "max_relative_variance_error": max_var},
        time.perf_counter() - start,
    )


def check_ci(cases: int = 50, seed: int = 0) -> CheckResult:
    """Golden-section CI weight against a grid over the fused-covariance trace."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    max_gap = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 5))
        ca = _random_spd(rng, n, rng.uniform(0.1, 10.0))
        cb = _random_spd(rng, n, rng.uniform(0.1, 10.0))
        a = GaussianBelief.from_moments(np.zeros(n), ca)
        b = GaussianBelief.from_moments(np.zeros(n), cb)
        w = ci_optimal_weight(a, b)
        tr = trace_cov(geometric_pool([a, b], [w, 1.0 - w]))
        _, tr_grid = oracles.ci_trace_grid(ca, cb)
        max_gap = max(max_gap, (tr - tr_grid) / tr_grid)
    return CheckResult("ci", cases, {"max_relative_trace_excess": max_gap}, time.perf_counter() - start)


def check_centralized(steps: int = 50, sensors: int = 9, seed: int = 0) -> CheckResult:
    """Recursive centralized filter against the joint-trajectory solve, and update order.

    Errors are absolute.
    """
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    motion = MotionModel.constant_velocity()
    sensor = SensorModel.position()
    prior_mean = np.array([0.0, 0.0, 100.0, 100.0])
    prior_cov = 25.0 * np.eye(4)
    x = prior_mean + rng.multivariate_normal(np.zeros(4), prior_cov)
    z = np.empty((steps, sensors, 2))
    for k in range(steps):
        z[k] = x[:2] + rng.normal(0.0, 10.0, (sensors, 2))
        x = motion.F @ x + rng.multivariate_normal(np.zeros(4), motion.Q)
    reference = oracles.batch_filter(prior_mean, prior_cov, motion.F, motion.Q, sensor.H, sensor.R, z)

    belief = GaussianBelief.from_moments(prior_mean, prior_cov)
    max_mean = max_cov = 0.0
    for k in range(steps):
        belief = centralized_step(belief, [(zz, sensor) for zz in z[k]], motion if k > 0 else None)
        mean, cov = reference[k]
        max_mean = max(max_mean, float(np.max(np.abs(belief.mean - mean))))
        max_cov = max(max_cov, float(np.max(np.abs(belief.covariance - cov))))

    max_order = 0.0
    for _ in range(20):
        b0 = GaussianBelief.from_moments(rng.normal(0, 10, 4), _random_spd(rng, 4))
        zs = rng.normal(0, 10, (5, 2))
        fwd = reduce(lambda b, zz: update(b, zz, sensor), zs, b0)
        rev = reduce(lambda b, zz: update(b, zz, sensor), zs[rng.permutation(5)], b0)
        max_order = max(max_order, float(np.max(np.abs(fwd.mean - rev.mean))))
        max_order = max(max_order, float(np.max(np.abs(fwd.covariance - rev.covariance))))
    return CheckResult(
        "centralized",
        steps,
        {"max_mean_error": max_mean, "max_cov_error": max_cov, "max_order_difference": max_order},
        time.perf_counter() - start,
    )


def check_subset(cases: int = 200, seed: int = 0) -> CheckResult:
    """Fusing a received code that is a subset of the local one must leave the belief unchanged."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    max_change = 0.0
    for _ in range(cases):
        length = int(rng.integers(1, 65))
        local_bits = rng.integers(0, 2, length)
        local_bits[rng.integers(length)] = 1
        received_bits = local_bits * rng.integers(0, 2, length)
        n = 4
        local = GaussianBelief.from_moments(rng.normal(0, 10, n), _random_spd(rng, n))
        received = GaussianBelief.from_moments(rng.normal(0, 10, n), _random_spd(rng, n))
        fused, _ = primex_pairwise_fuse(
            (local, InformationCode(local_bits)), (received, InformationCode(received_bits))
        )
        change = max(
            float(np.max(np.abs(fused.mean - local.mean))),
            float(np.max(np.abs(fused.covariance - local.covariance))),
        )
        max_change = max(max_change, change)
    return CheckResult("subset", cases, {"max_change": max_change}, time.perf_counter() - start)


SUITES = {
    "ic": check_ic_algebra,
    "weights": check_weights,
    "pool": check_pool,
    "ci": check_ci,
    "centralized": check_centralized,
    "subset": check_subset,
}
