"""Fusion rules: pedigree-weighted pairwise fusion, covariance intersection
baselines and the centralized information filter."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .belief import GaussianBelief, MotionModel, SensorModel, geometric_pool, predict, symmetrize
from .errors import DimensionError, FusionError
from .ic_codes import InformationCode, ic_gcd, ic_lcm

KKT_CONDITION_LIMIT = 1e12
GOLDEN_TOLERANCE = 1e-4
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
# smallest count with _INV_PHI**n < GOLDEN_TOLERANCE on the unit interval
GOLDEN_ITERATIONS = math.ceil(math.log(GOLDEN_TOLERANCE) / math.log(_INV_PHI))


@dataclass(frozen=True)
class WeightSolution:
    """Constrained least-squares weights for the shared-information fit.

    ``w_i`` and ``w_j`` are the exponents of the *shared* density; the fused
    density uses ``1 - w_i`` and ``1 - w_j``.
    """

    w_i: float
    w_j: float
    lagrange_multiplier: float
    residual_norm_sq: float
    clamped: bool
    fallback: bool = False

    @property
    def fused_exponents(self) -> tuple[float, float]:
        return 1.0 - self.w_i, 1.0 - self.w_j


@dataclass
class FusionStats:
    """Mutable counters for diagnostics output."""

    fusions: int = 0
    clamped: int = 0
    fallbacks: int = 0
    disjoint: int = 0

    def merge(self, other: "FusionStats") -> None:
        self.fusions += other.fusions
        self.clamped += other.clamped
        self.fallbacks += other.fallbacks
        self.disjoint += other.disjoint


def solve_primex_weights(phi_i: InformationCode, phi_j: InformationCode) -> WeightSolution:
    """Weights ``d = [w_i, w_j]`` minimizing ``||A d - b||^2`` s.t. ``w_i + w_j = 1``.

    ``A = [phi_i phi_j]`` and ``b = min(phi_i, phi_j)``. The bordered KKT
    system is solved directly; an ill-conditioned system falls back to equal
    weights, and a solution outside ``[0, 1]`` is clipped back onto the
    constraint segment.
    """
    if phi_i.length != phi_j.length:
        raise DimensionError(f"information code lengths differ: {phi_i.length} vs {phi_j.length}")
    A = np.column_stack([phi_i.bits, phi_j.bits]).astype(float)
    b = np.minimum(phi_i.bits, phi_j.bits).astype(float)

    kkt = np.zeros((3, 3))
    kkt[:2, :2] = 2.0 * (A.T @ A)
    kkt[:2, 2] = 1.0
    kkt[2, :2] = 1.0
    rhs = np.empty(3)
    rhs[:2] = 2.0 * (A.T @ b)
    rhs[2] = 1.0

    fallback = False
    try:
        kkt_inv = np.linalg.inv(kkt)
        cond = np.linalg.norm(kkt, 1) * np.linalg.norm(kkt_inv, 1)
        fallback = not np.isfinite(cond) or cond > KKT_CONDITION_LIMIT
    except np.linalg.LinAlgError:
        fallback = True

    if fallback:
        w_i, lam, clamped = 0.5, math.nan, False
    else:
        sol = kkt_inv @ rhs
        raw, lam = float(sol[0]), float(sol[2])
        w_i = min(max(raw, 0.0), 1.0)
        clamped = raw < -1e-12 or raw > 1.0 + 1e-12
    w_j = 1.0 - w_i
    resid = A @ np.array([w_i, w_j]) - b
    return WeightSolution(w_i, w_j, lam, float(resid @ resid), clamped, fallback)


def primex_pairwise_fuse(
    local: tuple[GaussianBelief, InformationCode],
    received: tuple[GaussianBelief, InformationCode],
    *,
    exact_product_when_disjoint: bool = False,
    stats: FusionStats | None = None,
) -> tuple[GaussianBelief, InformationCode]:
    """Memoryless fusion of a received (belief, code) pair into the local one."""
    p_i, phi_i = local
    p_j, phi_j = received
    if phi_i.length != phi_j.length:
        raise DimensionError(f"information code lengths differ: {phi_i.length} vs {phi_j.length}")
    if phi_i == phi_j:
        return local

    if exact_product_when_disjoint and ic_gcd(phi_i, phi_j).popcount() == 0:
        fused = geometric_pool([p_i, p_j], [1.0, 1.0])
        if stats is not None:
            stats.fusions += 1
            stats.disjoint += 1
        return fused, ic_lcm(phi_i, phi_j)

    sol = solve_primex_weights(phi_i, phi_j)
    fused = geometric_pool([p_i, p_j], list(sol.fused_exponents))
    if stats is not None:
        stats.fusions += 1
        stats.clamped += sol.clamped
        stats.fallbacks += sol.fallback
    return fused, ic_lcm(phi_i, phi_j)


def _trace_objective(omega_a: np.ndarray, omega_b: np.ndarray):
    def f(w: float) -> float:
        return float(np.trace(np.linalg.inv(w * omega_a + (1.0 - w) * omega_b)))

    return f


def golden_section(f, lo: float = 0.0, hi: float = 1.0, iterations: int = GOLDEN_ITERATIONS) -> float:
    """Minimize a unimodal scalar function; returns the final bracket midpoint."""
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(iterations):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)


def select_weight(candidates: Sequence[float], values: Sequence[float]) -> float:
    """Pick the minimizing candidate, preferring 0.5 on (near) ties.

    ``candidates`` must contain 0.5.
    """
    best = min(range(len(values)), key=values.__getitem__)
    vmin = values[best]
    half = candidates.index(0.5)
    if values[half] <= vmin + 1e-12 * abs(vmin):
        return 0.5
    return candidates[best]


def ci_optimal_weight(a: GaussianBelief, b: GaussianBelief) -> float:
    """Weight on ``a`` minimizing the trace of the CI-fused covariance."""
    if a.dim != b.dim:
        raise DimensionError(f"belief dimensions differ: {a.dim} vs {b.dim}")
    f = _trace_objective(a.info_matrix, b.info_matrix)
    candidates = [golden_section(f), 0.0, 0.5, 1.0]
    return select_weight(candidates, [f(w) for w in candidates])


def ci_pairwise_optimal(a: GaussianBelief, b: GaussianBelief) -> GaussianBelief:
    """Covariance intersection with the trace-minimizing weight."""
    w = ci_optimal_weight(a, b)
    return geometric_pool([a, b], [w, 1.0 - w])


def ci_uniform_fuse(own: GaussianBelief, received: Sequence[GaussianBelief]) -> GaussianBelief:
    """Covariance intersection of ``own`` and all ``received`` with equal weights."""
    if not received:
        return own
    n = len(received) + 1
    return geometric_pool([own, *received], [1.0 / n] * n)


def centralized_step(
    global_belief: GaussianBelief,
    measurements: Sequence[tuple[np.ndarray, SensorModel]],
    m: MotionModel | None,
) -> GaussianBelief:
    """One information-filter cycle over every sensor's measurement.

    ``m=None`` skips prediction (used when the belief already is the
    predicted density for this step).
    """
    b = predict(global_belief, m) if m is not None else global_belief
    if not measurements:
        return b
    omega = b.info_matrix.copy()
    eta = b.info_vector.copy()
    for z, s in measurements:
        omega = omega + s.info_gain
        eta = eta + s.info_contribution(z)
    omega = symmetrize(omega)
    try:
        np.linalg.cholesky(omega)
    except np.linalg.LinAlgError as exc:
        raise FusionError("centralized information matrix is not positive definite") from exc
    return GaussianBelief(omega, eta)
