"""Gaussian beliefs in information form, linear-Gaussian prediction and update,
and weighted geometric-mean pooling.

State ordering is ``[px, py, vx, vy]`` so the Kronecker-structured
nearly-constant-velocity matrices apply as written.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import DimensionError, FusionError, ModelError

_validate = False


def set_validation(enabled: bool) -> None:
    """Toggle symmetry/positive-definiteness checks on every produced belief."""
    global _validate
    _validate = enabled


@contextmanager
def validation(enabled: bool = True) -> Iterator[None]:
    previous = _validate
    set_validation(enabled)
    try:
        yield
    finally:
        set_validation(previous)


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def check_spd(m: np.ndarray, what: str = "matrix", rtol: float = 1e-9) -> None:
    scale = max(float(np.max(np.abs(m))), 1e-300)
    if np.max(np.abs(m - m.T)) > rtol * scale:
        raise FusionError(f"{what} is not symmetric")
    if np.linalg.eigvalsh(m).min() <= 0.0:
        raise FusionError(f"{what} is not positive definite")


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    """Gaussian density held as information matrix ``Omega`` and vector ``eta``.

    Moment form (``mean``, ``covariance``) is derived on demand and cached.
    """

    info_matrix: np.ndarray
    info_vector: np.ndarray

    def __post_init__(self) -> None:
        n = self.info_vector.shape[0]
        if self.info_matrix.shape != (n, n):
            raise DimensionError(
                f"information matrix {self.info_matrix.shape} does not match vector length {n}"
            )
        if _validate:
            check_spd(self.info_matrix, "information matrix")

    @classmethod
    def from_moments(cls, mean, covariance) -> "GaussianBelief":
        mean = np.asarray(mean, dtype=float).reshape(-1)
        cov = symmetrize(np.atleast_2d(np.asarray(covariance, dtype=float)))
        if cov.shape != (mean.size, mean.size):
            raise DimensionError(f"covariance {cov.shape} does not match mean length {mean.size}")
        if _validate:
            check_spd(cov, "covariance")
        omega = symmetrize(np.linalg.inv(cov))
        belief = cls(omega, omega @ mean)
        # seed the caches with the exact inputs
        belief.__dict__["covariance"] = cov
        belief.__dict__["mean"] = mean
        return belief

    @classmethod
    def from_information(cls, info_matrix, info_vector) -> "GaussianBelief":
        omega = symmetrize(np.atleast_2d(np.asarray(info_matrix, dtype=float)))
        return cls(omega, np.asarray(info_vector, dtype=float).reshape(-1))

    @property
    def dim(self) -> int:
        return self.info_vector.shape[0]

    @cached_property
    def covariance(self) -> np.ndarray:
        return symmetrize(np.linalg.inv(self.info_matrix))

    @cached_property
    def mean(self) -> np.ndarray:
        return self.covariance @ self.info_vector

    def __repr__(self) -> str:
        return f"GaussianBelief(mean={self.mean!r}, covariance={self.covariance!r})"


@dataclass(frozen=True, eq=False)
class MotionModel:
    """Linear motion ``x' = F x + q`` with ``q ~ N(0, Q)``."""

    F: np.ndarray
    Q: np.ndarray
    T: float = 1.0

    def __post_init__(self) -> None:
        n = self.F.shape[0]
        if self.F.shape != (n, n) or self.Q.shape != (n, n):
            raise ModelError(f"F {self.F.shape} and Q {self.Q.shape} must both be {n}x{n}")
        if not np.allclose(self.Q, self.Q.T, rtol=1e-9, atol=0.0):
            raise ModelError("process noise covariance must be symmetric")
        if n and np.linalg.eigvalsh(self.Q).min() < -1e-12 * max(1.0, np.abs(self.Q).max()):
            raise ModelError("process noise covariance must be positive semidefinite")

    @classmethod
    def constant_velocity(cls, T: float = 1.0, intensity: float = 25.0, dims: int = 2) -> "MotionModel":
        """Nearly-constant-velocity model for ``[positions..., velocities...]``."""
        eye = np.eye(dims)
        F = np.kron(np.array([[1.0, T], [0.0, 1.0]]), eye)
        Q = intensity * np.kron(np.array([[T**3 / 3, T**2 / 2], [T**2 / 2, T]]), eye)
        return cls(F, Q, T)

    @property
    def dim(self) -> int:
        return self.F.shape[0]


@dataclass(frozen=True, eq=False)
class SensorModel:
    """Linear observation ``z = H x + r`` with ``r ~ N(0, R)``."""

    H: np.ndarray
    R: np.ndarray
    R_inv: np.ndarray = field(init=False, repr=False)
    info_gain: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        nz = self.H.shape[0]
        if self.R.shape != (nz, nz):
            raise ModelError(f"R {self.R.shape} does not match H {self.H.shape}")
        try:
            np.linalg.cholesky(self.R)
        except np.linalg.LinAlgError as exc:
            raise ModelError("measurement noise covariance must be positive definite") from exc
        r_inv = symmetrize(np.linalg.inv(self.R))
        object.__setattr__(self, "R_inv", r_inv)
        # H^T R^-1 H, the per-measurement information increment
        object.__setattr__(self, "info_gain", symmetrize(self.H.T @ r_inv @ self.H))

    @classmethod
    def position(cls, variance: float = 100.0, dims: int = 2) -> "SensorModel":
        """Observe positions of a ``[positions..., velocities...]`` state."""
        H = np.hstack([np.eye(dims), np.zeros((dims, dims))])
        return cls(H, variance * np.eye(dims))

    def info_contribution(self, z) -> np.ndarray:
        """``H^T R^-1 z``."""
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size != self.H.shape[0]:
            raise DimensionError(f"measurement has length {z.size}, expected {self.H.shape[0]}")
        return self.H.T @ (self.R_inv @ z)


def predict(b: GaussianBelief, m: MotionModel) -> GaussianBelief:
    """Chapman-Kolmogorov prediction through a linear-Gaussian motion model."""
    if b.dim != m.dim:
        raise DimensionError(f"belief dimension {b.dim} != motion model dimension {m.dim}")
    cov = m.F @ b.covariance @ m.F.T + m.Q
    return GaussianBelief.from_moments(m.F @ b.mean, cov)


def update(b: GaussianBelief, z, s: SensorModel) -> GaussianBelief:
    """Bayes update with one measurement; additive in information form."""
    if s.H.shape[1] != b.dim:
        raise DimensionError(f"sensor state dimension {s.H.shape[1]} != belief dimension {b.dim}")
    return GaussianBelief.from_information(
        b.info_matrix + s.info_gain, b.info_vector + s.info_contribution(z)
    )


def geometric_pool(beliefs: Sequence[GaussianBelief], weights: Sequence[float]) -> GaussianBelief:
    """Normalized weighted geometric mean ``prod p_l ** w_l`` of Gaussians.

    Weights are used as given; a zero weight drops its belief exactly.
    """
    if len(beliefs) != len(weights):
        raise DimensionError(f"{len(beliefs)} beliefs but {len(weights)} weights")
    if any(w < 0 for w in weights):
        raise FusionError("pooling weights must be nonnegative")
    terms = [(b, float(w)) for b, w in zip(beliefs, weights) if w > 0]
    if not terms:
        raise FusionError("at least one pooling weight must be positive")
    if len(terms) == 1 and terms[0][1] == 1.0:
        return terms[0][0]
    omega = sum(w * b.info_matrix for b, w in terms)
    eta = sum(w * b.info_vector for b, w in terms)
    omega = symmetrize(omega)
    try:
        np.linalg.cholesky(omega)
    except np.linalg.LinAlgError as exc:
        raise FusionError("pooled information matrix is not positive definite") from exc
    return GaussianBelief(omega, eta)


def trace_cov(b: GaussianBelief) -> float:
    return float(np.trace(b.covariance))
