"""Ocean current field: Gaussian radial basis functions with drifting weights.

The velocity at a point is linear in the weight vector: stacking the L
basis responses as ``Phi(r) = [phi_1(r) I3, ..., phi_L(r) I3]`` (3 x 3L)
gives ``v_c(r, t) = Phi(r) @ theta(t)``. Weights follow a mean-reverting
random walk so the field changes slowly over an episode.
"""

from __future__ import annotations

import numpy as np


class CurrentField:
    def __init__(self, centers: np.ndarray, scales: np.ndarray,
                 reversion_rate: float = 0.01, drift_sigma: float = 0.02):
        centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        scales = np.asarray(scales, dtype=np.float64)
        if np.any(scales <= 0):
            raise ValueError("basis scales must be positive")
        if centers.shape[0] != scales.shape[0]:
            raise ValueError("one scale per center required")
        self.centers = centers
        self.scales = scales
        self.reversion_rate = float(reversion_rate)
        self.drift_sigma = float(drift_sigma)
        self.theta = np.zeros(3 * self.n_basis)

    @property
    def n_basis(self) -> int:
        return self.centers.shape[0]

    @classmethod
    def jittered_grid(cls, extents, n_basis=8, length_scale=None,
                      reversion_rate=0.01, drift_sigma=0.02, rng=None):
        """Place centers on a jittered grid spanning the workspace box."""
        rng = rng or np.random.default_rng(0)
        extents = np.asarray(extents, dtype=np.float64)
        per_axis = max(1, int(round(n_basis ** (1.0 / 3.0))))
        axes = [np.linspace(0.25, 0.75, per_axis) * e for e in extents]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        if grid.shape[0] < n_basis:
            extra = rng.uniform(0.2, 0.8, size=(n_basis - grid.shape[0], 3)) * extents
            grid = np.vstack([grid, extra])
        grid = grid[:n_basis]
        grid = grid + rng.normal(0.0, 0.05, size=grid.shape) * extents
        scale = length_scale if length_scale is not None else float(np.min(extents)) / 2.0
        field = cls(grid, np.full(n_basis, scale), reversion_rate, drift_sigma)
        field.theta = field.stationary_theta(rng)
        return field

    def stationary_theta(self, rng) -> np.ndarray:
        """Draw weights from the stationary law of the drift recursion."""
        k, s = self.reversion_rate, self.drift_sigma
        if k <= 0 or s <= 0:
            return np.zeros(3 * self.n_basis)
        stat_std = s / np.sqrt(1.0 - (1.0 - k) ** 2)
        return rng.normal(0.0, stat_std, size=3 * self.n_basis)

    def basis(self, r) -> np.ndarray:
        """phi_l(r) = exp(-|r - mu_l|^2 / (2 lambda_l^2)) for each center."""
        r = np.asarray(r, dtype=np.float64)
        d2 = np.sum((self.centers - r) ** 2, axis=1)
        return np.exp(-d2 / (2.0 * self.scales ** 2))

    def regression_matrix(self, r) -> np.ndarray:
        """Phi(r), shape (3, 3L)."""
        phi = self.basis(r)
        return np.concatenate([p * np.eye(3) for p in phi], axis=1)

    def velocity(self, r, theta=None) -> np.ndarray:
        """Current velocity at r; exactly linear in theta."""
        theta = self.theta if theta is None else np.asarray(theta, dtype=np.float64)
        phi = self.basis(r)
        return theta.reshape(self.n_basis, 3).T @ phi

    def relative_velocity(self, v_auv, r) -> np.ndarray:
        return np.asarray(v_auv, dtype=np.float64) - self.velocity(r)

    def step_weights(self, rng):
        """One mean-reverting drift step of theta."""
        self.theta = (1.0 - self.reversion_rate) * self.theta \
            + rng.normal(0.0, self.drift_sigma, size=self.theta.shape)
