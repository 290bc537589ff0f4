"""Underwater acoustic noise: four concurrent stochastic processes.

Channels, in fixed order: vehicle-induced (Gaussian, speed/traffic
scaled variance), biological (symmetric alpha-stable impulses),
geological (colored Gaussian with power-law spectrum), turbulence
(AR(1) with flow-dependent intensity). Disabled channels emit 0.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import least_squares

from ..config import (
    NOISE_CHANNELS as CHANNELS,
    BioNoiseParams,
    GeoNoiseParams,
    NoiseParams,
    TurbNoiseParams,
    VehicleNoiseParams,
)


class NoiseConfigError(ValueError):
    pass


def vehicle_noise_variance(p: VehicleNoiseParams, v_s: float, rho_n: float) -> float:
    """Variance scaling law around the reference operating point."""
    return p.sigma0 ** 2 * (v_s / p.v0) ** p.alpha_v * (rho_n / p.rho0) ** p.alpha_rho


def sample_sas(alpha: float, gamma: float, rng: np.random.Generator, size=None):
    """Chambers-Mallows-Stuck draw from SaS(alpha, gamma, 0).

    At alpha = 2 this reduces to N(0, 2 gamma^2).
    """
    if not (1.0 < alpha <= 2.0):
        raise NoiseConfigError(f"stable exponent alpha must lie in (1, 2], got {alpha}")
    u = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=size)
    w = rng.exponential(1.0, size=size)
    x = (np.sin(alpha * u) / np.cos(u) ** (1.0 / alpha)
         * (np.cos(u - alpha * u) / w) ** ((1.0 - alpha) / alpha))
    return gamma * x


def design_power_law_filter(beta: float, w_lo=0.01 * np.pi, w_hi=0.5 * np.pi):
    """Fit a biquad whose squared magnitude tracks w^(-beta) on [w_lo, w_hi].

    Returns (b, a) coefficients for a direct-form IIR of order 2. The
    fit runs offline, is deterministic, and parameterizes poles/zeros
    through tanh to stay inside the unit circle.
    """
    grid = np.geomspace(w_lo, w_hi, 96)
    target = -0.5 * beta * np.log(grid)
    e = np.exp(-1j * grid)

    def log_mag(u):
        g = u[0]
        z1, z2, p1, p2 = np.tanh(u[1:5])
        h = (1.0 - z1 * e) * (1.0 - z2 * e) / ((1.0 - p1 * e) * (1.0 - p2 * e))
        return g + np.log(np.abs(h))

    sol = least_squares(lambda u: log_mag(u) - target,
                        x0=[0.0, np.arctanh(0.9), np.arctanh(0.2),
                            np.arctanh(0.997), np.arctanh(0.94)],
                        method="lm")
    g = np.exp(sol.x[0])
    z1, z2, p1, p2 = np.tanh(sol.x[1:5])
    b = g * np.array([1.0, -(z1 + z2), z1 * z2])
    a = np.array([1.0, -(p1 + p2), p1 * p2])
    return b, a


class GeoNoise:
    """White Gaussian excitation through the power-law shaping filter."""

    def __init__(self, params: GeoNoiseParams):
        self.params = params
        self.b, self.a = design_power_law_filter(params.beta)
        self.zi = np.zeros(2)  # direct-form II transposed state

    def sample(self, rng, size=None):
        w = rng.normal(0.0, 1.0, size=size)
        scalar = np.isscalar(w) or w.ndim == 0
        w = np.atleast_1d(w)
        out = np.empty_like(w)
        b, a, z = self.b, self.a, self.zi
        for i, x in enumerate(w):
            y = b[0] * x + z[0]
            z[0] = b[1] * x - a[1] * y + z[1]
            z[1] = b[2] * x - a[2] * y
            out[i] = y
        return out[0] if scalar else out


class TurbNoise:
    """AR(1) recursion with flow-speed-dependent innovation scale."""

    def __init__(self, params: TurbNoiseParams):
        if not abs(params.rho) < 1.0:
            raise NoiseConfigError(f"turbulence correlation must satisfy |rho| < 1, got {params.rho}")
        self.params = params
        self.last = 0.0

    def intensity(self, u_turb: float) -> float:
        p = self.params
        return p.sigma0 * (u_turb / p.u0) ** p.alpha_u

    def sample(self, u_turb: float, rng) -> float:
        p = self.params
        self.last = p.rho * self.last + self.intensity(u_turb) * rng.normal()
        return self.last


class NoiseProcesses:
    """Stateful sampler assembling n(t) = [veh, bio, geo, turb]."""

    def __init__(self, params: NoiseParams):
        unknown = set(params.channels) - set(CHANNELS)
        if unknown:
            raise NoiseConfigError(f"unknown noise channels: {sorted(unknown)}")
        if not (1.0 < params.bio.alpha <= 2.0):
            raise NoiseConfigError(f"stable exponent alpha must lie in (1, 2], got {params.bio.alpha}")
        self.params = params
        self.enabled = tuple(ch for ch in CHANNELS if ch in params.channels)
        self.geo = GeoNoise(params.geo) if "geo" in self.enabled else None
        self.turb = TurbNoise(params.turb) if "turb" in self.enabled else None

    def reset(self):
        if self.geo is not None:
            self.geo.zi[:] = 0.0
        if self.turb is not None:
            self.turb.last = 0.0

    def sample(self, v_s: float, rho_n: float, u_turb: float, rng) -> np.ndarray:
        """Advance every enabled channel one step; disabled channels stay 0."""
        n = np.zeros(4)
        if "veh" in self.enabled:
            n[0] = rng.normal(0.0, np.sqrt(vehicle_noise_variance(self.params.veh, v_s, rho_n)))
        if "bio" in self.enabled:
            n[1] = sample_sas(self.params.bio.alpha, self.params.bio.gamma, rng)
        if "geo" in self.enabled:
            n[2] = self.geo.sample(rng)
        if "turb" in self.enabled:
            n[3] = self.turb.sample(u_turb, rng)
        return n
