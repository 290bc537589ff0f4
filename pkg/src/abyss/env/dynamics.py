"""Translational AUV dynamics under current, drag, and hybrid control.

The hybrid action pairs a maneuver class with a continuous refinement
vector c = [accel, yaw_rate, pitch_rate, brake] in (-1, 1)^4:

    ACCELERATE  thrust |c0| * f_max along the heading
    YAW         yaw rate c1 * yaw_rate_max, no thrust
    TURN        yaw rate c1 and pitch rate c2, no thrust
    BRAKE       force -c3 * brake_max along the velocity direction

Attitude is kinematic; forces integrate with semi-implicit Euler.
Brake and drag impulses are capped so that, in still water, they can
slow the vehicle to a stop but never reverse it within a step.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..config import DynamicsConfig, WorkspaceConfig
from .currents import CurrentField


class Maneuver(IntEnum):
    ACCELERATE = 0
    YAW = 1
    TURN = 2
    BRAKE = 3


N_MANEUVERS = len(Maneuver)


@dataclass
class HybridAction:
    d: int                 # Maneuver id
    c: np.ndarray          # (4,) in (-1, 1)


@dataclass
class AuvState:
    p: np.ndarray          # position, m
    v: np.ndarray          # velocity, m/s
    yaw: float             # rad
    pitch: float           # rad
    inertia: np.ndarray    # (3, 3), symmetric positive definite

    def copy(self) -> "AuvState":
        return AuvState(self.p.copy(), self.v.copy(), self.yaw, self.pitch, self.inertia)

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v))


class NumericError(RuntimeError):
    pass


def heading_unit(yaw: float, pitch: float) -> np.ndarray:
    cp = np.cos(pitch)
    return np.array([cp * np.cos(yaw), cp * np.sin(yaw), np.sin(pitch)])


def body_rotation(yaw: float, pitch: float) -> np.ndarray:
    """World-from-body rotation whose body x-axis is the heading."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, -sp], [0.0, 1.0, 0.0], [sp, 0.0, cp]])
    return rz @ ry


def wrap_angle(a: float) -> float:
    return float(np.arctan2(np.sin(a), np.cos(a)))


def attitude_rates(action: HybridAction, cfg: DynamicsConfig):
    c = np.clip(np.asarray(action.c, dtype=np.float64), -1.0, 1.0)
    d = Maneuver(action.d)
    if d == Maneuver.YAW:
        return c[1] * cfg.yaw_rate_max, 0.0
    if d == Maneuver.TURN:
        return c[1] * cfg.yaw_rate_max, c[2] * cfg.pitch_rate_max
    return 0.0, 0.0


def step_dynamics(auv: AuvState, action: HybridAction, field: CurrentField,
                  cfg: DynamicsConfig, workspace: WorkspaceConfig,
                  disturbance: np.ndarray | None = None):
    """One dt of motion. Returns (new_state, boundary_hit)."""
    c = np.clip(np.asarray(action.c, dtype=np.float64), -1.0, 1.0)
    d = Maneuver(action.d)
    mass = float(auv.inertia[0, 0])

    yaw_rate, pitch_rate = attitude_rates(action, cfg)
    yaw = wrap_angle(auv.yaw + cfg.dt * yaw_rate)
    pitch = float(np.clip(auv.pitch + cfg.dt * pitch_rate, -cfg.pitch_limit, cfg.pitch_limit))

    # hydrodynamic drag opposes the water-relative velocity
    v_r = field.relative_velocity(auv.v, auv.p)
    rel_speed = float(np.linalg.norm(v_r))
    f_h = np.zeros(3)
    if rel_speed > 1e-9:
        drag = min(cfg.drag_coeff * rel_speed ** 2, mass * rel_speed / cfg.dt)
        f_h = -drag * v_r / rel_speed

    f_u = np.zeros(3)
    if d == Maneuver.ACCELERATE:
        f_u = abs(c[0]) * cfg.f_max * heading_unit(auv.yaw, auv.pitch)
    elif d == Maneuver.BRAKE:
        speed = auv.speed
        if speed > 1e-9:
            v_unit = auv.v / speed
            drag_along_v = max(0.0, -float(f_h @ v_unit))
            budget = max(0.0, mass * speed / cfg.dt - drag_along_v)
            f_u = -min(c[3] * cfg.brake_max, budget) * v_unit

    f_d = disturbance if disturbance is not None else np.zeros(3)
    accel = np.linalg.solve(auv.inertia, f_u + f_h + f_d)
    v = auv.v + cfg.dt * accel
    speed = float(np.linalg.norm(v))
    if speed > cfg.v_max:
        v = v * (cfg.v_max / speed)

    p = auv.p + cfg.dt * v
    extents = np.asarray(workspace.extents, dtype=np.float64)
    clipped = np.clip(p, 0.0, extents)
    boundary_hit = bool(np.any(clipped != p))
    if boundary_hit:
        # kill the velocity component driving into the wall
        v = np.where(clipped != p, 0.0, v)
        p = clipped

    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
        raise NumericError(f"non-finite AUV state after action {action.d} at p={auv.p}, v={auv.v}")
    return AuvState(p, v, yaw, pitch, auv.inertia), boundary_hit
