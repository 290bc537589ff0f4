"""Episode world: spawn, physics stepping, observation, reward.

Observation layout (all components min-max normalized into [0, 1];
exact ranges are documented next to each block):

    sp    AUV position / extent (3)
          per target: body-frame offset /diag (3), distance /diag (1),
          capture indicator held at 1 once captured (1)
    mot   velocity / v_max (3), (sin,cos) of yaw and pitch (4),
          t / T_max (1)
    bar   local current velocity clipped at the documented reference
          speed (3); per obstacle: body-frame offset /diag (3),
          surface distance /diag (1)
    noise the four noise channels squashed through tanh at 3x their
          reference scales (4)

Body-frame offsets use the rotation whose x-axis is the AUV heading,
so bearing errors appear directly in the observation.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from ..config import EnvConfig, RunConfig
from .currents import CurrentField
from .dynamics import AuvState, HybridAction, NumericError, body_rotation, step_dynamics, wrap_angle
from .noise import NoiseProcesses, vehicle_noise_variance

RUNNING, SUCCESS, TIMEOUT = "running", "success", "timeout"


class SpawnError(RuntimeError):
    """No collision-free placement found within the retry budget."""


@dataclass
class TargetState:
    p: np.ndarray
    heading: float      # horizontal random-walk direction, rad
    vz_phase: float     # slow vertical wander phase
    captured: bool = False


@dataclass
class Obstacle:
    p: np.ndarray
    radius: float


@dataclass
class SegmentMap:
    """Index ranges of the four semantic blocks inside the flat vector."""
    sp: slice
    mot: slice
    bar: slice
    noise: slice

    def as_dict(self):
        return {"sp": (self.sp.start, self.sp.stop), "mot": (self.mot.start, self.mot.stop),
                "bar": (self.bar.start, self.bar.stop), "noise": (self.noise.start, self.noise.stop)}

    @property
    def total(self) -> int:
        return self.noise.stop


def segment_map(cfg: EnvConfig) -> SegmentMap:
    n_sp = 3 + 5 * cfg.targets.count
    n_mot = 8
    n_bar = 3 + 4 * cfg.obstacles.count
    n_noise = 4
    a = n_sp
    b = a + n_mot
    c = b + n_bar
    return SegmentMap(slice(0, a), slice(a, b), slice(b, c), slice(c, c + n_noise))


@dataclass
class WorldState:
    cfg: EnvConfig
    field: CurrentField
    noise: NoiseProcesses
    auv: AuvState
    targets: list
    obstacles: list
    t: int = 0
    noise_vec: np.ndarray = dc_field(default_factory=lambda: np.zeros(4))
    rng_env: np.random.Generator = None
    rng_noise: np.random.Generator = None

    def active_target(self):
        """Nearest uncaptured target, or None."""
        best, best_d = None, np.inf
        for tgt in self.targets:
            if tgt.captured:
                continue
            d = float(np.linalg.norm(self.auv.p - tgt.p))
            if d < best_d:
                best, best_d = tgt, d
        return best, best_d


def _place(rng, extents, margin, obstacles, clearance, tries=1000):
    lo = extents * margin
    hi = extents * (1.0 - margin)
    for _ in range(tries):
        p = rng.uniform(lo, hi)
        if all(np.linalg.norm(p - o.p) > o.radius + clearance for o in obstacles):
            return p
    raise SpawnError(f"no collision-free placement after {tries} tries")


def reset(cfg: EnvConfig, seed: int) -> WorldState:
    """Pure function of (config, seed): identical seeds give identical worlds."""
    ss = np.random.SeedSequence(seed)
    rng_place, rng_field, rng_env, rng_noise = [np.random.default_rng(s) for s in ss.spawn(4)]

    extents = np.asarray(cfg.workspace.extents, dtype=np.float64)
    diag = float(np.linalg.norm(extents))
    field = CurrentField.jittered_grid(
        extents, n_basis=cfg.current.n_basis,
        length_scale=cfg.current.length_scale,
        reversion_rate=cfg.current.reversion_rate,
        drift_sigma=cfg.current.drift_sigma, rng=rng_field)

    obstacles = []
    for _ in range(cfg.obstacles.count):
        radius = rng_place.uniform(*cfg.obstacles.radius_range)
        p = _place(rng_place, extents, cfg.workspace.spawn_margin, obstacles, radius + 2.0)
        obstacles.append(Obstacle(p, radius))

    auv_p = _place(rng_place, extents, cfg.workspace.spawn_margin, obstacles, 2.0)
    auv = AuvState(p=auv_p, v=np.zeros(3),
                   yaw=float(rng_place.uniform(-np.pi, np.pi)), pitch=0.0,
                   inertia=cfg.dynamics.mass * np.eye(3))

    d_min = cfg.targets.spawn_min_dist if cfg.targets.spawn_min_dist is not None else 0.10 * diag
    d_max = cfg.targets.spawn_max_dist if cfg.targets.spawn_max_dist is not None else 0.45 * diag
    targets = []
    for _ in range(cfg.targets.count):
        for attempt in range(1000):
            p = _place(rng_place, extents, cfg.workspace.spawn_margin, obstacles, 2.0)
            if d_min <= np.linalg.norm(p - auv_p) <= d_max:
                break
        else:
            raise SpawnError("no target placement satisfying the spawn distance band after 1000 tries")
        targets.append(TargetState(p=p, heading=float(rng_place.uniform(-np.pi, np.pi)),
                                   vz_phase=float(rng_place.uniform(0, 2 * np.pi))))

    noise = NoiseProcesses(cfg.noise)
    world = WorldState(cfg=cfg, field=field, noise=noise, auv=auv,
                       targets=targets, obstacles=obstacles,
                       rng_env=rng_env, rng_noise=rng_noise)
    world.noise_vec = noise.sample(auv.speed, cfg.episode.traffic_density,
                                   cfg.episode.turb_speed, rng_noise)
    return world


def _move_targets(world: WorldState):
    cfg = world.cfg
    speed = cfg.targets.speed_fraction * cfg.dynamics.v_max * cfg.dynamics.dt
    extents = np.asarray(cfg.workspace.extents, dtype=np.float64)
    for tgt in world.targets:
        tgt.heading = wrap_angle(tgt.heading + world.rng_env.normal(0.0, cfg.targets.heading_sigma))
        tgt.vz_phase += 0.05
        step = speed * np.array([np.cos(tgt.heading), np.sin(tgt.heading),
                                 0.3 * np.sin(tgt.vz_phase)])
        p = tgt.p + step
        # reflect at the walls
        for ax in range(3):
            if p[ax] < 0.0:
                p[ax] = -p[ax]
                if ax < 2:
                    tgt.heading = wrap_angle(np.pi - tgt.heading) if ax == 0 else -tgt.heading
            elif p[ax] > extents[ax]:
                p[ax] = 2.0 * extents[ax] - p[ax]
                if ax < 2:
                    tgt.heading = wrap_angle(np.pi - tgt.heading) if ax == 0 else -tgt.heading
        tgt.p = np.clip(p, 0.0, extents)


def compute_reward(d_prev: float, d_new: float, events: dict, coeffs) -> tuple:
    """Shaped reward and its components.

    r = alpha_d (d_prev - d_new) + alpha_g captures - alpha_c collision
        - alpha_b boundary
    """
    r_d = coeffs.alpha_d * (d_prev - d_new) if d_prev is not None else 0.0
    r_g = coeffs.alpha_g * len(events.get("captures", ()))
    r_c = -coeffs.alpha_c if events.get("collision") else 0.0
    r_b = -coeffs.alpha_b if events.get("boundary") else 0.0
    total = r_d + r_g + r_c + r_b
    return total, {"r_d": r_d, "r_g": r_g, "r_c": r_c, "r_b": r_b}


def step(world: WorldState, action: HybridAction):
    """Advance physics, targets, currents, and noise by one step.

    Returns (reward, events, components). Mutates the world in place.
    """
    cfg = world.cfg
    active, d_prev = world.active_target()

    sigma_f = cfg.dynamics.disturbance_sigma * cfg.dynamics.f_max
    disturbance = world.rng_env.normal(0.0, sigma_f, size=3) if sigma_f > 0 else None
    try:
        world.auv, boundary = step_dynamics(world.auv, action, world.field,
                                            cfg.dynamics, cfg.workspace, disturbance)
    except NumericError as e:
        raise NumericError(f"step {world.t}: {e}") from e

    _move_targets(world)
    world.field.step_weights(world.rng_env)
    world.noise_vec = world.noise.sample(world.auv.speed, cfg.episode.traffic_density,
                                         cfg.episode.turb_speed, world.rng_noise)

    collision = any(np.linalg.norm(world.auv.p - o.p) < o.radius for o in world.obstacles)
    captures = []
    for j, tgt in enumerate(world.targets):
        if not tgt.captured and np.linalg.norm(world.auv.p - tgt.p) < cfg.targets.capture_radius:
            tgt.captured = True
            captures.append(j)

    d_new = float(np.linalg.norm(world.auv.p - active.p)) if active is not None else None
    events = {"collision": collision, "boundary": boundary, "captures": tuple(captures)}
    reward, components = compute_reward(d_prev if active is not None else None, d_new, events, cfg.reward)
    world.t += 1
    return reward, events, components


def is_terminal(world: WorldState) -> str:
    if all(t.captured for t in world.targets):
        return SUCCESS
    if world.t >= world.cfg.episode.max_steps:
        return TIMEOUT
    return RUNNING


def observe(world: WorldState) -> np.ndarray:
    """Deterministic normalized observation; every component in [0, 1]."""
    cfg = world.cfg
    extents = np.asarray(cfg.workspace.extents, dtype=np.float64)
    diag = float(np.linalg.norm(extents))
    auv = world.auv
    rot_t = body_rotation(auv.yaw, auv.pitch).T

    parts = [auv.p / extents]
    for tgt in world.targets:
        rel = rot_t @ (tgt.p - auv.p)
        d = float(np.linalg.norm(rel))
        indicator = 1.0 if (tgt.captured or d < cfg.targets.capture_radius) else 0.0
        parts.append(np.concatenate([rel / diag * 0.5 + 0.5, [d / diag, indicator]]))

    v_norm = auv.v / cfg.dynamics.v_max * 0.5 + 0.5
    att = np.array([np.sin(auv.yaw), np.cos(auv.yaw), np.sin(auv.pitch), np.cos(auv.pitch)]) * 0.5 + 0.5
    parts.append(np.concatenate([v_norm, att, [world.t / cfg.episode.max_steps]]))

    v_ref = cfg.current.reference_speed
    v_c = np.clip(world.field.velocity(auv.p), -v_ref, v_ref)
    bar = [v_c / v_ref * 0.5 + 0.5]
    for o in world.obstacles:
        rel = rot_t @ (o.p - auv.p)
        d = max(0.0, float(np.linalg.norm(o.p - auv.p)) - o.radius)
        bar.append(np.concatenate([rel / diag * 0.5 + 0.5, [d / diag]]))
    parts.append(np.concatenate(bar))

    scales = _noise_scales(cfg)
    parts.append(0.5 + 0.5 * np.tanh(world.noise_vec / scales))

    obs = np.concatenate(parts)
    return np.clip(obs, 0.0, 1.0)


def _noise_scales(cfg: EnvConfig) -> np.ndarray:
    """Documented squash scales: 3x each channel's reference scale."""
    n = cfg.noise
    turb_stat = n.turb.sigma0 / np.sqrt(max(1e-9, 1.0 - n.turb.rho ** 2))
    return 3.0 * np.array([
        np.sqrt(vehicle_noise_variance(n.veh, n.veh.v0, n.veh.rho0)),
        n.bio.gamma,
        1.0,
        turb_stat,
    ])


class OceanEnv:
    """Gym-style wrapper: reset(seed) -> obs, step(action) -> transition."""

    def __init__(self, cfg):
        self.cfg = cfg.env if isinstance(cfg, RunConfig) else cfg
        self.seg = segment_map(self.cfg)
        self.world: WorldState | None = None

    @property
    def obs_dim(self) -> int:
        return self.seg.total

    def reset(self, seed: int) -> np.ndarray:
        self.world = reset(self.cfg, seed)
        return observe(self.world)

    def step(self, action: HybridAction):
        reward, events, components = step(self.world, action)
        status = is_terminal(self.world)
        obs = observe(self.world)
        done = status != RUNNING
        info = {"status": status, "events": events, "reward_components": components,
                "position": self.world.auv.p.copy()}
        return obs, reward, done, info
