"""Run configuration: one structured document covering environment,
agent, exploration, replay, and trainer constants.

Scenario presets (`dim9` ... `dim36`) grade the feature regime by
target count, obstacle count, and enabled noise channels. `dim9-smoke`
is the desk-scale profile used by the smoke-training acceptance run:
same feature regime as `dim9`, scaled-down geometry and schedules so
800 episodes finish in minutes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

NOISE_CHANNELS = ("veh", "bio", "geo", "turb")


@dataclass
class VehicleNoiseParams:
    sigma0: float = 0.5        # reference std at (v0, rho0)
    v0: float = 1.0            # reference speed, m/s
    rho0: float = 1.0          # reference traffic density
    alpha_v: float = 1.0
    alpha_rho: float = 1.0


@dataclass
class BioNoiseParams:
    alpha: float = 1.5         # impulsiveness, in (1, 2]
    gamma: float = 0.5         # scale


@dataclass
class GeoNoiseParams:
    beta: float = 1.0          # spectral roll-off exponent


@dataclass
class TurbNoiseParams:
    rho: float = 0.8           # lag-1 correlation, |rho| < 1
    sigma0: float = 0.3
    u0: float = 1.0
    alpha_u: float = 1.0


@dataclass
class NoiseParams:
    channels: tuple = NOISE_CHANNELS
    veh: VehicleNoiseParams = field(default_factory=VehicleNoiseParams)
    bio: BioNoiseParams = field(default_factory=BioNoiseParams)
    geo: GeoNoiseParams = field(default_factory=GeoNoiseParams)
    turb: TurbNoiseParams = field(default_factory=TurbNoiseParams)


@dataclass
class WorkspaceConfig:
    extents: tuple = (200.0, 200.0, 100.0)   # m, axis-aligned box from origin
    spawn_margin: float = 0.1                # fraction of extent kept clear of walls


@dataclass
class DynamicsConfig:
    dt: float = 0.5                 # s
    mass: float = 50.0              # kg (isotropic inertia)
    v_max: float = 2.0              # m/s
    f_max: float = 100.0            # N, peak thrust
    brake_max: float = 100.0        # N
    yaw_rate_max: float = 0.5       # rad/s
    pitch_rate_max: float = 0.3     # rad/s
    pitch_limit: float = 1.0471975511965976  # rad, +-60 deg
    drag_coeff: float = 25.0        # N s^2 / m^2
    disturbance_sigma: float = 0.01  # fraction of f_max, per axis


@dataclass
class CurrentConfig:
    n_basis: int = 8
    length_scale: float | None = None   # m; default min(extent)/2
    reversion_rate: float = 0.01        # per step
    drift_sigma: float = 0.02           # m/s per step
    reference_speed: float = 1.0        # m/s, documented observation range


@dataclass
class TargetConfig:
    count: int = 1
    speed_fraction: float = 0.3      # of v_max
    heading_sigma: float = 0.2       # rad per step, wrapped Gaussian
    capture_radius: float = 5.0      # m
    spawn_min_dist: float | None = None  # m from AUV; default 0.1 * diag
    spawn_max_dist: float | None = None  # m from AUV; default 0.45 * diag


@dataclass
class ObstacleConfig:
    count: int = 0
    radius_range: tuple = (3.0, 6.0)  # m


@dataclass
class RewardConfig:
    alpha_d: float = 1.0     # distance shaping
    alpha_g: float = 100.0   # capture bonus
    alpha_c: float = 50.0    # collision penalty
    alpha_b: float = 10.0    # boundary penalty


@dataclass
class EpisodeConfig:
    max_steps: int = 800
    traffic_density: float = 1.0    # rho_N seen by the vehicle-noise law
    turb_speed: float = 1.0         # U_turb, held constant within a window


@dataclass
class EnvConfig:
    workspace: WorkspaceConfig = field(default_factory=WorkspaceConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    current: CurrentConfig = field(default_factory=CurrentConfig)
    targets: TargetConfig = field(default_factory=TargetConfig)
    obstacles: ObstacleConfig = field(default_factory=ObstacleConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    noise: NoiseParams = field(default_factory=NoiseParams)


@dataclass
class AgentConfig:
    encoder_width: int = 48       # d, per-modality feature width
    encoder_depth: int = 2        # blocks per encoder
    token_dim: int = 48           # n, shared latent width
    n_heads: int = 6
    ffn_dim: int = 96
    proj_dims: tuple = (96, 64)   # hidden widths before the embedding
    embed_dim: int = 64           # z
    n_experts: int = 5
    top_k: int = 2
    expert_hidden: int = 64
    dropout: float = 0.1
    groupnorm_groups: int = 4
    bn_momentum: float = 0.1


@dataclass
class ExploreConfig:
    eps0: float = 1.0
    eps_decay: float = 0.0002     # per episode
    eps_min: float = 0.05
    sigma_c: float = 0.2          # continuous channel noise std
    sigma_c_decay: float = 0.999  # multiplicative, per episode
    sigma_c_min: float = 0.0


@dataclass
class ReplayConfig:
    capacity: int = 200_000
    alpha: float = 0.6
    beta0: float = 0.4
    beta_final: float = 1.0
    eps_priority: float = 1e-3
    store_latent: bool = False    # store z instead of raw observations


@dataclass
class TrainerConfig:
    gamma: float = 0.95
    lr_critic: float = 1e-3       # expert / gate / perception
    lr_actor: float = 1e-3        # continuous head
    batch_size: int = 64
    target_update_every: int = 200  # env steps between soft updates
    tau: float = 0.01
    grad_clip: float = 1.0
    episodes: int = 10_000
    warmup_factor: int = 5        # updates begin at warmup_factor * batch_size transitions
    update_every: int = 1         # env steps per gradient update
    precision: str = "float32"
    checkpoint_every: int = 500   # episodes
    divergence_limit: float = 1e6
    divergence_patience: int = 100


@dataclass
class RunConfig:
    name: str = "custom"
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    explore: ExploreConfig = field(default_factory=ExploreConfig)
    replay: ReplayConfig = field(default_factory=ReplayConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)


class ConfigError(ValueError):
    pass


def _to_plain(obj):
    if is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _from_plain(cls, data):
    if not is_dataclass(cls):
        return data
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping for {cls.__name__}, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {cls.__name__}: {sorted(unknown)}")
    kwargs = {}
    for name, f in known.items():
        if name not in data:
            continue
        value = data[name]
        if is_dataclass(f.type) or (isinstance(f.type, str) and f.type in _SECTION_TYPES):
            sub_cls = _SECTION_TYPES[f.type] if isinstance(f.type, str) else f.type
            kwargs[name] = _from_plain(sub_cls, value)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


_SECTION_TYPES = {c.__name__: c for c in (
    WorkspaceConfig, DynamicsConfig, CurrentConfig, TargetConfig, ObstacleConfig,
    RewardConfig, EpisodeConfig, EnvConfig, NoiseParams, VehicleNoiseParams,
    BioNoiseParams, GeoNoiseParams, TurbNoiseParams, AgentConfig, ExploreConfig,
    ReplayConfig, TrainerConfig, RunConfig,
)}


def to_dict(cfg: RunConfig) -> dict:
    return _to_plain(cfg)


def from_dict(data: dict) -> RunConfig:
    return _from_plain(RunConfig, data)


def save_config(cfg: RunConfig, path):
    Path(path).write_text(yaml.safe_dump(to_dict(cfg), sort_keys=True))


def load_config(path) -> RunConfig:
    data = yaml.safe_load(Path(path).read_text())
    return from_dict(data)


# -- scenario presets -------------------------------------------------------

def _regime(name, n_targets, n_obstacles, channels) -> RunConfig:
    cfg = RunConfig(name=name)
    cfg.env.targets.count = n_targets
    cfg.env.obstacles.count = n_obstacles
    cfg.env.noise.channels = tuple(channels)
    return cfg


def _smoke_profile(cfg: RunConfig) -> RunConfig:
    """Desk-scale geometry and schedules (minutes, not days)."""
    cfg.env.workspace.extents = (60.0, 60.0, 30.0)
    cfg.env.workspace.spawn_margin = 0.15
    cfg.env.episode.max_steps = 120
    cfg.env.targets.spawn_min_dist = 12.0
    cfg.env.targets.spawn_max_dist = 40.0
    cfg.env.current.drift_sigma = 0.01
    cfg.explore.eps_decay = 0.002
    cfg.explore.sigma_c = 0.3
    cfg.explore.sigma_c_decay = 0.995
    cfg.explore.sigma_c_min = 0.02
    cfg.trainer.episodes = 800
    cfg.trainer.tau = 1.0
    cfg.trainer.target_update_every = 200
    cfg.trainer.update_every = 2
    return cfg


def preset(name: str) -> RunConfig:
    builders = {
        "dim9": lambda: _regime("dim9", 1, 0, ("veh",)),
        "dim18": lambda: _regime("dim18", 2, 2, ("veh", "bio")),
        "dim27": lambda: _regime("dim27", 3, 4, ("veh", "bio", "geo")),
        "dim36": lambda: _regime("dim36", 4, 6, ("veh", "bio", "geo", "turb")),
        "dim9-smoke": lambda: _smoke_profile(_regime("dim9-smoke", 1, 0, ("veh",))),
        "dim18-smoke": lambda: _smoke_profile(_regime("dim18-smoke", 2, 2, ("veh", "bio"))),
    }
    if name not in builders:
        raise ConfigError(f"unknown scenario '{name}'; known: {sorted(builders)} or a YAML path")
    return builders[name]()


PRESET_NAMES = ("dim9", "dim18", "dim27", "dim36", "dim9-smoke", "dim18-smoke")


def resolve_config(spec: str) -> RunConfig:
    """Accept a preset name or a path to a YAML config file."""
    if spec in PRESET_NAMES:
        return preset(spec)
    p = Path(spec)
    if p.exists():
        return load_config(p)
    raise ConfigError(f"'{spec}' is neither a known scenario nor an existing config file")
