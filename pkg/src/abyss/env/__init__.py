from .currents import CurrentField
from .dynamics import AuvState, HybridAction, Maneuver, N_MANEUVERS, NumericError, step_dynamics
from .noise import NoiseConfigError, NoiseParams, NoiseProcesses, sample_sas
from .world import (
    RUNNING,
    SUCCESS,
    TIMEOUT,
    OceanEnv,
    SegmentMap,
    SpawnError,
    WorldState,
    compute_reward,
    is_terminal,
    observe,
    reset,
    segment_map,
    step,
)
