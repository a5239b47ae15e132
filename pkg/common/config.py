"""
Injectivity Checker Configuration

Centralized configuration for every stage of an analysis: radius schedules,
sphere minimization, condition thresholds, sampling budgets and output.
Every report embeds the configuration it was produced with.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from typing import Any, Dict, List, Optional, Tuple


CONDITION_NAMES = (
    "palais_smale",
    "rabier",
    "integral",
    "spectral",
    "balreira",
    "properness",
    "collision",
    "topology",
)


@dataclass
class ScheduleConfig:
    """Radius schedule for sphere scans."""
    r_min: float = 1.0
    r_max: float = 1.0e6
    points_per_decade: int = 16


@dataclass
class ScanConfig:
    """Multi-start projected-gradient minimization on spheres."""
    starts: int = 32
    seed: int = 1234
    max_iterations: int = 200
    step_tol: float = 1e-20     # Smallest trial step, relative to the radius
    value_tol: float = 1e-12    # Stop a start when one iteration gains less than this, relatively
    armijo: float = 1e-4
    workers: int = 1            # Threads per sphere; results do not depend on it
    continuation_ratio: float = 1.05    # Largest radius ratio of one argmin continuation substep


@dataclass
class ThresholdConfig:
    """Finite-sample decision rules for the condition battery."""
    # Palais-Smale
    tol_ps: float = 1e-3
    floor_ps: float = 1e-2
    bound_band: float = 10.0

    # Rabier / K-infinity
    tol_rabier: float = 1e-3
    floor_rabier: float = 1e-2
    cluster_eps: float = 0.05

    # Integral classifier
    margin: float = 0.1
    residual_max: float = 0.5
    tail_window: float = 2.0    # Decades
    min_tail_points: int = 8
    vanish_floor: float = 1e-15     # Positive profile values at or below this count as vanished

    # Shared
    r_mid: Optional[float] = None   # None = geometric midpoint of the schedule
    witness_min_points: int = 3
    sing_tol: float = 1e-8
    sing_ball_radius: float = 10.0
    sing_samples: int = 512

    # Spectral
    gap_floor: float = 1e-3
    realness_tol: float = 1e-9

    # Kernels
    tol_level: float = 1e-9
    gram_clamp: float = 1e-12
    rank_tol: float = 1e-10


@dataclass
class SpectralConfig:
    """Point cloud used to sample Spec(f)."""
    epsilon: float = 0.5
    points: int = 4096
    shells: int = 16
    r_min: float = 1e-2
    r_max: Optional[float] = None   # None = schedule r_max


@dataclass
class PropernessConfig:
    """Non-proper value (S_f) witness search."""
    grid_half_width: float = 2.0
    grid_points: int = 5
    screen_radius: float = 1.0e3
    screen_starts: int = 16
    screen_tol: float = 0.5
    r_min: float = 10.0
    r_max: float = 1.0e4
    points_per_decade: int = 8
    starts: int = 16
    witness_tol: float = 0.05
    witness_min_radius: float = 1.0e3
    max_extra_targets: int = 8
    merge_radius: float = 0.1
    pca_rel: float = 0.1


@dataclass
class CollisionConfig:
    """Direct falsification of injectivity."""
    attempts: int = 2000
    max_iterations: int = 60
    sample_scale: float = 3.0
    separation: float = 1e-3
    residual_tol: float = 1e-9
    linear_ratio: float = 1e-3    # Residual must stay below this fraction of nu(Df) |x - x'|
    refine_iterations: int = 8
    penalty: float = 1.0
    penalty_radius: float = 0.1   # Separation below which the penalty residual switches on


@dataclass
class ChainConfig:
    """Restricted chains G_k^{-1}(c) for the higher-dimensional conditions."""
    levels_per_depth: int = 2
    anchor_radius: float = 1.0
    oversample: int = 8
    max_projection_iterations: int = 50


@dataclass
class TopologyConfig:
    """Level-curve tracing and bifurcation scanning."""
    grid: int = 512
    box: float = 20.0
    escalations: Tuple[int, ...] = (1, 2, 4)
    levels: Tuple[float, ...] = (-1.0, -0.5, 0.0, 0.5, 1.0)
    workers: int = 1


@dataclass
class AnalysisConfig:
    """Master configuration."""
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    properness: PropernessConfig = field(default_factory=PropernessConfig)
    collision: CollisionConfig = field(default_factory=CollisionConfig)
    chain: ChainConfig = field(default_factory=ChainConfig)
    topology: TopologyConfig = field(default_factory=TopologyConfig)

    conditions: List[str] = field(default_factory=lambda: list(CONDITION_NAMES))
    combinations: Optional[List[Tuple[int, ...]]] = None   # None = all of C_{n-2}
    balreira_k: int = 1
    assert_codim2: bool = False
    output_dir: str = "reports"
    deterministic: bool = True

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


# Global default config
_config: Optional[AnalysisConfig] = None


def get_config() -> AnalysisConfig:
    """Get the global configuration instance."""
    global _config
    if _config is None:
        _config = AnalysisConfig()
    return _config


def set_config(config: AnalysisConfig) -> None:
    """Set the global configuration instance."""
    global _config
    _config = config


def config_to_dict(config: AnalysisConfig) -> Dict[str, Any]:
    """Plain-JSON view of a configuration (tuples become lists)."""
    return json.loads(json.dumps(asdict(config)))


def _merge(instance: Any, overrides: Dict[str, Any]) -> None:
    known = {f.name: f for f in fields(instance)}
    for key, value in overrides.items():
        if key not in known:
            raise ValueError(f"Unknown configuration key: {key}")
        current = getattr(instance, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise ValueError(f"Configuration section {key} must be an object")
            _merge(current, value)
        elif key == "combinations" and value is not None:
            setattr(instance, key, [tuple(int(i) for i in combo) for combo in value])
        elif key == "escalations":
            setattr(instance, key, tuple(int(v) for v in value))
        elif key == "levels":
            setattr(instance, key, tuple(float(v) for v in value))
        else:
            setattr(instance, key, value)


def config_from_dict(data: Dict[str, Any], base: Optional[AnalysisConfig] = None) -> AnalysisConfig:
    """Build a configuration from (possibly partial) overrides."""
    config = base if base is not None else AnalysisConfig()
    _merge(config, data)
    return config


def load_config_file(path: str, base: Optional[AnalysisConfig] = None) -> AnalysisConfig:
    """Load a JSON file of configuration overrides."""
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise ValueError(f"Configuration file {path} must hold a JSON object")
    return config_from_dict(data, base)


def load_config_from_env(base: Optional[AnalysisConfig] = None) -> AnalysisConfig:
    """Load configuration overrides from environment variables."""
    config = base if base is not None else AnalysisConfig()

    # Scan overrides
    if os.environ.get('INJ_SEED'):
        config.scan.seed = int(os.environ['INJ_SEED'])
    if os.environ.get('INJ_STARTS'):
        config.scan.starts = int(os.environ['INJ_STARTS'])
    if os.environ.get('INJ_WORKERS'):
        config.scan.workers = int(os.environ['INJ_WORKERS'])

    # Schedule overrides
    if os.environ.get('INJ_R_MIN'):
        config.schedule.r_min = float(os.environ['INJ_R_MIN'])
    if os.environ.get('INJ_R_MAX'):
        config.schedule.r_max = float(os.environ['INJ_R_MAX'])
    if os.environ.get('INJ_POINTS_PER_DECADE'):
        config.schedule.points_per_decade = int(os.environ['INJ_POINTS_PER_DECADE'])

    # Output
    if os.environ.get('INJ_OUTPUT_DIR'):
        config.output_dir = os.environ['INJ_OUTPUT_DIR']

    # Logging
    if os.environ.get('INJ_LOG_LEVEL'):
        config.log_level = os.environ['INJ_LOG_LEVEL']

    return config
