"""
Radius Schedules

Geometric grids of sphere radii, and the per-radius seed derivation that
makes every scan reproducible regardless of execution order.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from common.config import ScheduleConfig


@dataclass(frozen=True)
class RadiusSchedule:
    """Geometrically spaced radii in [r_min, r_max]."""
    r_min: float = 1.0
    r_max: float = 1.0e6
    points_per_decade: int = 16

    def __post_init__(self):
        if not (0 < self.r_min < self.r_max) or not math.isfinite(self.r_max):
            raise ValueError(f"Need 0 < r_min < r_max, got [{self.r_min}, {self.r_max}]")
        if int(self.points_per_decade) < 1:
            raise ValueError(f"points_per_decade must be >= 1, got {self.points_per_decade}")

    @classmethod
    def from_config(cls, config: ScheduleConfig) -> "RadiusSchedule":
        return cls(float(config.r_min), float(config.r_max), int(config.points_per_decade))

    @cached_property
    def radii(self) -> np.ndarray:
        decades = math.log10(self.r_max / self.r_min)
        count = max(2, int(round(decades * self.points_per_decade)) + 1)
        radii = np.geomspace(self.r_min, self.r_max, count)
        radii[0], radii[-1] = self.r_min, self.r_max
        return radii

    @property
    def r_mid(self) -> float:
        """Geometric midpoint of the schedule."""
        return math.sqrt(self.r_min * self.r_max)

    def __len__(self) -> int:
        return len(self.radii)


def derive_seed(seed: int, index: int) -> int:
    """64-bit seed for radius `index`, mixed from the global seed by SeedSequence."""
    state = np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)
    return int(state[0])


def start_points(n: int, radius: float, count: int, seed: int) -> np.ndarray:
    """
    Uniform random points on the sphere |x| = radius.

    Start s is drawn from its own stream SeedSequence([seed, s]), so a
    start never depends on how many others are drawn alongside it.
    """
    points = np.empty((count, n))
    for s in range(count):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), s]))
        direction = rng.standard_normal(n)
        while not np.any(direction):
            direction = rng.standard_normal(n)
        points[s] = radius * direction / np.linalg.norm(direction)
    return points
