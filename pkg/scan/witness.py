"""
Witnesses

A finite sequence of points escaping to infinity together with the
objective and map values along it, replayable by re-evaluation.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from common.formats import KIND_WITNESS, pack_csv, unpack_csv
from scan.objectives import Objective
from scan.sphere import RadialScan

logger = logging.getLogger(__name__)


@dataclass
class Witness:
    """Points x_1..x_L with |x_l| strictly increasing and their diagnostics."""
    map_name: str
    objective: str
    points: np.ndarray          # (L, n)
    values: np.ndarray          # (L,) objective values
    images: np.ndarray          # (L, m) map values

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        self.images = np.asarray(self.images, dtype=np.float64).reshape(len(self.points), -1)
        if len(self.values) != len(self.points):
            raise ValueError("Witness needs one objective value per point")
        if np.any(np.diff(self.norms) <= 0):
            raise ValueError("Witness norms must be strictly increasing")

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.points, axis=-1)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def last_norm(self) -> float:
        return float(self.norms[-1])

    @classmethod
    def from_points(cls, objective: Objective, points) -> "Witness":
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return cls(objective.fmap.name, objective.describe(), points,
                   objective.values(points), objective.image(points))

    @classmethod
    def from_scan(cls, scan: RadialScan, indices: Sequence[int]) -> "Witness":
        indices = list(indices)
        return cls(scan.map_name, scan.objective, scan.points[indices],
                   scan.values[indices], scan.images[indices])

    def verify(self, objective: Objective, tol: float = 1e-9) -> bool:
        """Recompute the diagnostics and compare with the stored values."""
        values = objective.values(self.points)
        images = objective.image(self.points)
        value_ok = np.all(np.abs(values - self.values) <= tol * (1 + np.abs(self.values)))
        image_ok = np.all(np.abs(images - self.images) <= tol * (1 + np.abs(self.images)))
        if not (value_ok and image_ok):
            logger.warning(f"Witness for {self.objective} does not replay within {tol:g}")
        return bool(value_ok and image_ok)

    def to_csv(self) -> str:
        n, m = self.points.shape[1], self.images.shape[1]
        columns = ["norm", "value"] + [f"x{j + 1}" for j in range(n)] + [f"g{i + 1}" for i in range(m)]
        rows = [[float(self.norms[l]), float(self.values[l])]
                + [float(v) for v in self.points[l]]
                + [float(v) for v in self.images[l]]
                for l in range(len(self))]
        return pack_csv(KIND_WITNESS, columns, rows)

    @classmethod
    def from_csv(cls, text: str, map_name: str = "", objective: str = "") -> "Witness":
        columns, rows = unpack_csv(text, KIND_WITNESS)
        n = sum(1 for c in columns if c.startswith("x"))
        table = np.array([[float(v) for v in row] for row in rows]).reshape(len(rows), len(columns))
        return cls(map_name, objective, table[:, 2:2 + n], table[:, 1], table[:, 2 + n:])

    def to_dict(self) -> dict:
        return {
            'map': self.map_name,
            'objective': self.objective,
            'norms': self.norms,
            'values': self.values,
            'points': self.points,
            'images': self.images,
        }


def witness_from_indices(scan: RadialScan, indices: Sequence[int]) -> Optional[Witness]:
    """Witness from scan radii, keeping only strictly increasing argmin norms."""
    kept = []
    last = -np.inf
    for i in sorted(indices):
        norm = float(np.linalg.norm(scan.points[i]))
        if np.isfinite(norm) and norm > last:
            kept.append(i)
            last = norm
    if not kept:
        return None
    return Witness.from_scan(scan, kept)
