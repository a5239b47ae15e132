"""
Level Curves

Marching-squares extraction of fibers g^{-1}(c) of a planar function on a
box [-R, R]^2, linking of segments into polylines, and a bifurcation scan
that compares component counts across levels and box sizes. Counts are
box-relative: curves that leave the box are flagged clipped and are never
merged across the boundary.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from common.config import AnalysisConfig, get_config
from common.formats import KIND_BIFURCATION, KIND_LEVEL_CURVES, pack_csv, pack_json
from expr.maps import ExprMap

logger = logging.getLogger(__name__)


# Corners: 0 = (i, j), 1 = (i+1, j), 2 = (i+1, j+1), 3 = (i, j+1).
# Index bits are corner signs (value > level), corner 0 most significant.
# Saddle entries hold (center below, center above) alternatives.
CELL_TABLE = [
    (False, []),                                    # 0000
    (False, [((0, 3), (2, 3))]),                    # 0001
    (False, [((1, 2), (2, 3))]),                    # 0010
    (False, [((0, 3), (1, 2))]),                    # 0011
    (False, [((0, 1), (1, 2))]),                    # 0100
    (True, ([((0, 1), (1, 2)), ((0, 3), (2, 3))],
            [((0, 1), (0, 3)), ((1, 2), (2, 3))])),  # 0101
    (False, [((0, 1), (2, 3))]),                    # 0110
    (False, [((0, 1), (0, 3))]),                    # 0111
    (False, [((0, 1), (0, 3))]),                    # 1000
    (False, [((0, 1), (2, 3))]),                    # 1001
    (True, ([((0, 1), (0, 3)), ((1, 2), (2, 3))],
            [((0, 1), (1, 2)), ((0, 3), (2, 3))])),  # 1010
    (False, [((0, 1), (1, 2))]),                    # 1011
    (False, [((0, 3), (1, 2))]),                    # 1100
    (False, [((1, 2), (2, 3))]),                    # 1101
    (False, [((0, 3), (2, 3))]),                    # 1110
    (False, []),                                    # 1111
]

# Corner pair -> (vertical edge?, di, dj) of the grid edge it spans
_EDGE_OF = {
    (0, 1): (False, 0, 0),
    (1, 2): (True, 1, 0),
    (2, 3): (False, 0, 1),
    (0, 3): (True, 0, 0),
}


@dataclass
class Polyline:
    vertices: np.ndarray            # (K, 2)
    closed: bool

    @property
    def clipped(self) -> bool:
        return not self.closed

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass
class LevelCurveSet:
    """Polylines of g = c inside [-R, R]^2 traced on an N x N grid."""
    function: str
    level: float
    half_width: float
    grid: int
    polylines: List[Polyline] = field(default_factory=list)
    saddle_cells: int = 0
    cell_bound: float = 0.0         # max over crossing cells of max corner |grad g| x cell diagonal

    @property
    def components(self) -> int:
        return len(self.polylines)

    @property
    def closed(self) -> int:
        return sum(1 for p in self.polylines if p.closed)

    @property
    def clipped(self) -> int:
        return sum(1 for p in self.polylines if p.clipped)

    def vertices(self) -> np.ndarray:
        if not self.polylines:
            return np.zeros((0, 2))
        return np.vstack([p.vertices for p in self.polylines])

    def max_vertex_residual(self, g: ExprMap) -> float:
        """max |g(v) - c| over emitted vertices."""
        vertices = self.vertices()
        if len(vertices) == 0:
            return 0.0
        return float(np.max(np.abs(g.evaluate(vertices, strict=False)[:, 0] - self.level)))

    def summary(self) -> Dict[str, Any]:
        return {
            'function': self.function,
            'level': self.level,
            'half_width': self.half_width,
            'grid': self.grid,
            'components': self.components,
            'closed': self.closed,
            'clipped': self.clipped,
            'saddle_cells': self.saddle_cells,
            'cell_bound': self.cell_bound,
        }

    def to_csv(self) -> str:
        rows = []
        for index, polyline in enumerate(self.polylines):
            for k, (x, y) in enumerate(polyline.vertices):
                rows.append([index, k, float(x), float(y), int(polyline.closed), int(polyline.clipped)])
        return pack_csv(KIND_LEVEL_CURVES, ["polyline", "vertex", "x1", "x2", "closed", "clipped"], rows)


def _scalar_2d(g: ExprMap) -> None:
    if g.n_in != 2 or g.n_out != 1:
        raise ValueError(f"Level curves need a scalar function of two variables, got {g.n_out}x{g.n_in}")


def sample_grid(g: ExprMap, axis: np.ndarray, workers: int = 1) -> np.ndarray:
    """g on axis x axis, values[i, j] = g(axis[i], axis[j]); rows evaluated in parallel blocks."""
    def rows(block: np.ndarray) -> np.ndarray:
        X, Y = np.meshgrid(axis[block], axis, indexing="ij")
        points = np.stack([X.ravel(), Y.ravel()], axis=-1)
        return g.evaluate(points, strict=False)[:, 0].reshape(len(block), len(axis))

    blocks = np.array_split(np.arange(len(axis)), max(1, min(workers, len(axis))))
    if len(blocks) == 1:
        return rows(blocks[0])
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        return np.vstack(list(pool.map(rows, blocks)))


def _lerp(p0: float, p1: float, v0: float, v1: float) -> float:
    t = v0 / (v0 - v1) if v0 != v1 else 0.5
    t = min(max(t, 0.0), 1.0)
    return p0 * (1 - t) + t * p1


def _link(segments: List[Tuple[int, int]]) -> List[Tuple[List[int], bool]]:
    """Chain segments that share grid edges; returns (edge ids, closed) per chain."""
    neighbours: Dict[int, List[int]] = {}
    for a, b in segments:
        neighbours.setdefault(a, []).append(b)
        neighbours.setdefault(b, []).append(a)
    seen = set()
    chains = []

    def walk(start: int) -> List[int]:
        chain, previous, current = [start], None, start
        seen.add(start)
        while True:
            following = [e for e in neighbours[current] if e != previous and e not in seen]
            if not following:
                return chain
            previous, current = current, following[0]
            seen.add(current)
            chain.append(current)

    for edge in sorted(neighbours):
        if edge not in seen and len(neighbours[edge]) == 1:
            chains.append((walk(edge), False))
    for edge in sorted(neighbours):
        if edge not in seen:
            chains.append((walk(edge), True))
    return chains


def _canonical(vertices: np.ndarray, closed: bool) -> np.ndarray:
    """Start at the leftmost-lowest vertex (closed) or the smaller endpoint (open)."""
    if closed:
        start = int(np.lexsort((vertices[:, 1], vertices[:, 0]))[0])
        return np.roll(vertices, -start, axis=0)
    if (vertices[-1, 0], vertices[-1, 1]) < (vertices[0, 0], vertices[0, 1]):
        return vertices[::-1].copy()
    return vertices


def trace_level_curve(g: ExprMap, c: float, R: float, N: int,
                      config: Optional[AnalysisConfig] = None) -> LevelCurveSet:
    """
    Extract g^{-1}(c) on [-R, R]^2 with marching squares on N x N nodes.

    Saddle cells are resolved by sampling g at the cell centre.

    Raises:
        ValueError: If N < 64 or g is not finite on the grid
    """
    _scalar_2d(g)
    if N < 64:
        raise ValueError(f"Grid resolution must be at least 64, got {N}")
    config = config if config is not None else get_config()
    axis = np.linspace(-R, R, N)
    step = axis[1] - axis[0]
    V = sample_grid(g, axis, config.topology.workers) - c
    if not np.all(np.isfinite(V)):
        raise ValueError(f"{g.name} is not finite on [-{R:g}, {R:g}]^2")

    above = V > 0
    index = (8 * above[:-1, :-1] + 4 * above[1:, :-1] + 2 * above[1:, 1:] + above[:-1, 1:]).astype(int)
    cells = np.argwhere((index != 0) & (index != 15))

    saddles = cells[np.isin(index[cells[:, 0], cells[:, 1]], (5, 10))]
    centre_above = {}
    if len(saddles):
        centres = np.stack([axis[saddles[:, 0]] + step / 2, axis[saddles[:, 1]] + step / 2], axis=-1)
        centre_values = g.evaluate(centres, strict=False)[:, 0] - c
        centre_above = {(int(i), int(j)): bool(v > 0) for (i, j), v in zip(saddles, centre_values)}

    segments: List[Tuple[int, int]] = []
    positions: Dict[int, Tuple[float, float]] = {}

    def edge_id(i: int, j: int, pair: Tuple[int, int]) -> int:
        vertical, di, dj = _EDGE_OF[tuple(sorted(pair))]
        a, b = i + di, j + dj
        key = 2 * (a * N + b) + int(vertical)
        if key not in positions:
            if vertical:
                positions[key] = (axis[a], _lerp(axis[b], axis[b + 1], V[a, b], V[a, b + 1]))
            else:
                positions[key] = (_lerp(axis[a], axis[a + 1], V[a, b], V[a + 1, b]), axis[b])
        return key

    for i, j in cells:
        i, j = int(i), int(j)
        saddle, edges = CELL_TABLE[index[i, j]]
        if saddle:
            edges = edges[int(centre_above[(i, j)])]
        for first, second in edges:
            segments.append((edge_id(i, j, first), edge_id(i, j, second)))

    polylines = []
    for chain, closed in _link(segments):
        vertices = np.array([positions[e] for e in chain], dtype=np.float64)
        polylines.append(Polyline(_canonical(vertices, closed), closed))
    polylines.sort(key=lambda p: (p.vertices[0, 0], p.vertices[0, 1]))

    cell_bound = 0.0
    if len(cells):
        corners = np.unique(np.concatenate([cells, cells + [1, 0], cells + [0, 1], cells + [1, 1]]), axis=0)
        gradients = g.jacobian(np.stack([axis[corners[:, 0]], axis[corners[:, 1]]], axis=-1), strict=False)
        norms = np.zeros((N, N))
        norms[corners[:, 0], corners[:, 1]] = np.linalg.norm(gradients[:, 0, :], axis=-1)
        per_cell = np.maximum.reduce([norms[cells[:, 0] + di, cells[:, 1] + dj] for di in (0, 1) for dj in (0, 1)])
        cell_bound = float(np.max(per_cell) * step * np.sqrt(2))

    result = LevelCurveSet(g.name, float(c), float(R), int(N), polylines, len(saddles), cell_bound)
    logger.debug(f"{g.name} = {c:g} on R = {R:g}: {result.components} components "
                 f"({result.closed} closed, {result.clipped} clipped), {len(saddles)} saddle cells")
    return result


# =============================================================================
# Bifurcation Scan
# =============================================================================

@dataclass
class BifurcationReport:
    """Component counts per level and box size, with persistent jumps flagged."""
    function: str
    levels: List[float]
    half_widths: List[float]
    grid: int
    counts: List[List[int]]                      # counts[e][k]: escalation e, level k
    jumps: List[Tuple[float, float]] = field(default_factory=list)
    curves: List[LevelCurveSet] = field(default_factory=list, repr=False)

    @property
    def suspected_atypical(self) -> bool:
        return bool(self.jumps)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'function': self.function,
            'levels': self.levels,
            'half_widths': self.half_widths,
            'grid': self.grid,
            'counts': self.counts,
            'jumps': [list(j) for j in self.jumps],
            'suspected_atypical': self.suspected_atypical,
            'heuristic': True,
            'note': "box-relative component counts; simple connectedness of leaves is not certified",
        }

    def pack(self) -> str:
        return pack_json(KIND_BIFURCATION, self.to_dict())


def bifurcation_scan(g: ExprMap, levels: Sequence[float], R: float, N: int,
                     config: Optional[AnalysisConfig] = None) -> BifurcationReport:
    """
    Count level-curve components for each level at box sizes R * e for
    every configured escalation e. The gap between two consecutive levels
    is flagged when their counts differ at every box size.
    """
    config = config if config is not None else get_config()
    levels = sorted(float(c) for c in levels)
    half_widths = [float(R) * e for e in config.topology.escalations]
    counts, curves = [], []
    for width in half_widths:
        row = []
        for c in levels:
            curve = trace_level_curve(g, c, width, N, config)
            curves.append(curve)
            row.append(curve.components)
        counts.append(row)

    jumps = []
    for k in range(len(levels) - 1):
        if all(row[k] != row[k + 1] for row in counts):
            jumps.append((levels[k], levels[k + 1]))
    if jumps:
        logger.info(f"{g.name}: persistent component jumps between levels {jumps}")
    else:
        logger.info(f"{g.name}: no persistent component jumps over levels {levels}")
    return BifurcationReport(g.name, levels, half_widths, int(N), counts, jumps, curves)
