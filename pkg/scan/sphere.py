"""
Sphere Scans

Multi-start minimization of an objective over spheres |x| = r and radial
scans of the resulting infimum profile across a radius schedule.

Each start descends with Armijo backtracking along either a Gauss-Newton
step (least-squares objectives) or the normalized tangential gradient,
retracting to the sphere by rescaling. Starts are split into chunks run
on a thread pool; each start's trajectory depends only on its own seed, and
the final reduction breaks ties by the lexicographically smallest point,
so results are identical for any thread count. Radial scans carry each
argmin to the next sphere by continuation.
"""

import logging
import math
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from common.config import ScanConfig, get_config
from common.formats import KIND_SCAN, pack_csv, unpack_csv
from scan.objectives import Objective
from scan.schedule import RadiusSchedule, derive_seed, start_points

logger = logging.getLogger(__name__)


class ObjectiveUndefinedError(ValueError):
    """The objective is undefined at every start on a sphere."""
    pass


@dataclass
class SphereMinimum:
    """Best point found on one sphere."""
    value: float
    point: np.ndarray
    radius: float
    starts: int                 # Random starts run (warm starts not counted)
    skipped: int                # Starts where the objective was undefined
    seed: int
    warm_value: Optional[float] = None      # Objective at the first warm start


# =============================================================================
# Descent
# =============================================================================

def _retract(Y: np.ndarray, radius: float) -> np.ndarray:
    return radius * Y / np.linalg.norm(Y, axis=-1, keepdims=True)


def _directions(objective: Objective, X: np.ndarray, radius: float,
                step: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Search directions in the tangent space at X.

    Returns:
        (direction (B, n), slope (B,), initial step multiplier (B,))
        where slope is the directional derivative of the objective.
    """
    n = X.shape[1]
    unit = X / radius
    projector = np.eye(n) - unit[:, :, None] * unit[:, None, :]
    direction = np.zeros_like(X)
    slope = np.full(len(X), np.nan)
    trial = step.copy()
    use_gradient = np.ones(len(X), dtype=bool)

    if objective.least_squares:
        R, J = objective.residuals(X)
        finite = np.all(np.isfinite(R), axis=-1) & np.all(np.isfinite(J), axis=(-2, -1))
        if np.any(finite):
            Rf, Jf, Pf = R[finite], J[finite], projector[finite]
            JP = Jf @ Pf
            step_gn = -np.einsum("bnk,bk->bn", np.linalg.pinv(JP), Rf)
            step_gn = np.einsum("bij,bj->bi", Pf, step_gn)
            norm_r = np.linalg.norm(Rf, axis=-1)
            with np.errstate(invalid="ignore", divide="ignore"):
                grad = np.einsum("bij,bkj,bk->bi", Pf, Jf, Rf) / norm_r[:, None]
            gn_slope = np.einsum("bi,bi->b", grad, step_gn)
            length = np.linalg.norm(step_gn, axis=-1)
            cap = np.where(length > radius, radius / np.where(length > 0, length, 1.0), 1.0)
            good = (gn_slope < 0) & np.isfinite(gn_slope)
            rows = np.flatnonzero(finite)[good]
            direction[rows] = step_gn[good] * cap[good, None]
            slope[rows] = gn_slope[good] * cap[good]
            trial[rows] = 1.0
            use_gradient[rows] = False

    rows = np.flatnonzero(use_gradient)
    if rows.size:
        _, G = objective.gradients(X[rows])
        tangential = np.einsum("bij,bj->bi", projector[rows], G)
        norm_t = np.linalg.norm(tangential, axis=-1)
        valid = (norm_t > 0) & np.isfinite(norm_t)
        safe = np.where(valid, norm_t, 1.0)
        direction[rows] = np.where(valid[:, None], -tangential / safe[:, None], 0.0)
        slope[rows] = np.where(valid, -norm_t, np.nan)

    return direction, slope, trial


def _descend(objective: Objective, X: np.ndarray, radius: float,
             config: ScanConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Run projected descent from each row of X.

    Returns:
        (best value per start, best point per start) over every point
        evaluated, NaN where the start was undefined.
    """
    X = X.copy()
    f = objective.values(X)
    best_f = f.copy()
    best_x = X.copy()
    active = np.isfinite(f)
    step = np.full(len(X), 0.25 * radius)
    min_step = config.step_tol * radius

    for iteration in range(config.max_iterations):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        Xa, fa = X[rows], f[rows]
        direction, slope, trial = _directions(objective, Xa, radius, step[rows])
        length = np.linalg.norm(direction, axis=-1)
        pending = (slope < 0) & np.isfinite(slope) & (length > 0)
        accepted = np.zeros(rows.size, dtype=bool)
        new_x, new_f = Xa.copy(), fa.copy()
        t = trial.copy()

        while np.any(pending):
            idx = np.flatnonzero(pending)
            Y = _retract(Xa[idx] + t[idx, None] * direction[idx], radius)
            fY = objective.values(Y)

            improved = fY < best_f[rows[idx]]
            best_f[rows[idx[improved]]] = fY[improved]
            best_x[rows[idx[improved]]] = Y[improved]

            ok = fY <= fa[idx] + config.armijo * t[idx] * slope[idx]
            new_x[idx[ok]] = Y[ok]
            new_f[idx[ok]] = fY[ok]
            accepted[idx[ok]] = True
            pending[idx[ok]] = False

            failed = idx[~ok]
            t[failed] *= 0.5
            pending[failed[t[failed] * length[failed] < min_step]] = False

        decrease = fa - new_f
        X[rows], f[rows] = new_x, new_f
        step[rows] = np.where(accepted, 2.0 * t * length, step[rows])
        done = ~accepted | (decrease <= config.value_tol * np.abs(fa))
        active[rows[done]] = False
        logger.debug(f"r={radius:.6g} iteration {iteration}: {int(np.sum(active))} starts active")

    return best_f, best_x


def _argmin(values: np.ndarray, points: np.ndarray) -> int:
    """Index of the minimum value; ties go to the lexicographically smallest point."""
    finite = np.flatnonzero(np.isfinite(values))
    keys = [points[finite, j] for j in reversed(range(points.shape[1]))] + [values[finite]]
    return int(finite[np.lexsort(keys)[0]])


def continue_minimum(objective: Objective, point: np.ndarray, r_from: float, r_to: float,
                     config: Optional[ScanConfig] = None,
                     previous: Optional[Tuple[float, np.ndarray]] = None) -> Optional[np.ndarray]:
    """
    Carry a sphere minimizer from |x| = r_from to |x| = r_to.

    The radius moves in geometric substeps no larger than
    continuation_ratio. Each substep predicts the next point by secant
    extrapolation through the last two tracked points (radial rescaling
    when only one is known), retracts it to the sphere and descends from
    it alone, so narrow curved valleys are followed instead of left.

    Args:
        objective: Objective being scanned
        point: Minimizer on |x| = r_from
        r_from: Radius of point
        r_to: Target radius
        config: Scan configuration
        previous: Optional (radius, point) tracked just before point

    Returns:
        The tracked point on |x| = r_to, or None when the objective became
        undefined along the way
    """
    config = config if config is not None else get_config().scan
    point = np.asarray(point, dtype=np.float64)
    if not (r_from > 0 and r_to > 0) or not np.all(np.isfinite(point)) or not np.any(point):
        return None
    ratio = max(float(config.continuation_ratio), 1.0 + 1e-6)
    count = max(1, int(math.ceil(abs(math.log(r_to / r_from)) / math.log(ratio) - 1e-9)))
    trail = [previous, (float(r_from), point)] if previous is not None else [(float(r_from), point)]

    for radius in r_from * (r_to / r_from) ** (np.arange(1, count + 1) / count):
        r_b, p_b = trail[-1]
        prediction = p_b * (radius / r_b)
        if len(trail) > 1 and trail[-2][0] != r_b:
            r_a, p_a = trail[-2]
            secant = p_b + (p_b - p_a) * (radius - r_b) / (r_b - r_a)
            if np.all(np.isfinite(secant)) and np.any(secant):
                prediction = secant
        values, points = _descend(objective, _retract(prediction[None, :], radius), radius, config)
        if not np.isfinite(values[0]):
            return None
        trail = [trail[-1], (float(radius), points[0])]
    return trail[-1][1]


def sphere_min(objective: Objective, r: float, starts: Optional[int] = None, seed: Optional[int] = None,
               config: Optional[ScanConfig] = None, warm_start: Optional[np.ndarray] = None,
               executor: Optional[Executor] = None) -> SphereMinimum:
    """
    Estimate inf over |x| = r of the objective.

    Args:
        objective: Objective to minimize
        r: Sphere radius (> 0)
        starts: Random starts (default from config)
        seed: 64-bit seed for the start streams (default from config)
        config: Scan configuration
        warm_start: Optional extra starts, one point (n,) or several (k, n),
            rescaled onto the sphere and always descended
        executor: Thread pool for start chunks (one is created for workers > 1)

    Returns:
        The best value and point over every candidate evaluated

    Raises:
        ObjectiveUndefinedError: If no start has a finite objective value
    """
    config = config if config is not None else get_config().scan
    starts = config.starts if starts is None else int(starts)
    seed = config.seed if seed is None else int(seed)
    if not r > 0:
        raise ValueError(f"Sphere radius must be positive, got {r}")

    warm = np.zeros((0, objective.n))
    if warm_start is not None:
        rows = np.atleast_2d(np.asarray(warm_start, dtype=np.float64))
        rows = rows[np.all(np.isfinite(rows), axis=-1) & np.any(rows != 0, axis=-1)]
        if len(rows):
            warm = _retract(rows, r)
    X = np.vstack([warm, start_points(objective.n, r, starts, seed)])

    chunks = np.array_split(np.arange(len(X)), max(1, min(config.workers, len(X))))
    if len(chunks) == 1:
        results = [_descend(objective, X, r, config)]
    else:
        own = executor is None
        pool = executor if executor is not None else ThreadPoolExecutor(max_workers=len(chunks))
        try:
            futures = [pool.submit(_descend, objective, X[chunk], r, config) for chunk in chunks]
            results = [future.result() for future in futures]
        finally:
            if own:
                pool.shutdown()

    values = np.concatenate([res[0] for res in results])
    points = np.concatenate([res[1] for res in results])
    initial = objective.values(X)
    warm_value = float(initial[0]) if len(warm) else None
    skipped = int(np.sum(~np.isfinite(initial)))

    if not np.any(np.isfinite(values)):
        raise ObjectiveUndefinedError(
            f"Objective {objective.describe()} is undefined at all {len(X)} starts on |x| = {r:g}"
        )
    if skipped:
        logger.debug(f"{skipped} of {len(X)} starts undefined on |x| = {r:g}")

    best = _argmin(values, points)
    return SphereMinimum(float(values[best]), points[best].copy(), float(r), starts, skipped, seed, warm_value)


# =============================================================================
# Radial Scans
# =============================================================================

@dataclass
class RadialScan:
    """Estimated infimum of an objective on every sphere of a schedule."""
    objective: str
    map_name: str
    radii: np.ndarray
    values: np.ndarray
    points: np.ndarray          # (R, n) argmins
    images: np.ndarray          # (R, m) map values at the argmins
    starts: np.ndarray
    seeds: List[int]
    skipped: np.ndarray
    errors: List[Optional[str]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def failed(self) -> int:
        return sum(1 for e in self.errors if e)

    def to_csv(self) -> str:
        columns = ["r", "value"] + [f"x{j + 1}" for j in range(self.n)] + \
                  [f"g{i + 1}" for i in range(self.images.shape[1])] + ["starts", "seed", "skipped"]
        rows = []
        for i, r in enumerate(self.radii):
            rows.append([float(r), float(self.values[i])]
                        + [float(v) for v in self.points[i]]
                        + [float(v) for v in self.images[i]]
                        + [int(self.starts[i]), int(self.seeds[i]), int(self.skipped[i])])
        return pack_csv(KIND_SCAN, columns, rows)

    @classmethod
    def from_csv(cls, text: str, objective: str = "", map_name: str = "") -> "RadialScan":
        columns, rows = unpack_csv(text, KIND_SCAN)
        n = sum(1 for c in columns if c.startswith("x"))
        m = sum(1 for c in columns if c.startswith("g"))
        table = np.array([[float(v) for v in row[:2 + n + m]] for row in rows]).reshape(-1, 2 + n + m)
        return cls(
            objective=objective, map_name=map_name,
            radii=table[:, 0], values=table[:, 1],
            points=table[:, 2:2 + n], images=table[:, 2 + n:],
            starts=np.array([int(row[2 + n + m]) for row in rows], dtype=int),
            seeds=[int(row[3 + n + m]) for row in rows],
            skipped=np.array([int(row[4 + n + m]) for row in rows], dtype=int),
            errors=[None] * len(rows),
        )

    def to_dict(self) -> dict:
        return {
            'objective': self.objective,
            'map': self.map_name,
            'radii': self.radii,
            'values': self.values,
            'points': self.points,
            'images': self.images,
            'starts': self.starts,
            'seeds': [str(s) for s in self.seeds],
            'skipped': self.skipped,
            'errors': self.errors,
        }


def radial_scan(objective: Objective, schedule: RadiusSchedule, starts: Optional[int] = None,
                seed: Optional[int] = None, config: Optional[ScanConfig] = None) -> RadialScan:
    """
    Run sphere_min on every radius of a schedule.

    Each radius is warm-started with the previous argmin carried over by
    continue_minimum and with that argmin rescaled onto the new sphere.
    The secant of the continuation uses the argmin before it only while
    consecutive argmins lie on one tracked path. Failures are recorded per
    radius and do not abort the scan.
    """
    config = config if config is not None else get_config().scan
    starts = config.starts if starts is None else int(starts)
    seed = config.seed if seed is None else int(seed)
    radii = schedule.radii
    n, m = objective.n, objective.fmap.n_out

    values = np.full(len(radii), np.nan)
    points = np.full((len(radii), n), np.nan)
    starts_run = np.zeros(len(radii), dtype=int)
    skipped = np.zeros(len(radii), dtype=int)
    seeds: List[int] = []
    errors: List[Optional[str]] = []
    logger.info(f"Scanning {objective.describe()} on {len(radii)} radii "
                f"[{schedule.r_min:g}, {schedule.r_max:g}]")

    history: List[Tuple[float, np.ndarray]] = []
    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for i, r in enumerate(radii):
            radius_seed = derive_seed(seed, i)
            seeds.append(radius_seed)
            tracked, warm = None, []
            if history:
                r_prev, p_prev = history[-1]
                try:
                    tracked = continue_minimum(objective, p_prev, r_prev, float(r), config,
                                               history[-2] if len(history) > 1 else None)
                except (ArithmeticError, np.linalg.LinAlgError) as exc:
                    logger.debug(f"Continuation to |x| = {r:g} failed: {exc}")
                if tracked is not None:
                    warm.append(tracked)
                warm.append(p_prev)
            try:
                result = sphere_min(objective, float(r), starts, radius_seed, config,
                                    np.array(warm) if warm else None, pool)
            except (ObjectiveUndefinedError, ArithmeticError, np.linalg.LinAlgError) as exc:
                logger.error(f"Sphere |x| = {r:g} failed: {exc}")
                errors.append(str(exc))
                history = []
                continue
            values[i] = result.value
            points[i] = result.point
            starts_run[i] = result.starts
            skipped[i] = result.skipped
            errors.append(None)
            if tracked is not None and np.linalg.norm(result.point - tracked) <= 1e-2 * r:
                history = [history[-1], (float(r), result.point)]
            else:
                history = [(float(r), result.point)]
            logger.debug(f"r={r:.6g} value={result.value:.6e}")
    finally:
        if pool is not None:
            pool.shutdown()

    images = np.full((len(radii), m), np.nan)
    ok = np.all(np.isfinite(points), axis=-1)
    if np.any(ok):
        images[ok] = objective.image(points[ok])
    logger.info(f"Scan of {objective.describe()} finished: "
                f"{int(np.sum(np.isfinite(values)))}/{len(radii)} radii resolved")
    return RadialScan(objective.describe(), objective.fmap.name, radii.copy(), values, points, images,
                      starts_run, seeds, skipped, errors)


# =============================================================================
# Tail Fits
# =============================================================================

@dataclass
class TailFit:
    """Power-law fit value ~ c r^alpha over the trailing decades of a scan."""
    alpha: float
    constant: float
    residual: float             # RMS in log space
    points: int
    ok: bool
    reason: str = ""


def tail_fit(scan: RadialScan, window: float = 2.0, min_points: int = 8) -> TailFit:
    """
    Least-squares fit of log value against log r over the last `window` decades.

    Returns a fit with ok=False (the inconclusive marker) when the window
    holds fewer than min_points resolved radii or any nonpositive value.
    """
    resolved = np.isfinite(scan.values)
    if not np.any(resolved):
        return TailFit(math.nan, math.nan, math.nan, 0, False, "no resolved radii")
    r_end = float(np.max(scan.radii[resolved]))
    in_window = resolved & (scan.radii >= r_end / 10.0 ** window * (1 - 1e-12))
    count = int(np.sum(in_window))
    if count < min_points:
        return TailFit(math.nan, math.nan, math.nan, count, False,
                       f"only {count} radii in the last {window:g} decades (need {min_points})")
    values = scan.values[in_window]
    if np.any(values <= 0):
        return TailFit(math.nan, math.nan, math.nan, count, False, "nonpositive values in the tail window")
    log_r = np.log(scan.radii[in_window])
    log_v = np.log(values)
    alpha, intercept = np.polyfit(log_r, log_v, 1)
    residual = float(np.sqrt(np.mean((log_v - (alpha * log_r + intercept)) ** 2)))
    return TailFit(float(alpha), float(np.exp(intercept)), residual, count, True)
