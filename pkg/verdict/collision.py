"""
Collision Search

Direct falsification of injectivity: pairs x != x' with f(x) = f(x'),
found by batched minimum-norm Gauss-Newton on F(x, x') = f(x) - f(x')
with a hinge penalty that keeps the pair apart, then Newton-refined
without the penalty. Not finding a pair is not evidence of injectivity.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from common.config import AnalysisConfig, CollisionConfig, get_config
from expr.maps import ExprMap
from numlin.kernels import nu_batch

logger = logging.getLogger(__name__)


@dataclass
class CollisionPair:
    """Two distinct points with the same image."""
    x: np.ndarray
    x_prime: np.ndarray
    residual: float
    separation: float

    def verify(self, f: ExprMap, config: Optional[CollisionConfig] = None) -> bool:
        """
        Re-evaluate f at both points from scratch.

        The image gap must be small in absolute terms and small against
        nu(Df) |x - x'|; a gap of the size the linearization predicts is a
        near miss along a weak direction, not a collision.
        """
        config = config if config is not None else get_config().collision
        a = f.evaluate(self.x, strict=False)
        b = f.evaluate(self.x_prime, strict=False)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            return False
        gap = float(np.linalg.norm(a - b))
        scale = max(1.0, float(np.linalg.norm(a)), float(np.linalg.norm(b)))
        apart = float(np.linalg.norm(self.x - self.x_prime))
        if gap > config.residual_tol * scale or apart < config.separation:
            return False
        jac = f.jacobian(np.stack([self.x, self.x_prime]), strict=False)
        if not np.all(np.isfinite(jac)):
            return False
        return gap <= config.linear_ratio * float(np.max(nu_batch(jac))) * apart

    def to_dict(self) -> Dict[str, Any]:
        return {'x': self.x, 'x_prime': self.x_prime, 'residual': self.residual, 'separation': self.separation}


def _residuals(f: ExprMap, Z: np.ndarray, config: CollisionConfig):
    """Stacked residual [f(x) - f(x'); hinge] and its Jacobian for pairs Z = (x, x')."""
    n = f.n_in
    X, Xp = Z[:, :n], Z[:, n:]
    F = f.evaluate(X, strict=False) - f.evaluate(Xp, strict=False)
    J = np.concatenate([f.jacobian(X, strict=False), -f.jacobian(Xp, strict=False)], axis=-1)

    d = X - Xp
    gap = np.linalg.norm(d, axis=-1)
    active = gap < config.penalty_radius
    hinge = np.where(active, config.penalty * (config.penalty_radius - gap) / config.penalty_radius, 0.0)
    unit = d / np.where(gap > 0, gap, 1.0)[:, None]
    row = np.where(active[:, None], -config.penalty / config.penalty_radius * unit, 0.0)
    R = np.concatenate([F, hinge[:, None]], axis=-1)
    J = np.concatenate([J, np.concatenate([row, -row], axis=-1)[:, None, :]], axis=-2)
    return R, J


def _refine(f: ExprMap, Z: np.ndarray, config: CollisionConfig):
    """
    Full minimum-norm Newton steps on f(x) - f(x') alone, kept while the
    image gap drops and the pair stays apart.

    Returns:
        (refined pairs, image gap per pair)
    """
    n = f.n_in
    Z = Z.copy()
    F = f.evaluate(Z[:, :n], strict=False) - f.evaluate(Z[:, n:], strict=False)
    gap = np.linalg.norm(F, axis=-1)
    active = np.isfinite(gap) & (gap > 0)
    for _ in range(config.refine_iterations):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        J = np.concatenate([f.jacobian(Z[rows, :n], strict=False), -f.jacobian(Z[rows, n:], strict=False)], axis=-1)
        step = -np.einsum("bkr,br->bk", np.linalg.pinv(np.nan_to_num(J)), F[rows])
        trial = Z[rows] + step
        F_t = f.evaluate(trial[:, :n], strict=False) - f.evaluate(trial[:, n:], strict=False)
        gap_t = np.linalg.norm(F_t, axis=-1)
        apart = np.linalg.norm(trial[:, :n] - trial[:, n:], axis=-1)
        better = np.isfinite(gap_t) & (gap_t < gap[rows]) & (apart >= config.separation)
        take = rows[better]
        Z[take], F[take], gap[take] = trial[better], F_t[better], gap_t[better]
        active[rows[~better]] = False
        active[take[gap_t[better] == 0]] = False
    return Z, gap


def collision_search(f: ExprMap, attempts: Optional[int] = None, seed: Optional[int] = None,
                     config: Optional[AnalysisConfig] = None) -> Optional[CollisionPair]:
    """
    Search for a verified collision pair.

    Args:
        f: Square map
        attempts: Number of random start pairs (default from config)
        seed: Seed of the start pairs (default: the scan seed)
        config: Analysis configuration

    Returns:
        The verified pair with the smallest residual, or None
    """
    config = config if config is not None else get_config()
    c = config.collision
    if f.n_in != f.n_out:
        raise ValueError(f"Collision search needs a square map, got {f.n_out}x{f.n_in}")
    attempts = c.attempts if attempts is None else int(attempts)
    seed = config.scan.seed if seed is None else int(seed)
    n = f.n_in

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x636F6C6C]))
    Z = rng.uniform(-c.sample_scale, c.sample_scale, size=(attempts, 2 * n))
    R, J = _residuals(f, Z, c)
    cost = np.sum(R ** 2, axis=-1)
    active = np.isfinite(cost)
    logger.info(f"Collision search on {f.name}: {attempts} start pairs")

    for iteration in range(c.max_iterations):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        Jr = np.nan_to_num(J[rows])
        step = -np.einsum("bkr,br->bk", np.linalg.pinv(Jr), np.nan_to_num(R[rows]))
        t = np.ones(rows.size)
        accepted = np.zeros(rows.size, dtype=bool)
        for _ in range(12):
            pending = ~accepted
            if not np.any(pending):
                break
            trial = Z[rows] + t[:, None] * step
            R_t, J_t = _residuals(f, trial, c)
            cost_t = np.sum(R_t ** 2, axis=-1)
            better = pending & np.isfinite(cost_t) & (cost_t < cost[rows])
            take = rows[better]
            Z[take], R[take], J[take], cost[take] = trial[better], R_t[better], J_t[better], cost_t[better]
            accepted |= better
            t = np.where(accepted, t, t / 2)
        active[rows[~accepted]] = False
        logger.debug(f"iteration {iteration}: {int(np.sum(active))} pairs still improving")

    Z, gap = _refine(f, Z, c)
    n_found, best = 0, None
    for i in np.flatnonzero(np.isfinite(cost) & np.isfinite(gap)):
        pair = CollisionPair(Z[i, :n].copy(), Z[i, n:].copy(), float(gap[i]),
                             float(np.linalg.norm(Z[i, :n] - Z[i, n:])))
        if not pair.verify(f, c):
            continue
        n_found += 1
        key = (pair.residual, tuple(pair.x), tuple(pair.x_prime))
        if best is None or key < best[0]:
            best = (key, pair)

    if best is None:
        logger.info(f"No collision found for {f.name} in {attempts} attempts")
        return None
    pair = best[1]
    logger.info(f"Collision for {f.name}: {np.round(pair.x, 6).tolist()} and {np.round(pair.x_prime, 6).tolist()} "
                f"({n_found} verified pairs)")
    return pair
