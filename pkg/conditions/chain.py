"""
Restricted Chains

For g = (g_1, ..., g_m) and constants c_1..c_k, the active function
g_{k+1} restricted to the level set X = G_k^{-1}(c) with G_k = (g_1..g_k).
Sphere candidates are pulled onto X by minimum-norm Gauss-Newton steps;
their radius is re-measured after projection and binned onto the schedule.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from common.config import AnalysisConfig, get_config
from expr.maps import ExprMap
from numlin.kernels import nu, nu_batch
from scan.objectives import RestrictedGradientObjective
from scan.schedule import RadiusSchedule, derive_seed, start_points
from scan.sphere import RadialScan, radial_scan

logger = logging.getLogger(__name__)


class ChainProjectionError(RuntimeError):
    """A level set cannot be used as a chart at the given anchor."""
    pass


@dataclass
class RestrictedChain:
    """g_{k+1} on G_k^{-1}(c_1, ..., c_k)."""
    base: ExprMap
    constants: np.ndarray
    anchor: Optional[np.ndarray] = None
    tol_level: float = 1e-9
    max_iterations: int = 50
    rank_tol: float = 1e-10
    discarded: int = field(default=0, compare=False)

    @property
    def depth(self) -> int:
        return len(self.constants)

    @cached_property
    def constraint_map(self) -> Optional[ExprMap]:
        if self.depth == 0:
            return None
        return self.base.select(range(self.depth), name=f"{self.base.name}:G{self.depth}")

    @cached_property
    def active_map(self) -> ExprMap:
        return self.base.select([self.depth], name=f"{self.base.name}:g{self.depth + 1}")

    def label(self) -> str:
        if self.depth == 0:
            return f"g{self.depth + 1}"
        levels = ",".join(f"{c:.6g}" for c in self.constants)
        return f"g{self.depth + 1}|G{self.depth}=({levels})"

    def residual(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.depth == 0:
            return np.zeros((len(X), 0))
        return self.constraint_map.evaluate(X, strict=False) - self.constants

    def on_chain(self, X: np.ndarray) -> np.ndarray:
        scale = self.tol_level * np.maximum(1.0, np.abs(self.constants))
        return np.all(np.abs(self.residual(X)) <= scale, axis=-1)

    def project(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Gauss-Newton projection onto the level set.

        Returns:
            (projected points, ok mask); points that diverge, lose rank or
            do not reach tol_level within max_iterations are not ok
        """
        Y = np.atleast_2d(np.asarray(X, dtype=np.float64)).copy()
        if self.depth == 0:
            return Y, np.ones(len(Y), dtype=bool)
        active = np.ones(len(Y), dtype=bool)
        for _ in range(self.max_iterations):
            done = self.on_chain(Y)
            active &= ~done
            rows = np.flatnonzero(active)
            if rows.size == 0:
                break
            J = self.constraint_map.jacobian(Y[rows], strict=False)
            R = self.residual(Y[rows])
            finite = np.all(np.isfinite(J), axis=(-2, -1)) & np.all(np.isfinite(R), axis=-1)
            J = np.where(finite[:, None, None], J, 0.0)
            independent = finite & (nu_batch(J) > self.rank_tol)
            step = np.einsum("bnk,bk->bn", np.linalg.pinv(J), np.where(finite[:, None], R, 0.0))
            Y[rows[independent]] -= step[independent]
            active[rows[~independent]] = False
        ok = self.on_chain(Y) & np.all(np.isfinite(Y), axis=-1)
        lost = int(np.sum(~ok))
        if lost:
            self.discarded += lost
            logger.debug(f"{lost} of {len(Y)} candidates failed to project onto {self.label()}")
        return Y, ok

    def sample(self, count: int, radius: float, seed: int) -> np.ndarray:
        """Up to `count` on-chain points projected from a ball of the given radius."""
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x636861696E]))
        n = self.base.n_in
        directions = rng.standard_normal((count, n))
        directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
        radii = radius * rng.random(count) ** (1.0 / n)
        Y, ok = self.project(directions * radii[:, None])
        return Y[ok]

    def objective(self, scale_by_radius: bool = False) -> RestrictedGradientObjective:
        return RestrictedGradientObjective(self.active_map, self.constraint_map, scale_by_radius, self.rank_tol)


def build_restricted_chain(g: ExprMap, constants, anchor=None,
                           config: Optional[AnalysisConfig] = None) -> RestrictedChain:
    """
    Build the chain for g_{k+1} on G_k^{-1}(constants).

    Args:
        g: Submersion-shaped map R^n -> R^m
        constants: Level values c_1..c_k (k < m)
        anchor: Point on the level set where the chart is validated

    Raises:
        ChainProjectionError: If the anchor is off the level set or the
            constraint Jacobian is rank deficient there
    """
    config = config if config is not None else get_config()
    constants = np.asarray(constants, dtype=np.float64).reshape(-1)
    if len(constants) >= g.n_out:
        raise ValueError(f"Depth {len(constants)} needs at least {len(constants) + 1} components")
    chain = RestrictedChain(g, constants, None if anchor is None else np.asarray(anchor, dtype=np.float64),
                            config.thresholds.tol_level, config.chain.max_projection_iterations,
                            config.thresholds.rank_tol)
    if chain.depth == 0:
        return chain
    if chain.anchor is None:
        raise ChainProjectionError("A restricted chain needs an anchor point on the level set")
    if not chain.on_chain(chain.anchor)[0]:
        raise ChainProjectionError(f"Anchor {chain.anchor.tolist()} is not on {chain.label()}")
    rank = nu(chain.constraint_map.jacobian(chain.anchor))
    if rank <= chain.rank_tol:
        raise ChainProjectionError(f"Constraint Jacobian is rank deficient at the anchor (nu = {rank:.3e})")
    return chain


def chain_scan(chain: RestrictedChain, schedule: RadiusSchedule, scale_by_radius: bool = False,
               config: Optional[AnalysisConfig] = None) -> RadialScan:
    """
    Radial profile of the restricted gradient norm (or restricted Rabier
    profile) on the chain.

    Depth 0 is an ordinary sphere scan. Otherwise sphere candidates are
    projected onto the level set, binned by their re-measured radius and
    reduced to the minimum per bin.
    """
    config = config if config is not None else get_config()
    objective = chain.objective(scale_by_radius)
    if chain.depth == 0:
        return radial_scan(objective, schedule, config=config.scan)

    radii = schedule.radii
    n = chain.base.n_in
    count = config.scan.starts * config.chain.oversample
    log_radii = np.log(radii)
    edges = (log_radii[1:] + log_radii[:-1]) / 2
    half = (log_radii[1] - log_radii[0]) / 2

    values = np.full(len(radii), np.nan)
    points = np.full((len(radii), n), np.nan)
    seeds: List[int] = []
    found = np.zeros(len(radii), dtype=int)
    logger.info(f"Scanning {objective.describe()} on {chain.label()} over {len(radii)} radii")

    for i, r in enumerate(radii):
        radius_seed = derive_seed(config.scan.seed, i)
        seeds.append(radius_seed)
        Y, ok = chain.project(start_points(n, float(r), count, radius_seed))
        Y = Y[ok]
        if len(Y) == 0:
            continue
        measured = np.log(np.linalg.norm(Y, axis=-1))
        inside = (measured >= log_radii[0] - half) & (measured <= log_radii[-1] + half)
        Y, measured = Y[inside], measured[inside]
        if len(Y) == 0:
            continue
        bins = np.searchsorted(edges, measured)
        phi = objective.values(Y)
        for b in np.unique(bins):
            members = np.flatnonzero((bins == b) & np.isfinite(phi))
            if members.size == 0:
                continue
            keys = [Y[members, j] for j in reversed(range(n))] + [phi[members]]
            best = members[np.lexsort(keys)[0]]
            found[b] += members.size
            if not phi[best] >= values[b]:
                values[b] = phi[best]
                points[b] = Y[best]

    errors = [None if found[i] else "no on-chain points in this radius bin" for i in range(len(radii))]
    images = np.full((len(radii), 1), np.nan)
    resolved = np.isfinite(values)
    if np.any(resolved):
        images[resolved] = objective.image(points[resolved])
    logger.info(f"Chain scan {chain.label()}: {int(np.sum(resolved))}/{len(radii)} bins populated, "
                f"{chain.discarded} candidates discarded")
    return RadialScan(f"{objective.describe()}|{chain.label()}", chain.base.name, radii.copy(), values, points,
                      images, found, seeds, np.zeros(len(radii), dtype=int), errors)
