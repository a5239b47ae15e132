"""
Condition Battery

Finite-sample decision rules for the Palais-Smale, Rabier (K-infinity),
integral, spectral and wedge-ratio conditions, their restricted-chain
variants, and the Sing(g) emptiness check that the fibration inference
relies on. Every rule degrades to `inconclusive` instead of raising when
the evidence is insufficient.
"""

import logging
import math
from dataclasses import asdict
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.integrate
import scipy.optimize
import scipy.stats
from scipy.stats import qmc

from common.config import AnalysisConfig, ThresholdConfig, get_config
from conditions.chain import ChainProjectionError, RestrictedChain, build_restricted_chain, chain_scan
from conditions.report import ConditionReport, Outcome, SpectralReport
from expr.maps import ExprMap
from numlin.kernels import EigenConvergenceError, eigenvalues, nu, nu_batch
from scan.objectives import GradientNormObjective, RabierObjective, WedgeRatioObjective
from scan.schedule import RadiusSchedule
from scan.sphere import RadialScan, TailFit, radial_scan, tail_fit
from scan.witness import witness_from_indices

logger = logging.getLogger(__name__)


def _setup(config: Optional[AnalysisConfig], schedule: Optional[RadiusSchedule]):
    config = config if config is not None else get_config()
    schedule = schedule if schedule is not None else RadiusSchedule.from_config(config.schedule)
    return config, schedule


def _thresholds(config: AnalysisConfig, schedule: RadiusSchedule, **extra) -> dict:
    recorded = asdict(config.thresholds)
    recorded['r_mid'] = _r_mid(config.thresholds, schedule)
    recorded['schedule'] = {'r_min': schedule.r_min, 'r_max': schedule.r_max,
                            'points_per_decade': schedule.points_per_decade}
    recorded.update(extra)
    return recorded


def _r_mid(thresholds: ThresholdConfig, schedule: RadiusSchedule) -> float:
    return float(thresholds.r_mid) if thresholds.r_mid is not None else schedule.r_mid


def _scalar(g: ExprMap, condition: str) -> None:
    if g.n_out != 1:
        raise ValueError(f"{condition} needs a scalar function, got {g.n_out} components")


def gradient_scan(g: ExprMap, schedule: RadiusSchedule, config: AnalysisConfig) -> RadialScan:
    """m(r) = inf over |x| = r of |grad g|."""
    return radial_scan(GradientNormObjective(g), schedule, config=config.scan)


def rabier_scan(g: ExprMap, schedule: RadiusSchedule, config: AnalysisConfig) -> RadialScan:
    """rho(r) = inf over |x| = r of |x| nu(Dg)."""
    return radial_scan(RabierObjective(g), schedule, config=config.scan)


def _trailing_run(scan: RadialScan, below: float) -> List[int]:
    """Indices of the trailing resolved radii whose value is below a threshold."""
    resolved = np.flatnonzero(scan.finite)
    run: List[int] = []
    for i in resolved[::-1]:
        if scan.values[i] < below:
            run.append(int(i))
        else:
            break
    return run[::-1]


def _holds_beyond(scan: RadialScan, r_mid: float, floor: float) -> Tuple[bool, float]:
    """Whether every radius >= r_mid resolved with value >= floor; also the minimum seen."""
    beyond = scan.radii >= r_mid * (1 - 1e-12)
    if not np.any(beyond):
        return False, math.nan
    values = scan.values[beyond]
    if not np.all(np.isfinite(values)):
        return False, float(np.nanmin(values)) if np.any(np.isfinite(values)) else math.nan
    lowest = float(np.min(values))
    return lowest >= floor, lowest


# =============================================================================
# Palais-Smale
# =============================================================================

def check_palais_smale(g: ExprMap, schedule: Optional[RadiusSchedule] = None,
                       config: Optional[AnalysisConfig] = None,
                       scan: Optional[RadialScan] = None) -> ConditionReport:
    """
    PS condition for a scalar g.

    Fails when m(r) drops below tol_ps on at least witness_min_points
    trailing radii while g at the argmins stays within bound_band; holds
    when m(r) >= floor_ps for every r >= r_mid.
    """
    _scalar(g, "palais_smale")
    config, schedule = _setup(config, schedule)
    t = config.thresholds
    scan = scan if scan is not None else gradient_scan(g, schedule, config)
    thresholds = _thresholds(config, schedule)
    r_mid = _r_mid(t, schedule)
    base = dict(condition="palais_smale", target=g.name, thresholds=thresholds, scans={'gradient_norm': scan})

    if not np.any(scan.finite):
        return ConditionReport(verdict=Outcome.INCONCLUSIVE, rationale="no radius resolved", **base)

    near = scan.finite & (scan.radii <= t.sing_ball_radius) & (scan.values <= t.sing_tol)
    if np.any(near):
        r = float(scan.radii[np.flatnonzero(near)[0]])
        return ConditionReport(verdict=Outcome.INCONCLUSIVE,
                               rationale=f"critical point of g near |x| = {r:g}; PS scan not meaningful",
                               evidence={'min_gradient_norm': float(np.nanmin(scan.values))}, **base)

    run = _trailing_run(scan, t.tol_ps)
    while len(run) >= t.witness_min_points:
        band = float(np.ptp(scan.images[run, 0]))
        if band <= t.bound_band:
            witness = witness_from_indices(scan, run)
            if witness is not None and len(witness) >= t.witness_min_points:
                logger.info(f"PS fails for {g.name}: m(r) < {t.tol_ps:g} on {len(run)} radii, g-band {band:.3g}")
                return ConditionReport(
                    verdict=Outcome.FAILS,
                    rationale=(f"m(r) < {t.tol_ps:g} on the last {len(run)} radii while g stays in a band "
                               f"of width {band:.3g}"),
                    evidence={'band': band, 'tail_min': float(np.min(scan.values[run])),
                              'g_values': scan.images[run, 0]},
                    witness=witness, **base)
        run = run[1:]

    ok, lowest = _holds_beyond(scan, r_mid, t.floor_ps)
    evidence = {'min_beyond_r_mid': lowest, 'min_gradient_norm': float(np.nanmin(scan.values))}
    if ok:
        logger.info(f"PS holds for {g.name}: m(r) >= {lowest:.3g} beyond r = {r_mid:g}")
        return ConditionReport(verdict=Outcome.HOLDS,
                               rationale=f"m(r) >= {t.floor_ps:g} for all scanned r >= {r_mid:g}",
                               evidence=evidence, **base)
    return ConditionReport(verdict=Outcome.INCONCLUSIVE,
                           rationale=f"m(r) neither stays above {t.floor_ps:g} nor decays with bounded g",
                           evidence=evidence, **base)


# =============================================================================
# Rabier / K-infinity
# =============================================================================

def _max_spread(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    differences = points[:, None, :] - points[None, :, :]
    return float(np.max(np.linalg.norm(differences, axis=-1)))


def _rabier_decision(scan: RadialScan, condition: str, target: str, thresholds: dict,
                     t: ThresholdConfig, r_mid: float) -> ConditionReport:
    base = dict(condition=condition, target=target, thresholds=thresholds, scans={'rabier': scan})
    if not np.any(scan.finite):
        reason = next((e for e in scan.errors if e), "no radius resolved")
        return ConditionReport(verdict=Outcome.INCONCLUSIVE, rationale=f"no usable profile: {reason}", **base)

    run = _trailing_run(scan, t.tol_rabier)
    while len(run) >= t.witness_min_points:
        spread = _max_spread(scan.images[run])
        if spread <= t.cluster_eps:
            witness = witness_from_indices(scan, run)
            if witness is not None and len(witness) >= t.witness_min_points:
                value = np.mean(scan.images[run], axis=0)
                logger.info(f"Rabier fails for {target}: asymptotic critical value {value.tolist()}")
                return ConditionReport(
                    verdict=Outcome.FAILS,
                    rationale=(f"rho(r) < {t.tol_rabier:g} on the last {len(run)} radii with g(argmin) "
                               f"clustered within {spread:.3g}"),
                    evidence={'asymptotic_critical_value': value, 'spread': spread,
                              'tail_min': float(np.min(scan.values[run]))},
                    witness=witness, **base)
        run = run[1:]

    ok, lowest = _holds_beyond(scan, r_mid, t.floor_rabier)
    evidence = {'min_beyond_r_mid': lowest, 'failed_radii': scan.failed}
    if ok:
        logger.info(f"Rabier holds for {target}: rho(r) >= {lowest:.3g} beyond r = {r_mid:g}")
        return ConditionReport(verdict=Outcome.HOLDS,
                               rationale=f"rho(r) >= {t.floor_rabier:g} for all scanned r >= {r_mid:g}",
                               evidence=evidence, **base)
    rationale = f"rho(r) neither stays above {t.floor_rabier:g} nor decays with convergent g"
    if scan.failed:
        rationale += f"; {scan.failed} radii unresolved"
    return ConditionReport(verdict=Outcome.INCONCLUSIVE, rationale=rationale, evidence=evidence, **base)


def check_rabier(g: ExprMap, schedule: Optional[RadiusSchedule] = None,
                 restricted: Optional[RestrictedChain] = None,
                 config: Optional[AnalysisConfig] = None,
                 scan: Optional[RadialScan] = None) -> ConditionReport:
    """
    K-infinity emptiness for g: R^n -> R^m (m <= n), or for the active
    function of a restricted chain.

    Fails when rho(r) = inf |x| nu(Dg) decays below tol_rabier on trailing
    radii whose g(argmin) cluster within cluster_eps (the cluster mean is
    the asymptotic critical value); holds when rho(r) >= floor_rabier
    beyond r_mid.
    """
    config, schedule = _setup(config, schedule)
    t = config.thresholds
    thresholds = _thresholds(config, schedule)
    r_mid = _r_mid(t, schedule)
    if restricted is not None and restricted.depth > 0:
        target = f"{g.name}:{restricted.label()}"
        if scan is None:
            scan = chain_scan(restricted, schedule, scale_by_radius=True, config=config)
        report = _rabier_decision(scan, "rabier", target, thresholds, t, r_mid)
        if restricted.discarded:
            report.evidence['discarded_candidates'] = restricted.discarded
        return report
    if g.n_out > g.n_in:
        raise ValueError(f"Rabier condition needs m <= n, got {g.n_out} > {g.n_in}")
    scan = scan if scan is not None else rabier_scan(g, schedule, config)
    return _rabier_decision(scan, "rabier", g.name, thresholds, t, r_mid)


# =============================================================================
# Integral Condition
# =============================================================================

def _vanished_from(scan: RadialScan, floor: float) -> Optional[float]:
    """First radius of a trailing run of positive values at or below floor that ends the profile."""
    resolved = np.flatnonzero(scan.finite)
    if resolved.size == 0:
        return None
    start = None
    for i in resolved[::-1]:
        if 0 < scan.values[i] <= floor:
            start = int(i)
        else:
            break
    return float(scan.radii[start]) if start is not None else None


def classify_integral(scan: RadialScan, thresholds: Optional[ThresholdConfig] = None,
                      ) -> Tuple[Outcome, TailFit, str, dict]:
    """
    Classify the divergence of the integral of a radial profile.

    A profile whose trailing values drop to vanish_floor or below has
    vanished numerically and counts as convergent, with the accumulated
    integral as its bound.

    Returns:
        (outcome, tail fit, rationale, evidence); holds means divergent,
        fails means convergent with a finite bound in evidence['bound']
    """
    t = thresholds if thresholds is not None else get_config().thresholds
    fit = tail_fit(scan, t.tail_window, t.min_tail_points)
    resolved = scan.finite
    evidence = {'alpha': fit.alpha, 'tail_constant': fit.constant, 'residual': fit.residual,
                'tail_points': fit.points}
    if np.sum(resolved) >= 2:
        radii, values = scan.radii[resolved], scan.values[resolved]
        head = float(radii[0] * values[0])
        integral = float(scipy.integrate.trapezoid(values, radii))
        evidence.update({'head': head, 'integral': integral, 'r_end': float(radii[-1])})
    else:
        head = integral = math.nan

    vanished = _vanished_from(scan, t.vanish_floor)
    if vanished is not None and math.isfinite(integral):
        evidence.update({'vanished_from': vanished, 'tail': 0.0, 'bound': float(head + integral)})
        return (Outcome.FAILS, fit,
                f"profile stays at or below {t.vanish_floor:g} from r = {vanished:.4g} on: integral converges "
                f"(estimate {evidence['bound']:.4g})", evidence)
    if not fit.ok:
        return Outcome.INCONCLUSIVE, fit, f"tail fit unavailable: {fit.reason}", evidence
    if fit.alpha >= -1 + t.margin and fit.residual <= t.residual_max:
        return (Outcome.HOLDS, fit,
                f"tail exponent {fit.alpha:.3g} >= {-1 + t.margin:g}: integral diverges", evidence)
    if fit.alpha <= -1 - t.margin:
        r_end = evidence['r_end']
        tail = fit.constant * r_end ** (fit.alpha + 1) / (-fit.alpha - 1)
        evidence['tail'] = float(tail)
        evidence['bound'] = float(head + integral + tail)
        return (Outcome.FAILS, fit,
                f"tail exponent {fit.alpha:.3g} <= {-1 - t.margin:g}: integral converges "
                f"(estimate {evidence['bound']:.4g})", evidence)
    return (Outcome.INCONCLUSIVE, fit,
            f"tail exponent {fit.alpha:.3g} (residual {fit.residual:.3g}) is too close to -1 to decide", evidence)


def check_integral(g: Union[ExprMap, RestrictedChain], schedule: Optional[RadiusSchedule] = None,
                   config: Optional[AnalysisConfig] = None,
                   scan: Optional[RadialScan] = None) -> ConditionReport:
    """
    Integral condition: the integral over r of m(r) diverges.

    For a restricted chain the gradient is projected to the tangent space
    of the level set and radii are binned after projection.
    """
    config, schedule = _setup(config, schedule)
    if isinstance(g, RestrictedChain):
        target = f"{g.base.name}:{g.label()}"
        if scan is None:
            scan = chain_scan(g, schedule, scale_by_radius=False, config=config)
    else:
        _scalar(g, "integral")
        target = g.name
        scan = scan if scan is not None else gradient_scan(g, schedule, config)
    outcome, fit, rationale, evidence = classify_integral(scan, config.thresholds)
    logger.info(f"Integral condition for {target}: {outcome.value} ({rationale})")
    return ConditionReport("integral", target, outcome, rationale, evidence,
                           _thresholds(config, schedule), {'gradient_norm': scan})


# =============================================================================
# Spectral Condition
# =============================================================================

def spectral_points(n: int, config: AnalysisConfig) -> np.ndarray:
    """Scrambled-Sobol directions spread over geometric radial shells."""
    spec = config.spectral
    r_max = spec.r_max if spec.r_max is not None else config.schedule.r_max
    shells = np.geomspace(spec.r_min, r_max, max(1, spec.shells))
    sobol = qmc.Sobol(d=n, scramble=True, seed=config.scan.seed)
    exponent = int(math.log2(spec.points)) if spec.points > 0 else 0
    if 2 ** exponent == spec.points:
        u = sobol.random_base2(exponent)
    else:
        u = sobol.random(spec.points)
    gauss = scipy.stats.norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    norms = np.linalg.norm(gauss, axis=-1, keepdims=True)
    directions = gauss / np.where(norms > 0, norms, 1.0)
    return directions * shells[np.arange(len(directions)) % len(shells)][:, None]


def _distance_to_interval(values: np.ndarray, epsilon: float, realness_tol: float) -> np.ndarray:
    """Distance of complex values to the real segment [0, epsilon]."""
    real, imag = values.real, np.abs(values.imag)
    imag = np.where(imag <= realness_tol, 0.0, imag)
    dx = np.maximum(np.maximum(-real, real - epsilon), 0.0)
    return np.hypot(dx, imag)


def check_spectral(f: ExprMap, epsilon: Optional[float] = None,
                   config: Optional[AnalysisConfig] = None) -> ConditionReport:
    """
    Spectral condition Spec(f) and [0, epsilon) disjoint, sampled.

    Fails at the first sampled eigenvalue inside [0, epsilon); holds when
    every sampled eigenvalue is farther than gap_floor from the segment.
    """
    config = config if config is not None else get_config()
    if f.n_in != f.n_out:
        raise ValueError(f"Spectral condition needs a square map, got {f.n_out}x{f.n_in}")
    epsilon = config.spectral.epsilon if epsilon is None else float(epsilon)
    t = config.thresholds
    points = spectral_points(f.n_in, config)
    jac = f.jacobian(points, strict=False)

    kept, spectra, skipped = [], [], 0
    for i, matrix in enumerate(jac):
        if not np.all(np.isfinite(matrix)):
            skipped += 1
            continue
        try:
            spectra.append(eigenvalues(matrix))
            kept.append(i)
        except EigenConvergenceError as exc:
            logger.warning(f"Skipping spectral sample {points[i].tolist()}: {exc}")
            skipped += 1
    if skipped:
        logger.info(f"{skipped} spectral samples skipped")

    thresholds = {'epsilon': epsilon, 'gap_floor': t.gap_floor, 'realness_tol': t.realness_tol,
                  'points': config.spectral.points, 'shells': config.spectral.shells}
    if not kept:
        return ConditionReport("spectral", f.name, Outcome.INCONCLUSIVE, "no sample point could be evaluated",
                               {'skipped': skipped}, thresholds)

    values = np.array(spectra)
    distances = _distance_to_interval(values, epsilon, t.realness_tol)
    report = SpectralReport(epsilon, points[kept], values, np.min(distances, axis=-1), skipped)
    evidence = report.summary()
    evidence['real_range'] = [float(np.min(values.real)), float(np.max(values.real))]

    inside = (distances == 0) & (values.real < epsilon)
    if np.any(inside):
        p, k = np.argwhere(inside)[0]
        eigenvalue = values[p, k]
        evidence.update({'offending_point': report.points[p], 'eigenvalue': eigenvalue,
                         'bound': float(eigenvalue.real)})
        logger.info(f"Spectral condition fails for {f.name}: eigenvalue {eigenvalue.real:.6g} in [0, {epsilon:g})")
        return ConditionReport("spectral", f.name, Outcome.FAILS,
                               f"sampled eigenvalue {eigenvalue.real:.6g} lies in [0, {epsilon:g})",
                               evidence, thresholds, spectral=report)
    if report.min_distance > t.gap_floor:
        logger.info(f"Spectral condition holds for {f.name}: gap {report.min_distance:.3g}")
        return ConditionReport("spectral", f.name, Outcome.HOLDS,
                               f"every sampled eigenvalue is at least {report.min_distance:.3g} "
                               f"from [0, {epsilon:g})", evidence, thresholds, spectral=report)
    return ConditionReport("spectral", f.name, Outcome.INCONCLUSIVE,
                           f"sampled spectrum comes within {report.min_distance:.3g} of [0, {epsilon:g})",
                           evidence, thresholds, spectral=report)


# =============================================================================
# Wedge-Ratio (Balreira) Condition
# =============================================================================

def check_balreira(f: ExprMap, k: int = 1, schedule: Optional[RadiusSchedule] = None,
                   config: Optional[AnalysisConfig] = None) -> ConditionReport:
    """
    For each i <= k, divergence of the integral of
    inf |grad f_1 ^ ... ^ grad f_n| / |wedge without grad f_i|.
    """
    config, schedule = _setup(config, schedule)
    if f.n_in != f.n_out:
        raise ValueError("Wedge-ratio condition needs a square map")
    if not 1 <= k <= f.n_out:
        raise ValueError(f"k must be in 1..{f.n_out}, got {k}")
    thresholds = _thresholds(config, schedule, k=k)
    parts, scans = [], {}

    for i in range(k):
        objective = WedgeRatioObjective(f, i, config.thresholds.gram_clamp)
        scan = radial_scan(objective, schedule, config=config.scan)
        scans[f"ratio_{i + 1}"] = scan
        target = f"{f.name}:i={i + 1}"
        resolved = scan.finite
        evidence = {'min_ratio': float(np.nanmin(scan.values)) if np.any(resolved) else math.nan,
                    'max_ratio': float(np.nanmax(scan.values)) if np.any(resolved) else math.nan}
        if not np.all(resolved):
            parts.append(ConditionReport(
                "balreira", target, Outcome.INCONCLUSIVE,
                f"wedge denominator vanished or underflowed on {int(np.sum(~resolved))} radii",
                evidence, thresholds, {'ratio': scan}))
            continue
        outcome, fit, rationale, integral = classify_integral(scan, config.thresholds)
        evidence.update(integral)
        parts.append(ConditionReport("balreira", target, outcome, rationale, evidence, thresholds, {'ratio': scan}))

    report = combine_parts("balreira", f.name, parts, thresholds)
    report.scans = scans
    return report


# =============================================================================
# Sing(g) and the Inferred Fibration
# =============================================================================

def check_singular_set(g: ExprMap, config: Optional[AnalysisConfig] = None) -> ConditionReport:
    """
    Evidence that Sing(g) is empty on the ball of radius sing_ball_radius:
    min nu(Dg) over seeded samples, refined by Nelder-Mead from the best ones.
    """
    config = config if config is not None else get_config()
    t = config.thresholds
    n = g.n_in
    rng = np.random.default_rng(np.random.SeedSequence([config.scan.seed, 0x73696E67]))
    directions = rng.standard_normal((t.sing_samples, n))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    points = directions * (t.sing_ball_radius * rng.random(t.sing_samples) ** (1.0 / n))[:, None]
    jac = g.jacobian(points, strict=False)
    finite = np.all(np.isfinite(jac), axis=(-2, -1))
    values = np.full(len(points), np.inf)
    values[finite] = nu_batch(jac[finite])

    def rank_measure(x):
        if np.linalg.norm(x) > t.sing_ball_radius:
            return np.inf
        matrix = g.jacobian(x, strict=False)
        return nu(matrix) if np.all(np.isfinite(matrix)) else np.inf

    best_value, best_point = math.inf, None
    for i in np.argsort(values, kind="stable")[:8]:
        if not np.isfinite(values[i]):
            continue
        result = scipy.optimize.minimize(rank_measure, points[i], method="Nelder-Mead",
                                         options={'maxiter': 200 * n, 'xatol': 1e-12, 'fatol': 1e-15})
        candidates = [(float(values[i]), points[i]), (float(result.fun), np.asarray(result.x))]
        for value, point in candidates:
            if value < best_value:
                best_value, best_point = value, point

    thresholds = {'sing_tol': t.sing_tol, 'sing_ball_radius': t.sing_ball_radius, 'sing_samples': t.sing_samples}
    evidence = {'min_nu': best_value, 'argmin': best_point, 'bound': best_value}
    if best_point is None:
        return ConditionReport("singular_set", g.name, Outcome.INCONCLUSIVE,
                               "Dg could not be evaluated on the ball", {}, thresholds)
    if best_value <= t.sing_tol:
        return ConditionReport("singular_set", g.name, Outcome.FAILS,
                               f"nu(Dg) = {best_value:.3e} at {np.round(best_point, 6).tolist()}: "
                               f"Sing(g) is not empty", evidence, thresholds)
    return ConditionReport("singular_set", g.name, Outcome.HOLDS,
                           f"min nu(Dg) = {best_value:.3e} > {t.sing_tol:g} on |x| <= {t.sing_ball_radius:g}",
                           evidence, thresholds)


def infer_fibration(rabier: ConditionReport, singular: ConditionReport) -> ConditionReport:
    """
    Locally trivial fibration, inferred from K-infinity and Sing(g) both
    empty, since the bifurcation set lies in their union. Never fails.
    """
    if rabier.holds and singular.holds:
        return ConditionReport("fibration", rabier.target, Outcome.HOLDS,
                               "inferred: K-infinity(g) and Sing(g) sampled empty",
                               {'rabier': rabier.verdict.value, 'singular_set': singular.verdict.value},
                               inferred=True)
    return ConditionReport("fibration", rabier.target, Outcome.INCONCLUSIVE,
                           f"not inferable: rabier {rabier.verdict.value}, singular_set {singular.verdict.value}",
                           {'rabier': rabier.verdict.value, 'singular_set': singular.verdict.value},
                           inferred=True)


# =============================================================================
# Restricted Chains
# =============================================================================

def combine_parts(condition: str, target: str, parts: List[ConditionReport],
                  thresholds: Optional[dict] = None) -> ConditionReport:
    """Holds iff every part holds; fails if any part fails."""
    evidence = {'parts': {part.target: part.verdict.value for part in parts}}
    failing = [part for part in parts if part.fails]
    if failing:
        first = failing[0]
        if 'bound' in first.evidence:
            evidence['bound'] = first.evidence['bound']
        return ConditionReport(condition, target, Outcome.FAILS, f"{first.target}: {first.rationale}",
                               evidence, thresholds or {}, witness=first.witness, parts=parts)
    if parts and all(part.holds for part in parts):
        return ConditionReport(condition, target, Outcome.HOLDS, f"all {len(parts)} parts hold",
                               evidence, thresholds or {}, parts=parts)
    pending = [part.target for part in parts if not part.holds]
    return ConditionReport(condition, target, Outcome.INCONCLUSIVE,
                           f"undecided parts: {', '.join(pending) or 'none evaluated'}",
                           evidence, thresholds or {}, parts=parts)


def level_chains(g: ExprMap, config: Optional[AnalysisConfig] = None
                 ) -> Tuple[List[RestrictedChain], List[str]]:
    """
    Chains for g_1 and for g_{k+1} on sampled level sets G_k^{-1}(c),
    k = 1..m-1. Level constants are images of seeded anchor points.

    Returns:
        (chains, problems) where problems describe anchors that could not
        be used
    """
    config = config if config is not None else get_config()
    chains = [build_restricted_chain(g, [], config=config)]
    problems: List[str] = []
    rng = np.random.default_rng(np.random.SeedSequence([config.scan.seed, 0x6C6576656C]))
    for k in range(1, g.n_out):
        for _ in range(config.chain.levels_per_depth):
            anchor = rng.standard_normal(g.n_in) * config.chain.anchor_radius
            constants = g.evaluate(anchor, strict=False)[:k]
            try:
                chains.append(build_restricted_chain(g, constants, anchor, config))
            except ChainProjectionError as exc:
                logger.warning(f"Skipping level set of {g.name} at depth {k}: {exc}")
                problems.append(f"depth {k}: {exc}")
    return chains, problems


def _chain_report(condition: str, g: ExprMap, schedule: Optional[RadiusSchedule],
                  config: Optional[AnalysisConfig], single) -> ConditionReport:
    config, schedule = _setup(config, schedule)
    chains, problems = level_chains(g, config)
    parts = [single(chain, schedule, config) for chain in chains]
    for problem in problems:
        parts.append(ConditionReport(condition, f"{g.name}:{problem.split(':')[0]}", Outcome.INCONCLUSIVE,
                                     problem, {}, {}))
    return combine_parts(condition, g.name, parts, _thresholds(config, schedule))


def integral_chain(g: ExprMap, schedule: Optional[RadiusSchedule] = None,
                   config: Optional[AnalysisConfig] = None) -> ConditionReport:
    """Integral condition for g_1 and every sampled restriction g_{k+1}|G_k^{-1}(c)."""
    return _chain_report("integral_chain", g, schedule, config,
                         lambda chain, s, c: check_integral(chain if chain.depth else chain.active_map, s, c))


def rabier_chain(g: ExprMap, schedule: Optional[RadiusSchedule] = None,
                 config: Optional[AnalysisConfig] = None) -> ConditionReport:
    """K-infinity emptiness for g_1 and every sampled restriction g_{k+1}|G_k^{-1}(c)."""
    return _chain_report("rabier_chain", g, schedule, config,
                         lambda chain, s, c: check_rabier(chain.active_map, s, chain, c))
