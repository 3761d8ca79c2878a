"""
Monte Carlo engine for risks of expanded plug-in densities.

Everything is driven by one sampling primitive, squared_errors, which draws
||est(X) - theta||^2. Work is split into fixed-size chunks; chunk i always
uses the Philox substream (seed, i), and chunks are concatenated in index
order, so results are bit-identical for any worker count. The same seed is
reused across theta and c (common random numbers).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

import config
from core import divergence_quadrature, loss_from_sq_distance
from errors import DomainError, TheoremInapplicableError
from estimators import evaluate, space_points
from models import (
    AlphaLoss,
    DominanceCell,
    EpsilonEstimate,
    Estimator,
    MixtureDensity,
    Model,
    ParameterSpace,
    RiskEstimate,
    SpaceKind,
)

logger = logging.getLogger(__name__)


def substream(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for chunk `index` of master `seed`."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _chunk_sizes(n: int) -> list[int]:
    full, rest = divmod(n, config.CHUNK_SIZE)
    return [config.CHUNK_SIZE] * full + ([rest] if rest else [])


def _map_chunks(draw: Callable[[int, int], np.ndarray], n: int, workers: int) -> np.ndarray:
    sizes = _chunk_sizes(n)
    if workers <= 1 or len(sizes) == 1:
        parts = [draw(i, m) for i, m in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(draw, range(len(sizes)), sizes))
    return np.concatenate(parts)


def _as_theta(model: Model, theta) -> np.ndarray:
    t = np.atleast_1d(np.asarray(theta, dtype=float)).reshape(-1)
    if t.shape != (model.d,):
        raise DomainError(f"theta must have dimension d={model.d}, got {t.shape}")
    return t


def squared_errors(model: Model, est: Estimator, theta, n: int,
                   seed: int = config.DEFAULT_SEED, workers: int = 1) -> np.ndarray:
    """n draws of ||est(X) - theta||^2 with X ~ N(theta, sigma_x2 I)."""
    if n < config.MIN_SAMPLES:
        raise DomainError(f"n={n} is below the minimum of {config.MIN_SAMPLES} samples")
    t = _as_theta(model, theta)
    sigma_x = math.sqrt(model.sigma_x2)

    def draw(index: int, size: int) -> np.ndarray:
        x = t + sigma_x * substream(seed, index).standard_normal((size, model.d))
        diff = evaluate(est, x, model) - t
        return np.einsum("ij,ij->i", diff, diff)

    return _map_chunks(draw, n, workers)


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def mc_risk(model: Model, est: Estimator, c: float, loss: AlphaLoss, theta, n: int = config.N_ORACLE,
            seed: int = config.DEFAULT_SEED, workers: int = 1) -> RiskEstimate:
    """Risk of N(est(X), c^2 sigma_y2 I) at theta; alpha = -1 uses the per-sample KL loss."""
    sq = squared_errors(model, est, theta, n, seed, workers)
    mean, stderr = _mean_se(np.asarray(loss_from_sq_distance(model, sq, c, loss)))
    return RiskEstimate(mean=mean, stderr=stderr, n=n, seed=seed)


# Epsilon search

def _z_sampler(model: Model, est: Estimator, n: int, seed: int, workers: int) -> Callable[[tuple], np.ndarray]:
    """Z = ||est(X) - theta||^2 / sigma_y2 per theta, cached so many alphas share draws."""
    cache: dict[tuple, np.ndarray] = {}

    def z_at(theta: tuple) -> np.ndarray:
        if theta not in cache:
            cache[theta] = squared_errors(model, est, np.array(theta), n, seed, workers) / model.sigma_y2
        return cache[theta]

    return z_at


def _damped_mean(z: np.ndarray, loss: AlphaLoss) -> tuple[float, float]:
    rate = (1.0 - loss.alpha ** 2) / 8.0
    return _mean_se(z * np.exp(-rate * z) if rate > 0 else z)


def _radial_theta(space: ParameterSpace, d: int, radius: float) -> tuple:
    if space.kind == SpaceKind.HALFLINE:
        return (float(radius),)
    return (float(radius),) + (0.0,) * (d - 1)


def _epsilon_search(model: Model, est: Estimator, space: ParameterSpace, loss: AlphaLoss,
                    z_at: Callable[[tuple], np.ndarray]) -> EpsilonEstimate:
    points = space_points(space, model.d, est)

    if space.kind == SpaceKind.GRID:
        stats = [_damped_mean(z_at(tuple(float(v) for v in p)), loss) for p in points]
        best = int(np.argmin([m for m, _ in stats]))
        return _finish_epsilon(
            loss, stats[best], tuple(float(v) for v in points[best]),
            tuple(float(v) for v in np.linalg.norm(points, axis=1)), None,
        )

    values: dict[float, tuple[float, float]] = {}

    def visit(radius: float) -> float:
        if radius not in values:
            values[radius] = _damped_mean(z_at(_radial_theta(space, model.d, radius)), loss)
        return values[radius][0]

    for p in points:
        visit(float(p[0]))

    top = float(points[-1, 0])
    if not space.is_bounded:
        # watch the tail until doubling the radius stops moving the value
        for _ in range(config.EPSILON_TAIL_DOUBLINGS):
            previous = values[top][0]
            top *= 2.0
            if abs(visit(top) - previous) < config.EPSILON_TOL:
                break

    for _ in range(config.EPSILON_REFINE_LEVELS):
        grid = sorted(values)
        best = min(grid, key=lambda rad: values[rad][0])
        before = values[best][0]
        i = grid.index(best)
        for j in (i - 1, i + 1):
            if 0 <= j < len(grid):
                visit(0.5 * (grid[i] + grid[j]))
        if before - min(m for m, _ in values.values()) < config.EPSILON_TOL:
            break

    grid = sorted(values)
    best = min(grid, key=lambda rad: values[rad][0])
    tail_value = values[top][0] if not space.is_bounded else None
    return _finish_epsilon(loss, values[best], _radial_theta(space, model.d, best), tuple(grid), tail_value)


def _finish_epsilon(loss: AlphaLoss, stat: tuple[float, float], arg_theta: tuple,
                    grid: tuple, tail_value: Optional[float]) -> EpsilonEstimate:
    value, stderr = stat
    if value <= config.STDERR_MULTIPLIER * stderr or value < config.EPSILON_FLOOR:
        logger.warning(f"epsilon {value:.3g} (stderr {stderr:.3g}) at alpha={loss.alpha} is indistinguishable from zero")
        raise TheoremInapplicableError(f"epsilon indistinguishable from zero at alpha={loss.alpha}")
    logger.info(f"epsilon at alpha={loss.alpha}: {value:.6g} +/- {stderr:.2g} at theta={arg_theta}")
    return EpsilonEstimate(value=value, arg_theta=arg_theta, stderr_at_min=stderr, grid=grid,
                           tail_value=tail_value, alpha=loss.alpha)


def mc_epsilon(model: Model, est: Estimator, space: ParameterSpace, loss: AlphaLoss,
               n: int = config.N_EPSILON, seed: int = config.DEFAULT_SEED, workers: int = 1) -> EpsilonEstimate:
    """
    inf over the space of E(Z exp(-(1-alpha^2) Z / 8)), Z = ||est(X) - theta||^2 / sigma_y2.

    Radial spaces search the radius: the initial grid, tail doubling for
    unbounded spaces, then midpoint refinement around the argmin. Refinement
    only adds points, so the reported minimum never increases.
    """
    return _epsilon_search(model, est, space, loss, _z_sampler(model, est, n, seed, workers))


def epsilon_profile(model: Model, est: Estimator, space: ParameterSpace, alphas: Sequence[float],
                    n: int = config.N_EPSILON, seed: int = config.DEFAULT_SEED, workers: int = 1) -> list[EpsilonEstimate]:
    """epsilon(alpha) for several alphas from one shared set of draws."""
    z_at = _z_sampler(model, est, n, seed, workers)
    return [_epsilon_search(model, est, space, AlphaLoss(alpha=a), z_at) for a in alphas]


# Dominance scans

def _theta_rows(model: Model, thetas) -> list[tuple[float, np.ndarray]]:
    """Scalars are positions along the first axis; rows are full theta vectors."""
    arr = np.asarray(thetas, dtype=float)
    if arr.ndim == 1:
        rows = []
        for t in arr:
            theta = np.zeros(model.d)
            theta[0] = t
            rows.append((float(t), theta))
        return rows
    return [(float(np.linalg.norm(row)), _as_theta(model, row)) for row in arr]


def dominance_scan(model: Model, est: Estimator, c_values: Sequence[float], theta_grid, loss: AlphaLoss,
                   n: int = config.N_EPSILON, seed: int = config.DEFAULT_SEED, workers: int = 1) -> list[DominanceCell]:
    """Paired risk differences risk(c) - risk(1) on a theta grid, one row per (theta, c)."""
    cells = []
    for theta_norm, theta in _theta_rows(model, theta_grid):
        sq = squared_errors(model, est, theta, n, seed, workers)
        plug = np.asarray(loss_from_sq_distance(model, sq, 1.0, loss))
        plug_var = plug.var(ddof=1)
        for c in c_values:
            vals = np.asarray(loss_from_sq_distance(model, sq, c, loss))
            delta, stderr = _mean_se(vals - plug)
            unpaired = math.sqrt((vals.var(ddof=1) + plug_var) / n)
            cells.append(DominanceCell(theta_norm=theta_norm, c=c, delta=delta, stderr=stderr,
                                       unpaired_stderr=unpaired, risk=float(vals.mean()),
                                       plugin_risk=float(plug.mean())))
    return cells


def empirical_cutoff(model: Model, est: Estimator, loss: AlphaLoss, theta_grid,
                     n: int = config.N_EPSILON, seed: int = config.DEFAULT_SEED,
                     tol: float = config.EMPIRICAL_TOL, workers: int = 1) -> float:
    """
    Largest c^2 for which the upper confidence bound of risk(c) - risk(1)
    stays <= 0 at every grid theta. Coarse scan in c^2, then bisection.
    """
    samples = [squared_errors(model, est, theta, n, seed, workers) for _, theta in _theta_rows(model, theta_grid)]
    plugs = [np.asarray(loss_from_sq_distance(model, sq, 1.0, loss)) for sq in samples]

    def dominates(c2: float) -> bool:
        c = math.sqrt(c2)
        for sq, plug in zip(samples, plugs):
            delta, stderr = _mean_se(np.asarray(loss_from_sq_distance(model, sq, c, loss)) - plug)
            if delta + config.EMPIRICAL_UCB_Z * stderr > 0:
                return False
        return True

    good, bad = 1.0, None
    steps = int(round((config.EMPIRICAL_C2_CAP - 1.0) / config.EMPIRICAL_SCAN_STEP))
    for i in range(1, steps + 1):
        c2 = 1.0 + i * config.EMPIRICAL_SCAN_STEP
        if not dominates(c2):
            bad = c2
            break
        good = c2
    if bad is None:
        logger.warning(f"dominance persists up to the c^2 cap {config.EMPIRICAL_C2_CAP}; returning the cap")
        return config.EMPIRICAL_C2_CAP

    while bad - good > tol:
        mid = 0.5 * (good + bad)
        if dominates(mid):
            good = mid
        else:
            bad = mid
    logger.info(f"empirical cut-off for '{est.spec}' at alpha={loss.alpha}: c^2 <= {good:.6g}")
    return good


# Scale mixtures

@lru_cache(maxsize=4096)
def _mixture_loss(d: int, s: float, atoms: tuple, alpha: float, tol: float) -> float:
    return divergence_quadrature(d, s, atoms, AlphaLoss(alpha=alpha), tol)


def _mixture_losses(model: Model, mix: MixtureDensity, loss: AlphaLoss, sq: np.ndarray, tol: float) -> np.ndarray:
    """
    Per-sample loss of the mixture. It depends on X only through
    s = ||est(X) - theta|| / sigma_y, so it is integrated on a fixed s-grid
    and interpolated with a cubic spline.
    """
    s = np.sqrt(sq / model.sigma_y2)
    step = config.MIXTURE_TABLE_STEP
    n_nodes = max(4, int(math.ceil(float(s.max()) / step)) + 1)
    nodes = step * np.arange(n_nodes)
    table = [_mixture_loss(model.d, float(node), mix.atoms, loss.alpha, tol) for node in nodes]
    return CubicSpline(nodes, table)(s)


def mixture_risk(model: Model, mix: MixtureDensity, loss: AlphaLoss, theta, n: int = config.N_MIXTURE,
                 seed: int = config.DEFAULT_SEED, workers: int = 1, tol: float = config.QUAD_TOL) -> RiskEstimate:
    """Risk of sum_i w_i N(est(X), c_i^2 sigma_y2 I) at theta."""
    sq = squared_errors(model, mix.base, theta, n, seed, workers)
    mean, stderr = _mean_se(_mixture_losses(model, mix, loss, sq, tol))
    return RiskEstimate(mean=mean, stderr=stderr, n=n, seed=seed)


def mixture_scan(model: Model, mix: MixtureDensity, loss: AlphaLoss, theta_grid, n: int = config.N_MIXTURE,
                 seed: int = config.DEFAULT_SEED, workers: int = 1, tol: float = config.QUAD_TOL) -> list[DominanceCell]:
    """
    Paired mixture-minus-plug-in risk differences on a theta grid. The c
    column holds the root mean square expansion sqrt(sum_i w_i c_i^2).
    """
    c_rms = math.sqrt(sum(w * c * c for c, w in mix.atoms))
    cells = []
    for theta_norm, theta in _theta_rows(model, theta_grid):
        sq = squared_errors(model, mix.base, theta, n, seed, workers)
        plug = np.asarray(loss_from_sq_distance(model, sq, 1.0, loss))
        vals = _mixture_losses(model, mix, loss, sq, tol)
        delta, stderr = _mean_se(vals - plug)
        unpaired = math.sqrt((vals.var(ddof=1) + plug.var(ddof=1)) / n)
        cells.append(DominanceCell(theta_norm=theta_norm, c=c_rms, delta=delta, stderr=stderr,
                                   unpaired_stderr=unpaired, risk=float(vals.mean()), plugin_risk=float(plug.mean())))
    return cells
