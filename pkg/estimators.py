"""
Plug-in point estimators and the moment bounds that feed the
moment-based cut-off.

Estimators act on batches: x has shape (n, d) (or (d,) for one point).
"""

import logging
import math
from typing import Sequence

import numpy as np
from pydantic import ValidationError

import config
from errors import DomainError, TheoremInapplicableError
from models import (
    BoundsProvenance,
    Estimator,
    EstimatorKind,
    Model,
    MomentBounds,
    ParameterSpace,
    Shrinkage,
    ShrinkageKind,
    SpaceKind,
)

logger = logging.getLogger(__name__)

_SHRINKAGE_KINDS = (EstimatorKind.JAMES_STEIN, EstimatorKind.JAMES_STEIN_PLUS, EstimatorKind.BARANCHIK)


def _shrink_ratio(est: Estimator, sq_norm: np.ndarray, model: Model) -> np.ndarray:
    """s(||x||^2) / ||x||^2 per row; +inf where x = 0 so the factor clips to 0."""
    safe = np.where(sq_norm > 0, sq_norm, 1.0)
    if est.kind == EstimatorKind.BARANCHIK:
        ratio = est.shrinkage(safe) / safe
    else:
        ratio = (model.d - 2) * model.sigma_x2 / safe
        if est.kind == EstimatorKind.JAMES_STEIN_PLUS:
            ratio = np.minimum(ratio, 1.0)
    return np.where(sq_norm > 0, ratio, np.inf)


def evaluate(est: Estimator, x, model: Model) -> np.ndarray:
    """
    theta_hat(x) for one point or a batch of rows.

    James-Stein kinds map x = 0 to 0 (the shrink-to-zero limit).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    if xs.shape[1] != model.d:
        raise DomainError(f"estimator input has dimension {xs.shape[1]}, model has d={model.d}")
    if not np.all(np.isfinite(xs)):
        raise DomainError("estimator input must be finite")

    if est.kind == EstimatorKind.IDENTITY:
        out = xs.copy()
    elif est.kind == EstimatorKind.AFFINE:
        out = est.a * xs
    elif est.kind == EstimatorKind.TRUNCATED:
        out = np.maximum(xs, 0.0)
    elif est.kind in _SHRINKAGE_KINDS:
        if est.kind != EstimatorKind.BARANCHIK and model.d < 3:
            raise DomainError(f"James-Stein estimators need d >= 3, got d={model.d}")
        sq_norm = np.einsum("ij,ij->i", xs, xs)
        ratio = _shrink_ratio(est, sq_norm, model)
        factor = np.where(np.isinf(ratio), 0.0, 1.0 - ratio)
        out = factor[:, None] * xs
    else:
        out = np.asarray(est.func(xs), dtype=float)
        if out.shape != xs.shape:
            raise DomainError(f"custom estimator returned shape {out.shape}, expected {xs.shape}")
    return out[0] if single else out


def parse_estimator(spec: str) -> Estimator:
    """identity | affine:a | truncated | js | jsplus | baranchik:clip:b | baranchik:rational:b:f"""
    parts = spec.strip().split(":")
    head, args = parts[0].lower(), parts[1:]
    try:
        if head == "identity" and not args:
            return Estimator.identity()
        if head == "truncated" and not args:
            return Estimator.truncated()
        if head == "js" and not args:
            return Estimator.james_stein()
        if head == "jsplus" and not args:
            return Estimator.james_stein_plus()
        if head == "affine" and len(args) == 1:
            return Estimator.affine(float(args[0]))
        if head == "baranchik" and args:
            kind = ShrinkageKind(args[0].lower())
            if kind == ShrinkageKind.CLIP and len(args) == 2:
                return Estimator.baranchik(Shrinkage(kind=kind, b=float(args[1])))
            if kind == ShrinkageKind.RATIONAL and len(args) == 3:
                return Estimator.baranchik(Shrinkage(kind=kind, b=float(args[1]), f=float(args[2])))
    except (ValueError, ValidationError) as e:
        raise DomainError(f"invalid estimator '{spec}': {e}") from e
    raise DomainError(f"unknown estimator '{spec}'")


def berger_condition(f1: float, f2: float, d: int) -> bool:
    """Constants of the quartic-loss shrinkage family: 0 < f1 <= d-2 and f2 >= 2 + (d+1) f1 / (d+2)."""
    return 0.0 < f1 <= d - 2 and f2 >= 2.0 + (d + 1) * f1 / (d + 2)


def space_points(space: ParameterSpace, d: int, est: Estimator) -> np.ndarray:
    """
    Materialise a parameter space as an (m, d) array of theta values.

    Radial spaces (R^d, balls) are laid out along the first axis, which is
    only valid for orthogonally equivariant estimators.
    """
    if space.kind == SpaceKind.GRID:
        pts = np.asarray(space.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != d:
            raise DomainError(f"grid points must have dimension d={d}")
        return pts
    if space.kind == SpaceKind.HALFLINE:
        if d != 1:
            raise DomainError("the half-line space is one-dimensional")
        return np.linspace(0.0, space.max_radius, space.n_points)[:, None]
    if not est.is_orthogonally_equivariant:
        raise DomainError(f"estimator '{est.spec}' is not rotation equivariant; supply a half-line or explicit grid")
    top = space.radius if space.kind == SpaceKind.BALL else space.max_radius
    radii = np.linspace(0.0, top, space.n_points)
    pts = np.zeros((radii.size, d))
    pts[:, 0] = radii
    return pts


def _norm_range(space: ParameterSpace, d: int, est: Estimator) -> tuple[float, float]:
    norms = np.linalg.norm(space_points(space, d, est), axis=1)
    return float(norms.min()), float(norms.max())


def _affine_moments(model: Model, a: float, norm_theta: float) -> tuple[float, float]:
    """E||aX - theta||^2 and E||aX - theta||^4 via the noncentral chi-square moments."""
    scale = a * a * model.sigma_x2
    lam = (1.0 - a) ** 2 * norm_theta ** 2 / scale
    mean = model.d + lam
    second = 2.0 * (model.d + 2.0 * lam) + mean * mean
    return scale * mean, scale * scale * second


def moment_bounds(est: Estimator, model: Model, space: ParameterSpace,
                  n: int = config.N_EPSILON, seed: int = config.DEFAULT_SEED, workers: int = 1) -> MomentBounds:
    """
    b0 <= E||est - theta||^2 / sigma_y2 <= b1 and E||est - theta||^4 / sigma_y2^2 <= b2 over the space.

    Analytic for X and for aX on bounded spaces; otherwise Monte Carlo over
    the space grid with each bound pushed 3 standard errors outwards.
    """
    d, r = model.d, model.r
    if est.kind == EstimatorKind.IDENTITY or (est.kind == EstimatorKind.AFFINE and est.a == 1.0):
        return MomentBounds(b0=d * r, b1=d * r, b2=(d * d + 2 * d) * r * r, provenance=BoundsProvenance.ANALYTIC)

    if est.kind == EstimatorKind.AFFINE:
        if not space.is_bounded:
            raise TheoremInapplicableError(
                f"affine estimator a={est.a} has unbounded quadratic risk over an unbounded space"
            )
        lo, hi = _norm_range(space, d, est)
        m1_lo, _ = _affine_moments(model, est.a, lo)
        m1_hi, m2_hi = _affine_moments(model, est.a, hi)
        s2 = model.sigma_y2
        return MomentBounds(b0=m1_lo / s2, b1=m1_hi / s2, b2=m2_hi / (s2 * s2), provenance=BoundsProvenance.ANALYTIC)

    from montecarlo import squared_errors

    logger.warning(f"moment bounds for '{est.spec}' fall back to Monte Carlo (n={n} per theta)")
    k = config.STDERR_MULTIPLIER
    b0, b1, b2 = math.inf, 0.0, 0.0
    for theta in space_points(space, d, est):
        z = squared_errors(model, est, theta, n, seed, workers) / model.sigma_y2
        m1, se1 = z.mean(), z.std(ddof=1) / math.sqrt(z.size)
        z2 = z * z
        m2, se2 = z2.mean(), z2.std(ddof=1) / math.sqrt(z.size)
        b0 = min(b0, m1 - k * se1)
        b1 = max(b1, m1 + k * se1)
        b2 = max(b2, m2 + k * se2)
    if not b0 > 0:
        logger.warning(f"lower quadratic bound for '{est.spec}' is not distinguishable from 0 at n={n}")
        raise TheoremInapplicableError(f"estimator '{est.spec}' looks degenerate: b0={b0:.3g}")
    return MomentBounds(b0=b0, b1=b1, b2=b2, provenance=BoundsProvenance.MONTE_CARLO)


def quartic_bound_from_componentwise(m1: float, m2: float, d: int) -> float:
    """E||est - theta||^4 <= m2^2 + d m1, given sum_i E(est_i - theta_i)^4 <= m1 and E||est - theta||^2 <= m2."""
    if m1 < 0 or m2 < 0:
        raise DomainError("componentwise bounds must be non-negative")
    return m2 * m2 + d * m1


def damped_mean_lower_bound(samples: Sequence[float], s: float) -> float:
    """
    Lower bound E(T) exp(-s E(T^2) / E(T)) on E(T exp(-s T)), from sample
    moments of a non-negative T.
    """
    t = np.asarray(samples, dtype=float)
    if s <= 0:
        raise DomainError(f"damping s={s} must be positive")
    if t.size == 0 or np.any(t < 0):
        raise DomainError("samples must be non-empty and non-negative")
    mean = float(t.mean())
    if mean == 0.0:
        raise TheoremInapplicableError("E(T) = 0: the damped-mean bound is degenerate")
    return mean * math.exp(-s * float(np.mean(t * t)) / mean)
