"""
Divergence kernel and the closed-form alpha-divergence loss of a
scale-expanded Gaussian predictive density N(est, c^2 sigma_y2 I) for the
density of Y ~ N(theta, sigma_y2 I).

Every distance-dependent quantity takes ||est - theta||^2 as its primitive;
vectors are reduced to it on entry.

The loss uses the non-negative kernel
    h(z) = 4/(1-a^2) * ((1+a)/2 z - z^((1+a)/2) + (1-a)/2),   |a| < 1
    h(z) = z - log z - 1,                                      a = -1
Its linear terms integrate to (1+a)/2 + (1-a)/2 = 1 against q(y|theta)
(both densities integrate to 1), so the risk formulas written for the
kernel 4/(1-a^2) (1 - z^((1+a)/2)) are unchanged.
"""

import logging
import math
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import erfc, gammaln

import config
from errors import DomainError, QuadratureError
from models import AlphaLoss, LossKernelParams, Model

logger = logging.getLogger(__name__)

KL = AlphaLoss(alpha=-1.0)
_LOG_RATIO_CLIP = 700.0


def norm_cdf(x):
    """Standard normal CDF via erfc; keeps full relative accuracy in the lower tail."""
    return erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))[()] * 0.5


def exp_neg(x):
    """exp(-x), flushed to exactly 0 once x exceeds EXP_UNDERFLOW."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-np.minimum(x, config.EXP_UNDERFLOW))
    return np.where(x > config.EXP_UNDERFLOW, 0.0, out)[()]


def _check_c(c: float) -> None:
    if not (math.isfinite(c) and c >= 1.0):
        raise DomainError(f"expansion c={c} must be a finite real >= 1")


def _require_finite_alpha(loss: AlphaLoss) -> None:
    if loss.is_kl:
        raise DomainError("this formula needs |alpha| < 1; use the Kullback-Leibler variant")


def _point(model: Model, v, name: str) -> np.ndarray:
    p = np.atleast_1d(np.asarray(v, dtype=float))
    if p.shape != (model.d,):
        raise DomainError(f"{name} must have dimension d={model.d}, got shape {p.shape}")
    return p


def sq_distance(model: Model, theta_hat, theta) -> float:
    """||theta_hat - theta||^2 after checking both points live in R^d."""
    diff = _point(model, theta_hat, "theta_hat") - _point(model, theta, "theta")
    return float(diff @ diff)


def h_alpha(z, loss: AlphaLoss):
    """Non-negative divergence kernel; 0 iff z = 1. Accepts scalars or arrays."""
    z = np.asarray(z, dtype=float)
    if not np.all(z > 0):
        raise DomainError("h_alpha is defined for z > 0 only")
    if loss.is_kl:
        out = z - np.log(z) - 1.0
    else:
        beta = (1.0 + loss.alpha) / 2.0
        out = loss.scale * (beta * z - z ** beta + (1.0 - beta))
    return np.maximum(out, 0.0)[()]


def _log_a1(c: float, alpha: float) -> float:
    # c^(1-a) as exp((1-a) ln c) keeps precision for c near 1
    bc = (1.0 - alpha) * c * c + (1.0 + alpha)
    return 0.5 * (math.log(2.0) + (1.0 - alpha) * math.log(c) - math.log(bc))


def kernel_params(model: Model, c: float, loss: AlphaLoss) -> LossKernelParams:
    """gamma0(c), A1(c) and B(c) of the closed-form loss."""
    _check_c(c)
    _require_finite_alpha(loss)
    alpha = loss.alpha
    bc = (1.0 - alpha) * c * c + (1.0 + alpha)
    gamma0 = 2.0 * model.sigma_y2 * bc / (1.0 - alpha ** 2)
    return LossKernelParams(gamma0=gamma0, a1=math.exp(_log_a1(c, alpha)), bc=bc)


def loss_from_sq_distance(model: Model, sq_dist, c: float, loss: AlphaLoss):
    """
    Loss of N(est, c^2 sigma_y2 I) as a function of ||est - theta||^2.
    Vectorized over sq_dist; the KL branch is exact rather than a limit.
    """
    _check_c(c)
    sq = np.asarray(sq_dist, dtype=float)
    if np.any(sq < 0):
        raise DomainError("squared distances must be non-negative")
    d = model.d
    if loss.is_kl:
        out = 0.5 * d * (2.0 * math.log(c) + 1.0 / (c * c) - 1.0) + sq / (2.0 * c * c * model.sigma_y2)
        return out[()]
    gamma0 = kernel_params(model, c, loss).gamma0
    exponent = d * _log_a1(c, loss.alpha) - sq / (2.0 * gamma0)
    return (loss.scale * -np.expm1(exponent))[()]


def loss_closed(model: Model, theta_hat, theta, c: float, loss: AlphaLoss) -> float:
    """Closed-form L_alpha(theta, q_{theta_hat, c}) for |alpha| < 1."""
    _require_finite_alpha(loss)
    return float(loss_from_sq_distance(model, sq_distance(model, theta_hat, theta), c, loss))


def loss_kl(model: Model, theta_hat, theta, c: float) -> float:
    """Kullback-Leibler divergence from N(theta, sigma_y2 I) to N(theta_hat, c^2 sigma_y2 I)."""
    return float(loss_from_sq_distance(model, sq_distance(model, theta_hat, theta), c, KL))


def _scalar_kernel(loss: AlphaLoss) -> Callable[[float], float]:
    """h_alpha on plain floats, for integrands evaluated point by point."""
    if loss.is_kl:
        return lambda z: max(z - math.log(z) - 1.0, 0.0)
    beta = (1.0 + loss.alpha) / 2.0
    scale = loss.scale
    return lambda z: max(scale * (beta * z - z ** beta + (1.0 - beta)), 0.0)


def divergence_quadrature(
    d: int,
    s: float,
    atoms: Sequence[tuple[float, float]],
    loss: AlphaLoss,
    tol: float = config.QUAD_TOL,
) -> float:
    """
    Integrate h_alpha(q_hat / q) q directly, in standardized coordinates.

    q is N(0, I_d); q_hat is the scale mixture sum_i w_i N(s e1, c_i^2 I_d).
    Rotational symmetry about e1 reduces the integral to the axial
    coordinate u1 and, for d >= 2, the radial distance rho of the
    orthogonal part (chi with d-1 degrees of freedom).
    """
    if s < 0:
        raise DomainError("standardized distance s must be non-negative")
    if not atoms or any(c <= 0 or w <= 0 for c, w in atoms):
        raise DomainError("mixture atoms need positive scales and weights")
    # log w_i - d log c_i and 1 / (2 c_i^2) per atom
    terms = [(math.log(w) - d * math.log(c), 0.5 / (c * c)) for c, w in atoms]
    half_log_2pi = 0.5 * math.log(2.0 * math.pi)
    h = _scalar_kernel(loss)

    def log_ratio(u1: float, rho2: float) -> float:
        dist2 = (u1 - s) ** 2 + rho2
        comps = [log_norm - inv * dist2 for log_norm, inv in terms]
        top = max(comps)
        lr = top + math.log(math.fsum(math.exp(v - top) for v in comps)) + 0.5 * (u1 * u1 + rho2)
        return min(max(lr, -_LOG_RATIO_CLIP), _LOG_RATIO_CLIP)

    def kernel(u1: float, rho2: float) -> float:
        return h(math.exp(log_ratio(u1, rho2)))

    width = config.QUAD_STDDEVS * max(1.0, max(c for c, _ in atoms))
    u_lo, u_hi = -width, s + width
    epsabs = 0.1 * tol
    breaks = sorted({0.0, float(s)})

    if d == 1:
        value, abserr = integrate.quad(
            lambda u1: kernel(u1, 0.0) * math.exp(-0.5 * u1 * u1 - half_log_2pi),
            u_lo, u_hi, epsabs=epsabs, epsrel=1e-10, limit=200, points=breaks,
        )
    else:
        k = d - 1
        log_chi_norm = -(0.5 * k - 1.0) * math.log(2.0) - gammaln(0.5 * k)

        def integrand(u1: float, rho: float) -> float:
            if rho == 0.0 and k > 1:
                return 0.0
            log_rho = (k - 1) * math.log(rho) if k > 1 else 0.0
            log_density = -0.5 * (u1 * u1 + rho * rho) - half_log_2pi + log_rho + log_chi_norm
            return kernel(u1, rho * rho) * math.exp(log_density)

        value, abserr = integrate.nquad(
            integrand,
            [[u_lo, u_hi], [0.0, width]],
            opts=[
                {"epsabs": epsabs, "epsrel": 1e-10, "limit": 200, "points": breaks},
                {"epsabs": epsabs, "epsrel": 1e-10, "limit": 200},
            ],
        )

    if abserr > 10.0 * tol:
        raise QuadratureError("loss quadrature did not converge", achieved=abserr, target=tol)
    return max(float(value), 0.0)


def loss_quadrature(model: Model, theta_hat, theta, c: float, loss: AlphaLoss,
                    tol: float = config.QUAD_TOL) -> float:
    """L_alpha(theta, q_{theta_hat, c}) by numerical integration; oracle for loss_closed."""
    _check_c(c)
    s = math.sqrt(sq_distance(model, theta_hat, theta) / model.sigma_y2)
    return divergence_quadrature(model.d, s, ((c, 1.0),), loss, tol)
