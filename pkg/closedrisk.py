"""
Closed-form frequentist risks of expanded plug-in predictive densities.

Covered families: the identity estimator X (constant risk), the affine
estimator aX, and the truncated estimator max(X, 0) in one dimension.
Shrinkage estimator risks have no closed form and go through montecarlo;
positive-part James-Stein only gets its epsilon at the origin by quadrature.
"""

import logging
import math

import numpy as np
from scipy import integrate
from scipy.stats import chi2

import config
from core import _check_c, _log_a1, _require_finite_alpha, exp_neg, kernel_params, norm_cdf
from errors import DomainError, QuadratureError
from models import AlphaLoss, Model, TruncatedRiskParams

logger = logging.getLogger(__name__)


def risk_affine(model: Model, a: float, norm_theta: float, c: float, loss: AlphaLoss) -> float:
    """
    Risk of N(aX, c^2 sigma_y2 I). Depends on theta only through ||theta||.
    a = 1 reduces to risk_identity for every theta.
    """
    if not (0.0 < a <= 1.0):
        raise DomainError(f"affine scale a={a} must lie in (0, 1]")
    if norm_theta < 0:
        raise DomainError("norm_theta must be non-negative")
    _check_c(c)
    kp = kernel_params(model, c, loss)
    spread = kp.gamma0 + a * a * model.sigma_x2
    log_factor = model.d * _log_a1(c, loss.alpha) + 0.5 * model.d * math.log(kp.gamma0 / spread)
    bias = (a - 1.0) ** 2 * norm_theta ** 2 / (2.0 * spread)
    return loss.scale * (1.0 - math.exp(log_factor) * float(exp_neg(bias)))


def risk_identity(model: Model, c: float, loss: AlphaLoss) -> float:
    """Constant risk of N(X, c^2 sigma_y2 I)."""
    return risk_affine(model, 1.0, 0.0, c, loss)


def risk_affine_limit(loss: AlphaLoss) -> float:
    """||theta|| -> infinity limit of risk_affine for a < 1: the loss supremum 4/(1-alpha^2)."""
    return loss.scale


def c_opt(model: Model, loss: AlphaLoss) -> float:
    """Risk-minimizing expansion for X: sqrt(1 + r(1-alpha)/2); sqrt(1+r) under KL."""
    return math.sqrt(1.0 + model.r * (1.0 - loss.alpha) / 2.0)


def risk_ratio_identity(model: Model, loss: AlphaLoss) -> float:
    """Plug-in risk over the risk at c_opt."""
    _require_finite_alpha(loss)
    d, r, alpha = model.d, model.r, loss.alpha
    num = -math.expm1(-0.5 * d * math.log1p(r * (1.0 - alpha ** 2) / 4.0))
    den = -math.expm1(-0.25 * d * (1.0 + alpha) * math.log1p(r * (1.0 - alpha) / 2.0))
    return num / den


def risk_kl_plugin(model: Model, mse: float, c: float) -> float:
    """Kullback-Leibler risk of any plug-in family given E||est - theta||^2."""
    if mse < 0:
        raise DomainError("mse must be non-negative")
    _check_c(c)
    return 0.5 * model.d * (2.0 * math.log(c) + 1.0 / (c * c) - 1.0) + mse / (2.0 * c * c * model.sigma_y2)


def risk_identity_kl(model: Model, c: float) -> float:
    return risk_kl_plugin(model, model.d * model.sigma_x2, c)


def epsilon_identity(model: Model, loss: AlphaLoss) -> float:
    """E(Z exp(-(1-alpha^2) Z / 8)) for Z = ||X - theta||^2 / sigma_y2, which is r times chi^2_d."""
    d, r = model.d, model.r
    if loss.is_kl:
        return d * r
    return d * r * (1.0 + (1.0 - loss.alpha ** 2) * r / 4.0) ** (-0.5 * d - 1.0)


def epsilon_js_plus_origin(model: Model, loss: AlphaLoss, tol: float = config.QUAD_TOL) -> float:
    """
    E(Z exp(-(1-alpha^2) Z / 8)) for positive-part James-Stein at theta = 0.

    With t = ||X||^2 / sigma_x2 ~ chi^2_d the estimate is 0 for t <= d-2 and
    Z = r (t - (d-2))^2 / t otherwise, so one quadrature over t suffices.
    The radial epsilon search for this estimator bottoms out at the origin.
    """
    if model.d < 3:
        raise DomainError(f"James-Stein needs d >= 3, got d={model.d}")
    shift = model.d - 2.0
    rate = 0.0 if loss.is_kl else (1.0 - loss.alpha ** 2) / 8.0

    def integrand(t: float) -> float:
        z = model.r * (t - shift) ** 2 / t
        return z * math.exp(-rate * z) * chi2.pdf(t, model.d)

    value, abserr = integrate.quad(integrand, shift, np.inf, epsabs=0.1 * tol, epsrel=1e-10, limit=200)
    if abserr > tol:
        raise QuadratureError("James-Stein epsilon quadrature did not converge", achieved=abserr, target=tol)
    return value


# Truncated estimator max(X, 0), d = 1

def _require_scalar_model(model: Model) -> None:
    if model.d != 1:
        raise DomainError(f"truncated risk is closed-form only for d=1, got d={model.d}")


def _gamma1(model: Model, c: float, loss: AlphaLoss) -> float:
    gamma0 = kernel_params(model, c, loss).gamma0
    return math.sqrt(gamma0 / (gamma0 + model.sigma_x2))


def truncated_params(model: Model, theta: float, c: float, loss: AlphaLoss) -> TruncatedRiskParams:
    """gamma1(c), A2(c) and the two pieces of G(theta, c)."""
    _require_scalar_model(model)
    kp = kernel_params(model, c, loss)
    sigma_x = math.sqrt(model.sigma_x2)
    gamma1 = math.sqrt(kp.gamma0 / (kp.gamma0 + model.sigma_x2))
    g1 = float(exp_neg(theta * theta / (2.0 * kp.gamma0))) * float(norm_cdf(-theta / sigma_x))
    g2 = gamma1 * float(norm_cdf(theta / (gamma1 * sigma_x)))
    return TruncatedRiskParams(gamma1=gamma1, a2=-1.0 + kp.a1 * (1.0 + gamma1), g1=g1, g2=g2)


def risk_truncated(model: Model, theta: float, c: float, loss: AlphaLoss) -> float:
    """Risk of N(max(X, 0), c^2 sigma_y2) at any real theta (negative theta included)."""
    tp = truncated_params(model, theta, c, loss)
    return loss.scale * (1.0 - kernel_params(model, c, loss).a1 * tp.g)


def risk_truncated_limit(model: Model, c: float, loss: AlphaLoss) -> float:
    """theta -> infinity limit of risk_truncated, where G tends to gamma1."""
    _require_scalar_model(model)
    return loss.scale * (1.0 - kernel_params(model, c, loss).a1 * _gamma1(model, c, loss))


def truncated_delta(model: Model, theta: float, c: float, loss: AlphaLoss) -> float:
    """
    G(theta, 1) - A1(c) G(theta, c), i.e. (1-alpha^2)/4 times the risk
    difference risk(c) - risk(1). Non-positive on the dominance region.
    """
    base = truncated_params(model, theta, 1.0, loss).g
    expanded = truncated_params(model, theta, c, loss).g
    return base - kernel_params(model, c, loss).a1 * expanded


def truncated_rhs(model: Model, loss: AlphaLoss) -> float:
    """A2(1); the truncated cut-off solves A2(c) = this value."""
    _require_finite_alpha(loss)
    return (1.0 + model.r * (1.0 - loss.alpha ** 2) / 4.0) ** -0.5
