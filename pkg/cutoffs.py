"""
Dominance cut-offs for expanded plug-in densities.

Affine and truncated cut-offs are in c and found by bracketed root finding.
The general moment-based cut-off is closed-form and lives in c^2; both units
are always filled in on CutoffResult.
"""

import logging
import math
from typing import Callable, Mapping, Optional, Sequence, Union

from scipy import optimize

import config
from closedrisk import truncated_params, truncated_rhs
from core import _require_finite_alpha
from errors import DomainError, SolverError, TheoremInapplicableError
from models import AlphaLoss, CutoffMethod, CutoffResult, DominanceCoverage, MomentBounds, Model, TauParams

logger = logging.getLogger(__name__)

EpsilonProfile = Union[Mapping[float, float], Callable[[float], float]]


def _check_ratio(r: float) -> None:
    if not (math.isfinite(r) and r > 0):
        raise DomainError(f"variance ratio r={r} must be finite and positive")


def _log1p_defect(x: float) -> float:
    """x - log1p(x), by series where the subtraction would cancel."""
    if abs(x) < 1e-3:
        return x * x * (0.5 - x * (1.0 / 3.0 - x * (0.25 - x * (0.2 - x / 6.0))))
    return x - math.log1p(x)


def _expm1_defect(x: float) -> float:
    """expm1(x) - x, by series where the subtraction would cancel."""
    if abs(x) < 1e-3:
        return x * x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    return math.expm1(x) - x


def _expand_until_positive(f: Callable[[float], float], lo: float, method: CutoffMethod) -> float:
    """Double the upper end from BRACKET_START until f changes sign."""
    hi = max(config.BRACKET_START, 2.0 * lo)
    while f(hi) <= 0.0:
        if hi >= config.BRACKET_CAP:
            raise SolverError(
                f"no sign change for {method.value} cut-off below c={config.BRACKET_CAP:g}",
                diagnostics={"lo": lo, "hi": hi, "f_lo": f(lo), "f_hi": f(hi)},
            )
        hi = min(2.0 * hi, config.BRACKET_CAP)
    return hi


def _solve(f: Callable[[float], float], lo: float, hi: float, method: CutoffMethod,
           xtol: float = config.ROOT_XTOL, max_residual: float = config.ROOT_RESIDUAL_MAX,
           shift: float = 0.0) -> CutoffResult:
    """Brent on [lo, hi]; with shift=1 the unknown is delta = c - 1 and the result is reported in c."""
    f_lo, f_hi = f(lo), f(hi)
    if f_lo * f_hi > 0:
        raise SolverError(
            f"bracket [{lo}, {hi}] does not straddle a root",
            diagnostics={"lo": lo, "hi": hi, "f_lo": f_lo, "f_hi": f_hi},
        )
    root, info = optimize.brentq(f, lo, hi, xtol=xtol, maxiter=config.ROOT_MAX_ITER, full_output=True, disp=False)
    residual = abs(f(root))
    if not info.converged or residual > max_residual:
        raise SolverError(
            f"{method.value} cut-off did not converge",
            diagnostics={"lo": lo, "hi": hi, "iterations": info.iterations, "residual": residual},
        )
    c = shift + root
    logger.info(f"{method.value} cut-off c*={c:.12g} in [{shift + lo:.6g}, {shift + hi:.6g}] after {info.iterations} iterations")
    return CutoffResult(c_star=c, c2_star=c * c, bracket=(shift + lo, shift + hi), residual=residual, method=method)


def _from_c2(c2: float, method: CutoffMethod) -> CutoffResult:
    if not c2 > 1.0:
        raise TheoremInapplicableError(f"cut-off c^2={c2!r} does not exceed 1")
    return CutoffResult(c_star=math.sqrt(c2), c2_star=c2, bracket=(c2, c2), residual=0.0, method=method)


# Affine estimator aX

def cutoff_affine_lower_bound(a: float, r: float, loss: AlphaLoss) -> float:
    """sqrt(1 + a^2 r (1-alpha)/2); the affine cut-off never falls below it."""
    return math.sqrt(1.0 + a * a * r * (1.0 - loss.alpha) / 2.0)


def cutoff_affine(a: float, r: float, loss: AlphaLoss) -> CutoffResult:
    """
    Exact dominance threshold k(alpha, a, r) for N(aX, c^2 sigma_y2 I):
    the root in (1, inf) of
        2(1-alpha)c^2 - (4 + (1-alpha^2)a^2 r)c^(1-alpha) + (1+alpha)(2 + (1-alpha)a^2 r).
    c = 1 is always a root too. The equation is rewritten in delta = c - 1
    with the constant terms cancelled exactly, then divided by delta c, which
    removes that root and keeps full relative accuracy when a^2 r is tiny.
    The bracket starts at the explicit lower bound.
    """
    _require_finite_alpha(loss)
    _check_ratio(r)
    if not (0.0 < a <= 1.0):
        raise DomainError(f"affine scale a={a} must lie in (0, 1]")
    alpha = loss.alpha
    p = 1.0 - alpha
    q = a * a * r

    def f(delta: float) -> float:
        x = p * math.log1p(delta)
        grow = math.expm1(x)
        value = 4.0 * (p * _log1p_defect(delta) - _expm1_defect(x)) + 2.0 * p * delta * delta - (1.0 - alpha ** 2) * q * grow
        return value / (delta * (1.0 + delta))

    lo = math.expm1(0.5 * math.log1p(q * p / 2.0))
    hi = _expand_until_positive(f, lo, CutoffMethod.AFFINE)
    return _solve(f, lo, hi, CutoffMethod.AFFINE, xtol=config.ROOT_XTOL * min(1.0, lo), shift=1.0)


def robust_under_r(a: float, r: float, r_true: float, loss: AlphaLoss) -> bool:
    """
    Does the cut-off computed under the assumed ratio r still guarantee
    dominance when the true ratio is r_true? The cut-off increases with r,
    so this holds exactly when r_true >= r.
    """
    assumed = cutoff_affine(a, r, loss).c_star
    actual = cutoff_affine(a, r_true, loss).c_star
    return assumed <= actual + config.ROOT_XTOL


# Truncated estimator max(X, 0), d = 1

def cutoff_truncated(r: float, loss: AlphaLoss) -> CutoffResult:
    """
    kappa(alpha, r): root in (1, inf) of A2(c) = (1 + r(1-alpha^2)/4)^(-1/2).
    A2 starts at that value for c = 1, rises, then decreases towards -1;
    the bracket starts at its maximizer to skip the root at c = 1.
    """
    _require_finite_alpha(loss)
    _check_ratio(r)
    if r < config.TRUNCATED_MIN_RATIO:
        raise DomainError(f"r={r} is below {config.TRUNCATED_MIN_RATIO:g}; the truncated cut-off equation "
                          f"is flat to float precision there")
    model = Model.from_ratio(1, r)
    rhs = truncated_rhs(model, loss)

    def f(c: float) -> float:
        return truncated_params(model, 0.0, c, loss).a2 - rhs

    upper = 2.0 * math.sqrt(1.0 + r * (1.0 - loss.alpha) / 2.0)
    peak = optimize.minimize_scalar(lambda c: -f(c), bounds=(1.0, upper), method="bounded",
                                    options={"xatol": 1e-10})
    lo = float(peak.x)
    if f(lo) <= 0.0:
        raise SolverError("truncated cut-off equation never turns positive", diagnostics={"peak": lo, "f_peak": f(lo)})
    g = lambda c: -f(c)  # noqa: E731
    hi = _expand_until_positive(g, lo, CutoffMethod.TRUNCATED)
    return _solve(f, lo, hi, CutoffMethod.TRUNCATED)


# Moment-based cut-off

def _bounds_tuple(bounds: Union[MomentBounds, Sequence[float]]) -> tuple[float, float, float]:
    if isinstance(bounds, MomentBounds):
        return bounds.b0, bounds.b1, bounds.b2
    b0, b1, b2 = (float(b) for b in bounds)
    if not (b0 > 0 and b2 > 0):
        raise DomainError("moment bounds need b0 > 0 and b2 > 0")
    if b0 > b1:
        raise DomainError(f"moment bounds out of order: b0={b0} > b1={b1}")
    return b0, b1, b2


def _damped_lower_epsilon(loss: AlphaLoss, b0: float, b1: float, b2: float) -> float:
    return b0 * math.exp(-(1.0 - loss.alpha ** 2) * b2 / (8.0 * b1))


def _tau(d: int, loss: AlphaLoss, epsilon: float) -> float:
    return (1.0 - loss.alpha) * epsilon - 2.0 * loss.alpha * d


def tau_params(d: int, loss: AlphaLoss, epsilon: float,
               bounds: Optional[Union[MomentBounds, Sequence[float]]] = None) -> TauParams:
    tau_lower = None
    if bounds is not None:
        tau_lower = _tau(d, loss, _damped_lower_epsilon(loss, *_bounds_tuple(bounds)))
    return TauParams(epsilon=epsilon, tau=_tau(d, loss, epsilon), tau_lower=tau_lower)


def _k_from_epsilon(d: int, loss: AlphaLoss, epsilon: float) -> float:
    if loss.is_kl:
        return 1.0 + epsilon / d
    tau = _tau(d, loss, epsilon)
    q = 4.0 * d * d * (1.0 - loss.alpha ** 2)
    root = math.sqrt(tau * tau + q)
    # tau + root without cancellation when tau < 0
    numerator = tau + root if tau >= 0 else q / (root - tau)
    return numerator / (2.0 * d * (1.0 - loss.alpha))


def cutoff_general(d: int, loss: AlphaLoss, epsilon: float) -> CutoffResult:
    """
    k(d, alpha) = (tau + sqrt(tau^2 + 4 d^2 (1-alpha^2))) / (2 d (1-alpha)),
    tau = (1-alpha) eps - 2 alpha d. Under KL this is 1 + eps/d.
    Dominance holds for 1 < c^2 <= k.
    """
    if d < 1:
        raise DomainError(f"dimension d={d} must be positive")
    if not epsilon > 0:
        raise TheoremInapplicableError(f"epsilon={epsilon} must be positive for the moment-based cut-off")
    k = _k_from_epsilon(d, loss, epsilon)
    logger.info(f"general cut-off d={d} alpha={loss.alpha} eps={epsilon:.6g} -> c^2 <= {k:.10g}")
    return _from_c2(k, CutoffMethod.GENERAL)


def cutoff_general_lower_bound(d: int, loss: AlphaLoss, bounds: Union[MomentBounds, Sequence[float]]) -> CutoffResult:
    """The same formula with eps replaced by b0 exp(-(1-alpha^2) b2 / (8 b1))."""
    b0, b1, b2 = _bounds_tuple(bounds)
    if d < 1:
        raise DomainError(f"dimension d={d} must be positive")
    k = _k_from_epsilon(d, loss, _damped_lower_epsilon(loss, b0, b1, b2))
    return _from_c2(k, CutoffMethod.GENERAL_LOWER_BOUND)


def _profile_value(profile: EpsilonProfile, alpha: float) -> float:
    if callable(profile):
        return float(profile(alpha))
    for key, value in profile.items():
        if math.isclose(key, alpha, abs_tol=1e-12):
            return float(value)
    raise DomainError(f"epsilon profile has no value at alpha={alpha}")


def simultaneous_dominance(d: int, alpha0: float, epsilon_profile: EpsilonProfile,
                           alphas: Sequence[float]) -> list[DominanceCoverage]:
    """
    For alpha0 <= 0, an expansion with c^2 <= k(d, alpha0) also dominates
    under every alpha in [-1, alpha0] (the KL loss included). Reports, per
    requested alpha <= alpha0, its cut-off and whether k(d, alpha0) fits under it.
    """
    if alpha0 > 0:
        raise DomainError(f"simultaneous dominance needs alpha0 <= 0, got {alpha0}")
    k0 = cutoff_general(d, AlphaLoss(alpha=alpha0), _profile_value(epsilon_profile, alpha0)).c2_star
    rows = []
    for alpha in sorted(a for a in alphas if a <= alpha0):
        k = cutoff_general(d, AlphaLoss(alpha=alpha), _profile_value(epsilon_profile, alpha)).c2_star
        rows.append(DominanceCoverage(alpha=alpha, c2_star=k, covered=k0 <= k * (1.0 + 1e-12)))
    return rows


# Exact Kullback-Leibler cut-off

def cutoff_kl_exact(r_bar: float) -> CutoffResult:
    """
    Exact KL threshold c0(1 + r_bar): root in (t, t e^t) of (1 - 1/c) t - ln c,
    t = 1 + r_bar. c0 multiplies the variance, so it is reported as c2_star.

    Solved in delta = c - 1 after dividing by delta, which drops the root at
    c = 1; near r_bar = 0 the root is 1 + 2 r_bar and the residual is
    measured in units of r_bar.
    """
    if not (math.isfinite(r_bar) and r_bar > 0):
        raise DomainError(f"r_bar={r_bar} must be finite and positive")
    t = 1.0 + r_bar
    log_hi = t + math.log(t)
    if log_hi > 700.0:
        raise DomainError(f"r_bar={r_bar} too large for the exact KL bracket")

    scale = min(1.0, r_bar)

    def f(delta: float) -> float:
        return ((r_bar - delta) / (1.0 + delta) + _log1p_defect(delta) / delta) / scale

    lo, hi = r_bar, math.expm1(log_hi)
    root, info = optimize.brentq(f, lo, hi, xtol=config.ROOT_XTOL * scale, maxiter=config.ROOT_MAX_ITER,
                                 full_output=True, disp=False)
    residual = abs(f(root))
    if not info.converged or residual > config.ROOT_XTOL:
        raise SolverError("exact KL cut-off did not converge", diagnostics={"lo": lo, "hi": hi, "residual": residual})
    c0 = 1.0 + root
    logger.info(f"exact KL cut-off for r_bar={r_bar}: c^2 <= {c0:.12g}")
    return CutoffResult(c_star=math.sqrt(c0), c2_star=c0, bracket=(1.0 + lo, 1.0 + hi), residual=residual,
                        method=CutoffMethod.KL_EXACT)
