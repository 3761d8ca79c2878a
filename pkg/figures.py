"""
Data sweeps behind the five canonical figures.

Each sweep returns rows (x, series, y). Parameters start from
config.FIGURE_DEFAULTS and are overridden key by key; the grids are
approximations of the plotted ranges, not published data.
"""

import logging
import math
from typing import Any, Callable, Optional

import numpy as np

import config
from closedrisk import risk_affine, risk_ratio_identity, risk_truncated
from cutoffs import cutoff_affine, cutoff_general, cutoff_truncated
from errors import DomainError
from models import AlphaLoss, Estimator, Model, ParameterSpace
from montecarlo import dominance_scan, epsilon_profile, mc_epsilon

logger = logging.getLogger(__name__)

COLUMNS = ("x", "series", "y")
Row = tuple[float, str, float]


def alpha_grid(lo: float, hi: float, step: float = config.ALPHA_GRID_STEP) -> list[float]:
    count = int(round((hi - lo) / step))
    return [round(lo + i * step, 10) + 0.0 for i in range(count + 1)]  # + 0.0 folds -0.0


def theta_values(grid: tuple[float, float, int]) -> np.ndarray:
    lo, hi, n = grid
    return np.linspace(lo, hi, int(n))


def figure_params(name: str, overrides: Optional[dict[str, Any]] = None) -> dict[str, Any]:
    if name not in config.FIGURE_DEFAULTS:
        raise DomainError(f"unknown figure '{name}' (choose from {', '.join(sorted(config.FIGURE_DEFAULTS))})")
    params = dict(config.FIGURE_DEFAULTS[name])
    for key, value in (overrides or {}).items():
        if key in params and value is not None:
            params[key] = value
    return params


def fig1(params: dict[str, Any], **_: Any) -> list[Row]:
    """Risk ratio of the plug-in over the optimal expansion for X, against alpha."""
    rows = []
    for d, r in params["pairs"]:
        model = Model.from_ratio(int(d), float(r))
        for alpha in alpha_grid(params["alpha_lo"], params["alpha_hi"]):
            rows.append((alpha, f"d={d},r={r!r}", risk_ratio_identity(model, AlphaLoss(alpha=alpha))))
    return rows


def fig2(params: dict[str, Any], **_: Any) -> list[Row]:
    """Affine estimator: risk(c) / risk(1) against ||theta|| for c = k and c = (1+k)/2."""
    loss = AlphaLoss(alpha=params["alpha"])
    a = params["a"]
    rows = []
    for r in params["r_values"]:
        model = Model.from_ratio(params["d"], r, params["sigma_x2"])
        k = cutoff_affine(a, r, loss).c_star
        for label, c in (("k", k), ("(1+k)/2", 0.5 * (1.0 + k))):
            for t in theta_values(params["theta_grid"]):
                ratio = risk_affine(model, a, t, c, loss) / risk_affine(model, a, t, 1.0, loss)
                rows.append((float(t), f"r={r!r},c={label}", ratio))
    return rows


def fig3(params: dict[str, Any], **_: Any) -> list[Row]:
    """Truncated estimator (d=1): risk(kappa) / risk(1) against theta."""
    rows = []
    for r in params["r_values"]:
        model = Model.from_ratio(1, r, params["sigma_x2"])
        for alpha in params["alphas"]:
            loss = AlphaLoss(alpha=alpha)
            kappa = cutoff_truncated(r, loss).c_star
            for t in theta_values(params["theta_grid"]):
                ratio = risk_truncated(model, float(t), kappa, loss) / risk_truncated(model, float(t), 1.0, loss)
                rows.append((float(t), f"r={r!r},alpha={alpha!r}", ratio))
    return rows


def fig4(params: dict[str, Any], n: int = config.N_EPSILON, seed: int = config.DEFAULT_SEED,
         workers: int = 1) -> list[Row]:
    """Moment-based cut-off k(d, alpha) for the James-Stein estimator against alpha."""
    est = Estimator.james_stein()
    alphas = alpha_grid(params["alpha_lo"], params["alpha_hi"], params["alpha_step"])
    rows = []
    for sigma_y2 in params["sigma_y2_values"]:
        model = Model(d=params["d"], sigma_x2=params["sigma_x2"], sigma_y2=sigma_y2)
        profile = epsilon_profile(model, est, ParameterSpace(), alphas, n, seed, workers)
        for alpha, eps in zip(alphas, profile):
            k = cutoff_general(model.d, AlphaLoss(alpha=alpha), eps.value).c2_star
            rows.append((alpha, f"sigma_y2={sigma_y2!r}", k))
    return rows


def fig5(params: dict[str, Any], n: int = config.N_EPSILON, seed: int = config.DEFAULT_SEED,
         workers: int = 1) -> list[Row]:
    """Positive-part James-Stein at c^2 = k(d, alpha): risk(c) / risk(1) against ||theta||."""
    est = Estimator.james_stein_plus()
    loss = AlphaLoss(alpha=params["alpha"])
    thetas = theta_values(params["theta_grid"])
    rows = []
    for d in params["dims"]:
        model = Model(d=d, sigma_x2=params["sigma_x2"], sigma_y2=params["sigma_y2"])
        eps = mc_epsilon(model, est, ParameterSpace(), loss, n, seed, workers)
        c = cutoff_general(d, loss, eps.value).c_star
        for cell in dominance_scan(model, est, [c], thetas, loss, n, seed, workers):
            rows.append((cell.theta_norm, f"d={d}", cell.ratio))
    return rows


FIGURES: dict[str, Callable[..., list[Row]]] = {
    "fig1": fig1,
    "fig2": fig2,
    "fig3": fig3,
    "fig4": fig4,
    "fig5": fig5,
}


def figure_rows(name: str, overrides: Optional[dict[str, Any]] = None, n: int = config.N_EPSILON,
                seed: int = config.DEFAULT_SEED, workers: int = 1) -> list[Row]:
    params = figure_params(name, overrides)
    logger.info(f"building {name} with {params}")
    rows = FIGURES[name](params, n=n, seed=seed, workers=workers)
    if not all(math.isfinite(y) for _, _, y in rows):
        logger.warning(f"{name} produced non-finite values")
    return rows
