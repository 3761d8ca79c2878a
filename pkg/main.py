"""
alpharisk - command-line entry point

Subcommands:
1. risk / ratio: closed-form or Monte Carlo risks of expanded plug-in densities
2. cutoff / epsilon / empirical-cutoff: dominance thresholds
3. scan: paired risk differences on a theta grid
4. figure <name>: the canonical sweeps (fig1..fig5)
5. verify: the acceptance suite, as a JSON report

CSV goes to --out or stdout; logs go to stderr.
Exit codes: 0 ok, 1 usage error, 2 numerical failure, 3 verification failure.
"""

import argparse
import logging
import math
import sys
from typing import Any, Callable, Optional, Sequence

import numpy as np
from dotenv import dotenv_values, load_dotenv
from pydantic import ValidationError

import config
from closedrisk import c_opt, risk_affine, risk_identity, risk_identity_kl, risk_kl_plugin, risk_ratio_identity, risk_truncated
from cutoffs import cutoff_affine, cutoff_general, cutoff_general_lower_bound, cutoff_kl_exact, cutoff_truncated
from errors import AlphaRiskError, DomainError, VerificationError
from estimators import moment_bounds, parse_estimator
from figures import COLUMNS as FIGURE_COLUMNS
from figures import figure_rows
from models import (
    AlphaLoss,
    CutoffResult,
    Estimator,
    EstimatorKind,
    MixtureDensity,
    Model,
    ParameterSpace,
    RunConfig,
    SpaceKind,
)
from montecarlo import dominance_scan, empirical_cutoff, epsilon_profile, mc_epsilon, mc_risk, mixture_risk
from output import write_csv, write_json
from verify import VerifyOptions, run_checks

logger = logging.getLogger(__name__)

CUTOFF_KINDS = ("auto", "affine", "truncated", "general", "lower-bound", "kl-exact")


class CliParser(argparse.ArgumentParser):
    """argparse that reports usage errors as DomainError (exit 1) instead of exiting 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise DomainError(message)


# Flag value parsers, shared with the config file

def parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def parse_theta_grid(text: str) -> tuple[float, float, int]:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise DomainError(f"theta grid '{text}' must look like lo:hi:n")
    return float(parts[0]), float(parts[1]), int(parts[2])


def parse_bounds(text: str) -> tuple[float, float, float]:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise DomainError(f"bounds '{text}' must look like b0:b1:b2")
    return float(parts[0]), float(parts[1]), float(parts[2])


def parse_atoms(text: str) -> tuple[tuple[float, float], ...]:
    atoms = []
    for item in str(text).split(","):
        c, _, w = item.partition(":")
        if not w:
            raise DomainError(f"mixture atom '{item}' must look like c:w")
        atoms.append((float(c), float(w)))
    return tuple(atoms)


def parse_bool(text: str) -> bool:
    return str(text).strip().lower() in ("1", "true", "yes", "on")


# key -> (RunConfig field, converter for config-file strings)
FIELDS: dict[str, tuple[str, Callable[[str], Any]]] = {
    "d": ("d", int),
    "sigma_x2": ("sigma_x2", float),
    "sigma_y2": ("sigma_y2", float),
    "alpha": ("alphas", parse_float_list),
    "c": ("cs", parse_float_list),
    "estimator": ("estimator", str),
    "theta_grid": ("theta_grid", parse_theta_grid),
    "n_samples": ("n_samples", int),
    "seed": ("seed", int),
    "workers": ("workers", int),
    "force_mc": ("force_mc", parse_bool),
    "tol": ("tol", float),
    "kind": ("kind", str),
    "epsilon": ("epsilon", float),
    "r_bar": ("r_bar", float),
    "bounds": ("bounds", parse_bounds),
    "atoms": ("atoms", parse_atoms),
}


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file; CLI flags take precedence")
    common.add_argument("--d", type=int, help="dimension")
    common.add_argument("--sigma-x2", type=float, help="variance of each X coordinate")
    common.add_argument("--sigma-y2", type=float, help="variance of each Y coordinate")
    common.add_argument("--alpha", type=float, action="append", help="divergence index in [-1, 1); repeatable")
    common.add_argument("--c", type=float, action="append", help="variance expansion c >= 1; repeatable")
    common.add_argument("--estimator", help="identity | affine:a | truncated | js | jsplus | baranchik:clip:b | baranchik:rational:b:f")
    common.add_argument("--theta-grid", type=parse_theta_grid, help="lo:hi:n positions along the first axis")
    common.add_argument("--n-samples", type=int, help="Monte Carlo draws per theta")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--workers", type=int, help="threads for Monte Carlo chunks (results do not depend on it)")
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--force-mc", action="store_true", default=None, help="Monte Carlo even when a closed form exists")
    common.add_argument("--tol", type=float, help="tolerance (empirical cut-off bisection)")
    common.add_argument("--kind", choices=CUTOFF_KINDS, help="cut-off kind")
    common.add_argument("--epsilon", type=float, help="epsilon for the moment-based cut-off (estimated when omitted)")
    common.add_argument("--r-bar", type=float, help="inf of E||est - theta||^2 / (d sigma_y2) for the exact KL cut-off")
    common.add_argument("--bounds", type=parse_bounds, help="b0:b1:b2 moment bounds")
    common.add_argument("--atoms", type=parse_atoms, help="mixture atoms c:w,... for risk")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ERROR")
    return common


def build_parser() -> CliParser:
    parser = CliParser(prog="alpharisk", description="Risks and dominance cut-offs of expanded plug-in predictive densities")
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.VERSION}")
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)
    sub.add_parser("risk", parents=[common], help="risk per (theta, c, alpha)")
    sub.add_parser("ratio", parents=[common], help="plug-in over optimal-expansion risk for X")
    sub.add_parser("cutoff", parents=[common], help="dominance cut-off per alpha")
    sub.add_parser("epsilon", parents=[common], help="epsilon per alpha")
    sub.add_parser("scan", parents=[common], help="paired risk differences")
    sub.add_parser("empirical-cutoff", parents=[common], help="empirical exact cut-off in c^2")
    fig = sub.add_parser("figure", parents=[common], help="canonical figure sweep")
    fig.add_argument("name", choices=sorted(config.FIGURE_DEFAULTS))
    ver = sub.add_parser("verify", parents=[common], help="acceptance checks")
    ver.add_argument("--quick", action="store_true", help="skip the Monte Carlo heavy checks")
    return parser


def resolve_run(args: argparse.Namespace, settings: config.Settings) -> tuple[RunConfig, set[str]]:
    """
    Merge settings: CLI flags > config file > environment > built-in defaults.
    Returns the resolved config and the keys set explicitly by file or flag.
    """
    values: dict[str, Any] = {"seed": settings.seed, "workers": settings.workers, "n_samples": settings.n_samples}
    explicit: set[str] = set()

    if args.config:
        for key, raw in dotenv_values(args.config).items():
            key = key.strip().lower().replace("-", "_")
            if key not in FIELDS:
                raise DomainError(f"unknown key '{key}' in {args.config}")
            if raw is None:
                continue
            field, convert = FIELDS[key]
            values[field] = convert(raw)
            explicit.add(field)

    for key, (field, _) in FIELDS.items():
        value = getattr(args, key, None)
        if value is not None:
            values[field] = tuple(value) if isinstance(value, list) else value
            explicit.add(field)

    if values.get("kind", "auto") not in CUTOFF_KINDS:
        raise DomainError(f"unknown cut-off kind '{values['kind']}' (choose from {', '.join(CUTOFF_KINDS)})")

    figure = getattr(args, "name", None)
    run = RunConfig(command=args.command, figure=figure, **values)
    logger.debug(f"resolved config: {run.model_dump()}")
    return run, explicit


def _model(run: RunConfig) -> Model:
    return Model(d=run.d, sigma_x2=run.sigma_x2, sigma_y2=run.sigma_y2)


def _thetas(run: RunConfig) -> np.ndarray:
    lo, hi, n = run.theta_grid
    return np.linspace(lo, hi, n)


def _first_axis(model: Model, t: float) -> np.ndarray:
    theta = np.zeros(model.d)
    theta[0] = t
    return theta


def _search_space(run: RunConfig, est: Estimator) -> ParameterSpace:
    lo, hi, n = run.theta_grid
    radius = hi if hi > 0 else config.EPSILON_MAX_RADIUS
    kind = SpaceKind.RD if est.is_orthogonally_equivariant else SpaceKind.HALFLINE
    return ParameterSpace(kind=kind, max_radius=radius, n_points=max(n, 2))


def _closed_risk(model: Model, est: Estimator, t: float, c: float, loss: AlphaLoss) -> Optional[float]:
    """Closed-form risk when one exists for this estimator and loss, else None."""
    if est.kind == EstimatorKind.IDENTITY:
        return risk_identity_kl(model, c) if loss.is_kl else risk_identity(model, c, loss)
    if est.kind == EstimatorKind.AFFINE:
        if loss.is_kl:
            mse = est.a ** 2 * model.d * model.sigma_x2 + (1.0 - est.a) ** 2 * t * t
            return risk_kl_plugin(model, mse, c)
        return risk_affine(model, est.a, abs(t), c, loss)
    if est.kind == EstimatorKind.TRUNCATED and model.d == 1 and not loss.is_kl:
        return risk_truncated(model, t, c, loss)
    return None


def cmd_risk(run: RunConfig, args: argparse.Namespace) -> None:
    model, est = _model(run), parse_estimator(run.estimator)
    rows = []
    mix = MixtureDensity(base=est, atoms=run.atoms) if run.atoms else None
    for t in _thetas(run):
        theta = _first_axis(model, t)
        for alpha in run.alphas:
            loss = AlphaLoss(alpha=alpha)
            if mix is not None:
                res = mixture_risk(model, mix, loss, theta, run.n_samples, run.seed, run.workers)
                c_rms = math.sqrt(sum(w * c * c for c, w in mix.atoms))
                rows.append((float(t), c_rms, alpha, res.mean, res.stderr, "mixture"))
                continue
            for c in run.cs:
                exact = None if run.force_mc else _closed_risk(model, est, float(t), c, loss)
                if exact is not None:
                    rows.append((float(t), c, alpha, exact, None, "closed"))
                else:
                    res = mc_risk(model, est, c, loss, theta, run.n_samples, run.seed, run.workers)
                    rows.append((float(t), c, alpha, res.mean, res.stderr, "mc"))
    write_csv(run, ("theta_norm", "c", "alpha", "risk", "stderr", "method"), rows, args.out)


def cmd_ratio(run: RunConfig, args: argparse.Namespace) -> None:
    model = _model(run)
    rows = []
    for alpha in run.alphas:
        loss = AlphaLoss(alpha=alpha)
        best = c_opt(model, loss)
        if loss.is_kl:
            ratio = risk_identity_kl(model, 1.0) / risk_identity_kl(model, best)
        else:
            ratio = risk_ratio_identity(model, loss)
        rows.append((model.d, model.r, alpha, best, ratio))
    write_csv(run, ("d", "r", "alpha", "c_opt", "ratio"), rows, args.out)


def _cutoff_for(run: RunConfig, model: Model, est: Estimator, loss: AlphaLoss) -> CutoffResult:
    kind = run.kind
    if kind == "auto":
        if est.kind in (EstimatorKind.IDENTITY, EstimatorKind.AFFINE) and not loss.is_kl:
            kind = "affine"
        elif est.kind == EstimatorKind.TRUNCATED and model.d == 1 and not loss.is_kl:
            kind = "truncated"
        else:
            kind = "general"
    if kind == "affine":
        a = est.a if est.kind == EstimatorKind.AFFINE else 1.0
        return cutoff_affine(a, model.r, loss)
    if kind == "truncated":
        if model.d != 1:
            raise DomainError("the truncated cut-off is defined for d=1")
        return cutoff_truncated(model.r, loss)
    if kind == "general":
        eps = run.epsilon
        if eps is None:
            eps = mc_epsilon(model, est, _search_space(run, est), loss, run.n_samples, run.seed, run.workers).value
        return cutoff_general(model.d, loss, eps)
    if kind == "lower-bound":
        bounds = run.bounds or moment_bounds(est, model, _search_space(run, est), run.n_samples, run.seed, run.workers)
        return cutoff_general_lower_bound(model.d, loss, bounds)
    if run.r_bar is None:
        raise DomainError("--kind kl-exact needs --r-bar")
    return cutoff_kl_exact(run.r_bar)


def cmd_cutoff(run: RunConfig, args: argparse.Namespace) -> None:
    model, est = _model(run), parse_estimator(run.estimator)
    alphas = (-1.0,) if run.kind == "kl-exact" else run.alphas
    rows = []
    for alpha in alphas:
        res = _cutoff_for(run, model, est, AlphaLoss(alpha=alpha))
        rows.append((alpha, res.method, res.c_star, res.c2_star, res.residual))
    write_csv(run, ("alpha", "cutoff_kind", "c_star", "c2_star", "residual"), rows, args.out)


def cmd_epsilon(run: RunConfig, args: argparse.Namespace) -> None:
    model, est = _model(run), parse_estimator(run.estimator)
    profile = epsilon_profile(model, est, _search_space(run, est), run.alphas, run.n_samples, run.seed, run.workers)
    rows = [(e.alpha, e.value, e.stderr_at_min, float(np.linalg.norm(e.arg_theta)), e.tail_value) for e in profile]
    write_csv(run, ("alpha", "epsilon", "stderr", "arg_theta_norm", "tail_value"), rows, args.out)


def cmd_scan(run: RunConfig, args: argparse.Namespace) -> None:
    model, est = _model(run), parse_estimator(run.estimator)
    rows = []
    for alpha in run.alphas:
        for cell in dominance_scan(model, est, run.cs, _thetas(run), AlphaLoss(alpha=alpha), run.n_samples,
                                   run.seed, run.workers):
            rows.append((cell.theta_norm, cell.c, alpha, cell.delta, cell.stderr, cell.unpaired_stderr,
                         cell.risk, cell.plugin_risk, cell.ratio))
    columns = ("theta_norm", "c", "alpha", "delta", "stderr", "unpaired_stderr", "risk", "plugin_risk", "ratio")
    write_csv(run, columns, rows, args.out)


def cmd_empirical_cutoff(run: RunConfig, args: argparse.Namespace) -> None:
    model, est = _model(run), parse_estimator(run.estimator)
    tol = run.tol or config.EMPIRICAL_TOL
    rows = []
    for alpha in run.alphas:
        c2 = empirical_cutoff(model, est, AlphaLoss(alpha=alpha), _thetas(run), run.n_samples, run.seed, tol,
                              run.workers)
        rows.append((alpha, math.sqrt(c2), c2))
    write_csv(run, ("alpha", "c_star", "c2_star"), rows, args.out)


def cmd_figure(run: RunConfig, args: argparse.Namespace, explicit: set[str]) -> None:
    overrides = {field: getattr(run, field) for field in ("d", "sigma_x2", "sigma_y2", "theta_grid") if field in explicit}
    if "alphas" in explicit:
        overrides["alphas"] = list(run.alphas)
        overrides["alpha"] = run.alphas[0]
    rows = figure_rows(run.figure, overrides, run.n_samples, run.seed, run.workers)
    write_csv(run, FIGURE_COLUMNS, rows, args.out)


def cmd_verify(run: RunConfig, args: argparse.Namespace, explicit: set[str]) -> None:
    opts = VerifyOptions(seed=run.seed, workers=run.workers, include_slow=not args.quick)
    if "n_samples" in explicit:
        opts = opts.model_copy(update={"n_epsilon": run.n_samples})
    results = run_checks(opts)
    failed = [r.name for r in results if not r.passed]
    write_json({
        "version": config.VERSION,
        "seed": run.seed,
        "passed": not failed,
        "checks": [r.model_dump() for r in results],
    }, args.out)
    if failed:
        raise VerificationError(failed)


COMMANDS: dict[str, Callable[..., None]] = {
    "risk": cmd_risk,
    "ratio": cmd_ratio,
    "cutoff": cmd_cutoff,
    "epsilon": cmd_epsilon,
    "scan": cmd_scan,
    "empirical-cutoff": cmd_empirical_cutoff,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    # Load environment variables from .env file
    load_dotenv()
    settings = config.Settings()
    parser = build_parser()

    try:
        args = parser.parse_args(argv)
    except DomainError as e:
        sys.stderr.write(f"alpharisk: error: {e.detail}\n")
        return e.exit_code

    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        run, explicit = resolve_run(args, settings)
        if args.command == "figure":
            cmd_figure(run, args, explicit)
        elif args.command == "verify":
            cmd_verify(run, args, explicit)
        else:
            COMMANDS[args.command](run, args)
        return 0
    except ValidationError as e:
        logger.error(f"Validation error: {e}")
        return DomainError.exit_code
    except AlphaRiskError as e:
        logger.error(f"{type(e).__name__}: {e.detail}")
        return e.exit_code
    except ValueError as e:
        logger.error(f"Invalid value: {e}")
        return DomainError.exit_code
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
