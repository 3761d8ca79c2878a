"""
Pydantic models for the risk toolkit's domain types.
All models are frozen; invalid parameters fail fast at construction.
"""

import math
from enum import Enum
from typing import Any, Callable, Optional

import numpy as np

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

import config


class Model(BaseModel):
    """X ~ N_d(theta, sigma_x2 I), Y ~ N_d(theta, sigma_y2 I)."""
    model_config = ConfigDict(frozen=True)

    d: int = Field(..., ge=1)
    sigma_x2: float = Field(..., gt=0)
    sigma_y2: float = Field(..., gt=0)

    @model_validator(mode="after")
    def check_ratio(self) -> "Model":
        r = self.sigma_x2 / self.sigma_y2
        if not (math.isfinite(r) and r > 0):
            raise ValueError(f"variance ratio r={r} must be finite and positive")
        return self

    @property
    def r(self) -> float:
        return self.sigma_x2 / self.sigma_y2

    @classmethod
    def from_ratio(cls, d: int, r: float, sigma_x2: float = 1.0) -> "Model":
        return cls(d=d, sigma_x2=sigma_x2, sigma_y2=sigma_x2 / r)


class AlphaLoss(BaseModel):
    """Divergence index; alpha = -1 is the Kullback-Leibler branch."""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., ge=-1.0, lt=1.0)

    @property
    def is_kl(self) -> bool:
        return self.alpha == -1.0

    @property
    def scale(self) -> float:
        """4 / (1 - alpha^2); undefined on the KL branch."""
        if self.is_kl:
            raise ValueError("the 4/(1-alpha^2) scale is undefined at alpha = -1")
        return 4.0 / (1.0 - self.alpha ** 2)


class LossKernelParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma0: float = Field(..., gt=0)
    a1: float = Field(..., gt=0)
    bc: float = Field(..., gt=0)


class TruncatedRiskParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma1: float
    a2: float
    g1: float
    g2: float

    @property
    def g(self) -> float:
        return self.g1 + self.g2


class EstimatorKind(str, Enum):
    IDENTITY = "identity"
    AFFINE = "affine"
    TRUNCATED = "truncated"
    JAMES_STEIN = "js"
    JAMES_STEIN_PLUS = "jsplus"
    BARANCHIK = "baranchik"
    CUSTOM = "custom"


class ShrinkageKind(str, Enum):
    CLIP = "clip"          # s(t) = min(t, b)
    RATIONAL = "rational"  # s(t) = b t / (t + f)


class Shrinkage(BaseModel):
    """Baranchik s-function; both kinds keep s(t) and s(t)/t bounded."""
    model_config = ConfigDict(frozen=True)

    kind: ShrinkageKind
    b: float = Field(..., ge=0)
    f: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def check_params(self) -> "Shrinkage":
        if self.kind == ShrinkageKind.RATIONAL and self.f is None:
            raise ValueError("rational shrinkage requires f > 0")
        return self

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == ShrinkageKind.CLIP:
            return np.minimum(t, self.b)
        return self.b * t / (t + self.f)

    @property
    def spec(self) -> str:
        if self.kind == ShrinkageKind.CLIP:
            return f"clip:{self.b!r}"
        return f"rational:{self.b!r}:{self.f!r}"


class Estimator(BaseModel):
    """Point estimator descriptor plugged into the predictive density."""
    model_config = ConfigDict(frozen=True)

    kind: EstimatorKind
    a: Optional[float] = Field(None, gt=0, le=1)
    shrinkage: Optional[Shrinkage] = None
    func: Optional[Callable[..., Any]] = Field(None, exclude=True)
    equivariant: bool = False  # only consulted for custom estimators

    @model_validator(mode="after")
    def check_kind_params(self) -> "Estimator":
        if self.kind == EstimatorKind.AFFINE and self.a is None:
            raise ValueError("affine estimator requires 0 < a <= 1")
        if self.kind == EstimatorKind.BARANCHIK and self.shrinkage is None:
            raise ValueError("Baranchik estimator requires a shrinkage function")
        if self.kind == EstimatorKind.CUSTOM and self.func is None:
            raise ValueError("custom estimator requires a callable")
        return self

    @classmethod
    def identity(cls) -> "Estimator":
        return cls(kind=EstimatorKind.IDENTITY)

    @classmethod
    def affine(cls, a: float) -> "Estimator":
        return cls(kind=EstimatorKind.AFFINE, a=a)

    @classmethod
    def truncated(cls) -> "Estimator":
        return cls(kind=EstimatorKind.TRUNCATED)

    @classmethod
    def james_stein(cls) -> "Estimator":
        return cls(kind=EstimatorKind.JAMES_STEIN)

    @classmethod
    def james_stein_plus(cls) -> "Estimator":
        return cls(kind=EstimatorKind.JAMES_STEIN_PLUS)

    @classmethod
    def baranchik(cls, shrinkage: Shrinkage) -> "Estimator":
        return cls(kind=EstimatorKind.BARANCHIK, shrinkage=shrinkage)

    @classmethod
    def custom(cls, func: Callable[..., Any], equivariant: bool = False) -> "Estimator":
        return cls(kind=EstimatorKind.CUSTOM, func=func, equivariant=equivariant)

    @property
    def is_orthogonally_equivariant(self) -> bool:
        if self.kind == EstimatorKind.TRUNCATED:
            return False
        if self.kind == EstimatorKind.CUSTOM:
            return self.equivariant
        return True

    @property
    def spec(self) -> str:
        if self.kind == EstimatorKind.AFFINE:
            return f"affine:{self.a!r}"
        if self.kind == EstimatorKind.BARANCHIK:
            return f"baranchik:{self.shrinkage.spec}"
        return self.kind.value


class SpaceKind(str, Enum):
    RD = "rd"
    HALFLINE = "halfline"
    BALL = "ball"
    GRID = "grid"


class ParameterSpace(BaseModel):
    """Search set for infima and suprema over theta."""
    model_config = ConfigDict(frozen=True)

    kind: SpaceKind = SpaceKind.RD
    max_radius: float = Field(config.EPSILON_MAX_RADIUS, gt=0)
    n_points: int = Field(config.EPSILON_GRID_POINTS, ge=2)
    radius: Optional[float] = Field(None, gt=0)
    points: Optional[tuple[tuple[float, ...], ...]] = None

    @model_validator(mode="after")
    def check_kind_params(self) -> "ParameterSpace":
        if self.kind == SpaceKind.BALL and self.radius is None:
            raise ValueError("ball space requires a radius")
        if self.kind == SpaceKind.GRID and not self.points:
            raise ValueError("grid space requires at least one point")
        return self

    @property
    def is_radial(self) -> bool:
        return self.kind in (SpaceKind.RD, SpaceKind.BALL)

    @property
    def is_bounded(self) -> bool:
        return self.kind in (SpaceKind.BALL, SpaceKind.GRID)


class BoundsProvenance(str, Enum):
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte-carlo"


class MomentBounds(BaseModel):
    """Bounds on E||est-theta||^2 / sigma_y2 (b0, b1) and E||est-theta||^4 / sigma_y2^2 (b2)."""
    model_config = ConfigDict(frozen=True)

    b0: float = Field(..., gt=0)
    b1: float = Field(..., gt=0)
    b2: float = Field(..., gt=0)
    provenance: BoundsProvenance

    @model_validator(mode="after")
    def check_order(self) -> "MomentBounds":
        if not all(math.isfinite(v) for v in (self.b0, self.b1, self.b2)):
            raise ValueError("moment bounds must be finite")
        if self.b0 > self.b1:
            raise ValueError(f"b0={self.b0} exceeds b1={self.b1}")
        if self.b2 < self.b0 ** 2 * (1 - 1e-12):
            raise ValueError(f"b2={self.b2} violates b2 >= b0^2")
        return self


class RiskEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    stderr: float = Field(..., ge=0)
    n: int
    seed: int


class CutoffMethod(str, Enum):
    AFFINE = "affine"
    TRUNCATED = "truncated"
    GENERAL = "general"
    GENERAL_LOWER_BOUND = "general-lower-bound"
    KL_EXACT = "kl-exact"


class CutoffResult(BaseModel):
    """A dominance threshold, reported both in c and in c^2."""
    model_config = ConfigDict(frozen=True)

    c_star: float = Field(..., gt=1)
    c2_star: float = Field(..., gt=1)
    bracket: tuple[float, float]
    residual: float = Field(..., ge=0)
    method: CutoffMethod


class TauParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: float
    tau: float
    tau_lower: Optional[float] = None


class EpsilonEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    arg_theta: tuple[float, ...]
    stderr_at_min: float = Field(..., ge=0)
    grid: tuple[float, ...]
    tail_value: Optional[float] = None
    alpha: float
    z_definition: str = "Z = ||est(X) - theta||^2 / sigma_y2"


class MixtureDensity(BaseModel):
    """Discrete scale mixture sum_i w_i N(est(X), c_i^2 sigma_y2 I)."""
    model_config = ConfigDict(frozen=True)

    base: Estimator
    atoms: tuple[tuple[float, float], ...]
    c_max: Optional[float] = Field(None, gt=1)

    @field_validator("atoms")
    @classmethod
    def check_atoms(cls, v: tuple[tuple[float, float], ...]) -> tuple[tuple[float, float], ...]:
        if not v:
            raise ValueError("mixture needs at least one atom")
        for c, w in v:
            if c <= 1.0 or w <= 0.0:
                raise ValueError(f"atom (c={c}, w={w}) needs c > 1 and w > 0")
        if abs(sum(w for _, w in v) - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        return v

    @model_validator(mode="after")
    def check_support(self) -> "MixtureDensity":
        if self.c_max is not None and any(c > self.c_max for c, _ in self.atoms):
            raise ValueError(f"all atoms must lie in (1, {self.c_max}]")
        return self


class DominanceCell(BaseModel):
    """Paired risk difference risk(c) - risk(1) at one theta."""
    model_config = ConfigDict(frozen=True)

    theta_norm: float
    c: float
    delta: float
    stderr: float
    unpaired_stderr: float
    risk: float
    plugin_risk: float

    @property
    def ratio(self) -> float:
        return self.risk / self.plugin_risk if self.plugin_risk > 0 else 1.0


class RunConfig(BaseModel):
    """Fully resolved CLI configuration; embedded in every output file."""
    model_config = ConfigDict(frozen=True)

    command: str
    d: int = Field(1, ge=1)
    sigma_x2: float = Field(1.0, gt=0)
    sigma_y2: float = Field(1.0, gt=0)
    alphas: tuple[float, ...] = (0.0,)
    cs: tuple[float, ...] = (1.0,)
    estimator: str = "identity"
    theta_grid: tuple[float, float, int] = config.THETA_GRID_DEFAULT
    n_samples: int = Field(config.N_EPSILON, ge=config.MIN_SAMPLES)
    seed: int = config.DEFAULT_SEED
    workers: int = Field(1, ge=1)
    force_mc: bool = False
    tol: Optional[float] = Field(None, gt=0)
    kind: str = "auto"
    epsilon: Optional[float] = None
    r_bar: Optional[float] = None
    bounds: Optional[tuple[float, float, float]] = None
    atoms: Optional[tuple[tuple[float, float], ...]] = None
    figure: Optional[str] = None
    schema_version: str = config.CSV_SCHEMA_VERSION

    @field_validator("alphas")
    @classmethod
    def check_alphas(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        bad = [a for a in v if not -1.0 <= a < 1.0]
        if bad:
            raise ValueError(f"alpha must lie in [-1, 1), got {bad}")
        return v

    @field_validator("cs")
    @classmethod
    def check_cs(cls, v: tuple[float, ...]) -> tuple[float, ...]:
        bad = [c for c in v if c < 1.0]
        if bad:
            raise ValueError(f"variance expansion c must be >= 1, got {bad}")
        return v

    @field_validator("theta_grid")
    @classmethod
    def check_grid(cls, v: tuple[float, float, int]) -> tuple[float, float, int]:
        lo, hi, n = v
        if n < 1 or hi < lo:
            raise ValueError(f"theta grid {lo}:{hi}:{n} must have hi >= lo and n >= 1")
        return v


class CheckResult(BaseModel):
    """Outcome of one acceptance check."""
    name: str
    passed: bool
    expected: Optional[str] = None
    actual: Optional[str] = None
    tolerance: Optional[str] = None
    detail: Optional[str] = None


class DominanceCoverage(BaseModel):
    """Whether an expansion chosen at alpha0 still sits below the cut-off at alpha."""
    model_config = ConfigDict(frozen=True)

    alpha: float
    c2_star: float
    covered: bool
