"""Tests for the point estimators and moment bounds."""

import math

import numpy as np
import pytest

from errors import DomainError, TheoremInapplicableError
from estimators import (
    berger_condition,
    damped_mean_lower_bound,
    evaluate,
    moment_bounds,
    parse_estimator,
    quartic_bound_from_componentwise,
    space_points,
)
from models import BoundsProvenance, Estimator, EstimatorKind, Model, ParameterSpace, Shrinkage, ShrinkageKind, SpaceKind


def test_identity_returns_input(unit3):
    x = np.array([0.3, -1.0, 2.0])
    assert np.array_equal(evaluate(Estimator.identity(), x, unit3), x)


def test_james_stein_on_unit_vector(unit3):
    assert np.allclose(evaluate(Estimator.james_stein(), [1.0, 0.0, 0.0], unit3), 0.0)


def test_positive_part_clips_to_zero(unit3):
    x = np.array([0.5, 0.5, 0.0])
    assert np.array_equal(evaluate(Estimator.james_stein_plus(), x, unit3), np.zeros(3))



def test_positive_part_never_flips_or_grows():
    model = Model(d=5, sigma_x2=1.0, sigma_y2=1.0)
    x = np.random.default_rng(4).normal(scale=1.5, size=(2000, 5))
    est = evaluate(Estimator.james_stein_plus(), x, model)
    assert np.all(est * x >= 0.0)
    assert np.all(np.linalg.norm(est, axis=1) <= np.linalg.norm(x, axis=1) * (1.0 + 1e-12))
    assert np.any(np.all(est == 0.0, axis=1))

def test_james_stein_maps_origin_to_origin(unit3):
    assert np.array_equal(evaluate(Estimator.james_stein(), np.zeros(3), unit3), np.zeros(3))


def test_clipped_baranchik_is_positive_part(unit3):
    x = np.random.default_rng(1).normal(scale=2.0, size=(1000, 3))
    baranchik = Estimator.baranchik(Shrinkage(kind=ShrinkageKind.CLIP, b=1.0))
    assert np.allclose(evaluate(baranchik, x, unit3), evaluate(Estimator.james_stein_plus(), x, unit3), atol=1e-14)


@pytest.mark.parametrize("est", [
    Estimator.james_stein(),
    Estimator.james_stein_plus(),
    Estimator.baranchik(Shrinkage(kind=ShrinkageKind.RATIONAL, b=1.0, f=2.0)),
    Estimator.affine(0.6),
])
def test_shrinkage_is_rotation_equivariant(est):
    model = Model(d=4, sigma_x2=1.0, sigma_y2=1.0)
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    x = rng.normal(size=(50, 4))
    assert est.is_orthogonally_equivariant
    assert np.allclose(evaluate(est, x @ q.T, model), evaluate(est, x, model) @ q.T, atol=1e-12)


def test_truncated_is_componentwise():
    model = Model(d=2, sigma_x2=1.0, sigma_y2=1.0)
    assert np.array_equal(evaluate(Estimator.truncated(), [-1.0, 2.0], model), [0.0, 2.0])
    assert not Estimator.truncated().is_orthogonally_equivariant


def test_james_stein_needs_three_dimensions():
    with pytest.raises(DomainError):
        evaluate(Estimator.james_stein(), [1.0, 1.0], Model(d=2, sigma_x2=1.0, sigma_y2=1.0))


def test_evaluate_checks_dimension(unit3):
    with pytest.raises(DomainError):
        evaluate(Estimator.identity(), [1.0, 2.0], unit3)


def test_custom_estimator(unit3):
    half = Estimator.custom(lambda x: 0.5 * x, equivariant=True)
    assert np.allclose(evaluate(half, [2.0, 4.0, 6.0], unit3), [1.0, 2.0, 3.0])
    broken = Estimator.custom(lambda x: x[:, :1])
    with pytest.raises(DomainError):
        evaluate(broken, np.ones((5, 3)), unit3)


# catalog parsing

@pytest.mark.parametrize("spec,kind", [
    ("identity", EstimatorKind.IDENTITY),
    ("affine:0.75", EstimatorKind.AFFINE),
    ("truncated", EstimatorKind.TRUNCATED),
    ("js", EstimatorKind.JAMES_STEIN),
    ("JSPLUS", EstimatorKind.JAMES_STEIN_PLUS),
    ("baranchik:clip:1", EstimatorKind.BARANCHIK),
    ("baranchik:rational:1:2.5", EstimatorKind.BARANCHIK),
])
def test_parse_estimator(spec, kind):
    assert parse_estimator(spec).kind == kind


def test_parse_estimator_round_trips_its_spec():
    assert parse_estimator("affine:0.75").spec == "affine:0.75"
    assert parse_estimator("baranchik:rational:1:2.5").spec == "baranchik:rational:1.0:2.5"


@pytest.mark.parametrize("spec", ["affine:2", "affine", "nope", "baranchik:rational:1", "baranchik:fancy:1", "js:3"])
def test_parse_estimator_rejects(spec):
    with pytest.raises(DomainError):
        parse_estimator(spec)


def test_berger_condition():
    assert berger_condition(1.0, 2.0 + 4.0 / 5.0, 3)
    assert not berger_condition(2.0, 5.0, 3)
    assert not berger_condition(1.0, 2.0, 3)


# parameter spaces

def test_radial_space_lies_on_first_axis():
    pts = space_points(ParameterSpace(kind=SpaceKind.BALL, radius=2.0, n_points=5), 3, Estimator.james_stein())
    assert pts.shape == (5, 3)
    assert np.allclose(pts[:, 0], np.linspace(0.0, 2.0, 5))
    assert np.all(pts[:, 1:] == 0.0)


def test_radial_space_needs_equivariance():
    with pytest.raises(DomainError):
        space_points(ParameterSpace(), 1, Estimator.truncated())
    pts = space_points(ParameterSpace(kind=SpaceKind.HALFLINE, max_radius=3.0, n_points=4), 1, Estimator.truncated())
    assert pts.shape == (4, 1)


# moment bounds

def test_identity_moment_bounds():
    model = Model(d=3, sigma_x2=2.0, sigma_y2=1.0)
    mb = moment_bounds(Estimator.identity(), model, ParameterSpace())
    assert (mb.b0, mb.b1, mb.b2) == (6.0, 6.0, 15.0 * 4.0)
    assert mb.provenance == BoundsProvenance.ANALYTIC


def test_affine_bounds_need_bounded_space(unit3):
    with pytest.raises(TheoremInapplicableError):
        moment_bounds(Estimator.affine(0.5), unit3, ParameterSpace())
    mb = moment_bounds(Estimator.affine(0.5), unit3, ParameterSpace(kind=SpaceKind.BALL, radius=1.0))
    assert mb.b0 == pytest.approx(0.75)
    assert mb.b1 == pytest.approx(0.75 + 0.25)
    assert mb.provenance == BoundsProvenance.ANALYTIC


def test_monte_carlo_bounds_for_positive_part(unit3):
    space = ParameterSpace(kind=SpaceKind.BALL, radius=2.0, n_points=3)
    mb = moment_bounds(Estimator.james_stein_plus(), unit3, space, n=4000, seed=9)
    assert mb.provenance == BoundsProvenance.MONTE_CARLO
    assert 0.0 < mb.b0 <= mb.b1 <= 3.0 + 0.5
    assert mb.b2 <= 4.0 * 9.0


def test_quartic_bound():
    d, s2 = 4, 1.5
    assert quartic_bound_from_componentwise(3.0 * d * s2 ** 2, d * s2, d) == pytest.approx(4.0 * d * d * s2 ** 2)
    assert quartic_bound_from_componentwise(0.0, 0.0, d) == 0.0


def test_quartic_bound_holds_on_samples():
    rng = np.random.default_rng(4)
    model = Model(d=4, sigma_x2=1.0, sigma_y2=1.0)
    theta = np.array([1.0, -0.5, 0.0, 2.0])
    x = theta + rng.normal(size=(20000, 4))
    w = evaluate(Estimator.james_stein_plus(), x, model) - theta
    m1 = float(np.sum(np.mean(w ** 4, axis=0)))
    m2 = float(np.mean(np.sum(w * w, axis=1)))
    assert float(np.mean(np.sum(w * w, axis=1) ** 2)) <= quartic_bound_from_componentwise(m1, m2, 4)


# damped mean

def test_damped_mean_bound_is_exact_for_constants():
    assert damped_mean_lower_bound([2.0] * 10, 0.3) == pytest.approx(2.0 * math.exp(-0.6))


def test_damped_mean_bound_for_exponential_moments():
    t = np.random.default_rng(8).exponential(size=200_000)
    bound = damped_mean_lower_bound(t, 1.0)
    assert bound == pytest.approx(math.exp(-2.0), abs=0.01)
    assert bound <= 0.25


def test_damped_mean_bound_on_random_distributions():
    rng = np.random.default_rng(6)
    for _ in range(100):
        t = rng.gamma(shape=rng.uniform(0.2, 5.0), scale=rng.uniform(0.1, 3.0), size=500)
        s = float(rng.uniform(0.05, 2.0))
        assert float(np.mean(t * np.exp(-s * t))) >= damped_mean_lower_bound(t, s) * (1.0 - 1e-12)


def test_damped_mean_bound_rejects_degenerate_input():
    with pytest.raises(TheoremInapplicableError):
        damped_mean_lower_bound([0.0, 0.0], 1.0)
    with pytest.raises(DomainError):
        damped_mean_lower_bound([1.0, -1.0], 1.0)
