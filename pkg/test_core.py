"""Tests for the divergence kernel and the closed-form loss."""

import math

import mpmath
import numpy as np
import pytest

from core import exp_neg, h_alpha, kernel_params, loss_closed, loss_from_sq_distance, loss_kl, loss_quadrature, norm_cdf, sq_distance
from errors import DomainError
from models import AlphaLoss, Model


# h_alpha

@pytest.mark.parametrize("alpha", [-1.0, -0.5, 0.0, 0.3, 0.9])
def test_h_alpha_vanishes_at_one(alpha):
    assert h_alpha(1.0, AlphaLoss(alpha=alpha)) == 0.0


def test_h_alpha_hellinger_value(hellinger):
    assert h_alpha(4.0, hellinger) == pytest.approx(2.0, rel=1e-14)


def test_h_alpha_kl_value(kl):
    assert h_alpha(2.0, kl) == pytest.approx(1.0 - math.log(2.0), rel=1e-14)
    assert h_alpha(2.0, kl) == pytest.approx(0.30685, abs=1e-5)


def test_h_alpha_against_arbitrary_precision():
    mpmath.mp.dps = 40
    z, beta = mpmath.mpf("0.5"), mpmath.mpf("0.75")
    expected = 4 / (1 - mpmath.mpf("0.25")) * (beta * z - z ** beta + (1 - beta))
    assert h_alpha(0.5, AlphaLoss(alpha=0.5)) == pytest.approx(float(expected), rel=1e-13)


def test_h_alpha_is_vectorized(hellinger):
    out = h_alpha(np.array([0.25, 1.0, 4.0]), hellinger)
    assert out.shape == (3,)
    assert out[1] == 0.0
    assert out[2] == pytest.approx(2.0)


def test_h_alpha_nonnegative_and_convex():
    rng = np.random.default_rng(7)
    for _ in range(200):
        loss = AlphaLoss(alpha=float(rng.uniform(-0.99, 0.99)))
        z1, z2 = rng.uniform(1e-3, 20.0, size=2)
        assert h_alpha(z1, loss) >= 0.0
        mid = h_alpha(0.5 * (z1 + z2), loss)
        chord = 0.5 * (h_alpha(z1, loss) + h_alpha(z2, loss))
        assert mid <= chord * (1.0 + 1e-12) + 1e-12


@pytest.mark.parametrize("z", [0.0, -1.0])
def test_h_alpha_rejects_non_positive(z, hellinger):
    with pytest.raises(DomainError):
        h_alpha(z, hellinger)


# numeric helpers

def test_norm_cdf_keeps_lower_tail_precision():
    mpmath.mp.dps = 40
    assert norm_cdf(-10.0) == pytest.approx(float(mpmath.ncdf(-10)), rel=1e-12)
    assert norm_cdf(0.0) == 0.5


def test_exp_neg_flushes_to_zero():
    assert exp_neg(800.0) == 0.0
    assert exp_neg(1.0) == pytest.approx(math.exp(-1.0))


def test_sq_distance_checks_dimension():
    model = Model(d=2, sigma_x2=1.0, sigma_y2=1.0)
    assert sq_distance(model, [1.0, 1.0], [0.0, 0.0]) == 2.0
    with pytest.raises(DomainError):
        sq_distance(model, [1.0, 1.0, 1.0], [0.0, 0.0])


def test_sq_distance_does_not_broadcast():
    model = Model(d=2, sigma_x2=1.0, sigma_y2=1.0)
    with pytest.raises(DomainError, match="theta must"):
        sq_distance(model, [1.0, 1.0], [0.0])
    with pytest.raises(DomainError, match="theta_hat"):
        sq_distance(model, [1.0], [0.0, 0.0])


# closed-form loss

def test_loss_zero_for_identical_densities(hellinger):
    model = Model(d=3, sigma_x2=1.0, sigma_y2=2.0)
    assert loss_closed(model, [1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 1.0, hellinger) == 0.0


def test_loss_closed_unit_offset(hellinger):
    model = Model(d=1, sigma_x2=1.0, sigma_y2=1.0)
    assert kernel_params(model, 1.0, hellinger).gamma0 == pytest.approx(4.0)
    expected = 4.0 * (1.0 - math.exp(-1.0 / 8.0))
    assert loss_closed(model, [1.0], [0.0], 1.0, hellinger) == pytest.approx(expected, rel=1e-13)


def test_loss_closed_matches_quadrature_in_two_dimensions():
    model = Model(d=2, sigma_x2=1.0, sigma_y2=2.0)
    loss = AlphaLoss(alpha=0.3)
    closed = loss_closed(model, [1.0, 1.0], [0.0, 0.0], 1.5, loss)
    assert loss_quadrature(model, [1.0, 1.0], [0.0, 0.0], 1.5, loss) == pytest.approx(closed, abs=1e-6)


@pytest.mark.parametrize("alpha,c,offset", [(-0.5, 1.0, 0.7), (0.0, 1.3, 0.0), (0.6, 2.0, 2.5)])
def test_loss_closed_matches_quadrature_in_one_dimension(alpha, c, offset):
    model = Model(d=1, sigma_x2=1.0, sigma_y2=1.0)
    loss = AlphaLoss(alpha=alpha)
    closed = loss_closed(model, [offset], [0.0], c, loss)
    assert loss_quadrature(model, [offset], [0.0], c, loss) == pytest.approx(closed, abs=1e-7)


def test_loss_closed_rejects_kl_and_small_c(hellinger, kl):
    model = Model(d=1, sigma_x2=1.0, sigma_y2=1.0)
    with pytest.raises(DomainError):
        loss_closed(model, [0.0], [0.0], 1.0, kl)
    with pytest.raises(DomainError):
        loss_closed(model, [0.0], [0.0], 0.9, hellinger)


def test_loss_closed_depends_only_on_distance():
    model = Model(d=3, sigma_x2=1.0, sigma_y2=1.5)
    loss = AlphaLoss(alpha=-0.4)
    rng = np.random.default_rng(5)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    for _ in range(10):
        theta_hat, theta, shift = rng.normal(size=(3, 3))
        base = loss_closed(model, theta_hat, theta, 1.3, loss)
        assert loss_closed(model, theta_hat + shift, theta + shift, 1.3, loss) == pytest.approx(base, rel=1e-12)
        assert loss_closed(model, q @ theta_hat, q @ theta, 1.3, loss) == pytest.approx(base, rel=1e-12)


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 0.7])
@pytest.mark.parametrize("c", [1.0, 1.5])
def test_loss_closed_increases_with_distance(alpha, c):
    model = Model(d=2, sigma_x2=1.0, sigma_y2=1.0)
    loss = AlphaLoss(alpha=alpha)
    values = [loss_closed(model, [t, 0.0], [0.0, 0.0], c, loss) for t in np.linspace(0.0, 5.0, 26)]
    assert np.all(np.diff(values) > 0)


@pytest.mark.slow
def test_loss_closed_matches_quadrature_on_random_cases():
    rng = np.random.default_rng(11)
    for _ in range(50):
        d = int(rng.integers(1, 4))
        model = Model(d=d, sigma_x2=1.0, sigma_y2=float(rng.uniform(0.5, 2.0)))
        loss = AlphaLoss(alpha=float(rng.uniform(-0.9, 0.9)))
        c = float(rng.uniform(1.0, 2.5))
        theta_hat, theta = rng.uniform(-1.5, 1.5, size=(2, d))
        closed = loss_closed(model, theta_hat, theta, c, loss)
        assert loss_quadrature(model, theta_hat, theta, c, loss) == pytest.approx(closed, rel=1e-6, abs=1e-6)


def test_loss_from_sq_distance_is_vectorized(hellinger):
    model = Model(d=1, sigma_x2=1.0, sigma_y2=1.0)
    out = loss_from_sq_distance(model, np.array([0.0, 1.0]), 1.0, hellinger)
    assert out[0] == 0.0
    assert out[1] == pytest.approx(4.0 * (1.0 - math.exp(-1.0 / 8.0)))


# Kullback-Leibler

def test_loss_kl_values():
    model = Model(d=1, sigma_x2=1.0, sigma_y2=1.0)
    assert loss_kl(model, [0.5], [0.5], 1.0) == 0.0
    assert loss_kl(model, [0.0], [0.0], 2.0) == pytest.approx(math.log(2.0) - 0.375, rel=1e-14)


def test_loss_kl_is_the_alpha_limit():
    model = Model(d=2, sigma_x2=1.0, sigma_y2=1.5)
    theta_hat, theta, c = [0.4, -1.1], [0.0, 0.3], 1.4
    target = loss_kl(model, theta_hat, theta, c)
    gaps = [abs(loss_closed(model, theta_hat, theta, c, AlphaLoss(alpha=-1.0 + 10.0 ** -k)) - target)
            for k in range(4, 8)]
    assert gaps[-1] < 1e-6
    assert gaps[0] > gaps[-1]


def test_kl_quadrature_agrees(kl):
    model = Model(d=1, sigma_x2=1.0, sigma_y2=1.0)
    assert loss_quadrature(model, [1.0], [0.0], 1.5, kl) == pytest.approx(loss_kl(model, [1.0], [0.0], 1.5), abs=1e-7)
