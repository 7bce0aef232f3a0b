import math

import numpy as np
import pytest

from fracivp.core import (
    Grid, GridFunction, caputo_derivative, gamma, graded_grid, nodal_derivative,
    quad_weights, rgamma, rl_integral, rl_power_rule,
)
from fracivp.errors import DomainError, GridTooCoarseError

mpmath = pytest.importorskip("mpmath")

# 50-digit values from mpmath, frozen
GAMMA_3_6 = 3.7170238530367914876
SQRT_PI = 1.7724538509055160273
G16_OVER_G18 = 0.95934176343582033941
G12_OVER_G26 = 0.64224466256492121643
G16_OVER_G14 = 1.0070458545263436366
BETA_2_02 = 4.1666666666666663968


def test_gamma_examples():
    assert gamma(1.0) == pytest.approx(1.0, rel=1e-14)
    assert gamma(0.5) == pytest.approx(SQRT_PI, rel=1e-13)
    assert gamma(3.6) == pytest.approx(GAMMA_3_6, rel=1e-13)


def test_gamma_against_mpmath():
    xs = np.linspace(0.1, 10.0, 397)
    ref = np.array([float(mpmath.gamma(mpmath.mpf(float(x)))) for x in xs])
    rel = np.abs(gamma(xs) - ref) / ref
    assert rel.max() <= 1e-10


@pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
def test_gamma_rejects_nonpositive(x):
    with pytest.raises(DomainError):
        gamma(x)


def test_rgamma_poles():
    assert rgamma(0.0) == 0.0
    assert rgamma(-2.0) == 0.0
    assert rgamma(2.5) == pytest.approx(1 / gamma(2.5))


def test_power_rule_examples():
    assert rl_power_rule(0, 0.6) == (1.0, 0.6)
    c, e = rl_power_rule(0.2, 0.6)
    assert c == pytest.approx(G16_OVER_G18, rel=1e-13) and e == pytest.approx(0.8)
    c, e = rl_power_rule(1.4, 0.2)
    assert c == pytest.approx(G12_OVER_G26, rel=1e-13) and e == pytest.approx(1.6)
    with pytest.raises(DomainError):
        rl_power_rule(0.5, -1.0)


def test_graded_grid_examples():
    assert np.allclose(graded_grid(1, 4, 1).nodes, [0, 0.25, 0.5, 0.75, 1])
    assert np.allclose(graded_grid(1, 4, 2).nodes, [0, 0.0625, 0.25, 0.5625, 1])
    assert np.allclose(graded_grid(2, 2, 3).nodes, [0, 0.25, 2])
    with pytest.raises(ValueError):
        graded_grid(1, 4, 0.5)


def test_grid_invariants():
    with pytest.raises(ValueError):
        Grid(np.array([0.0]))
    with pytest.raises(ValueError):
        Grid(np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        Grid(np.array([0.0, 0.5, 0.5]))
    with pytest.raises(ValueError):
        GridFunction(graded_grid(1, 4), np.zeros(3))
    with pytest.raises(ValueError):
        GridFunction(graded_grid(1, 2), [0.0, np.nan, 1.0])


def test_quad_weights_beta_one_is_trapezoid():
    g = graded_grid(1.0, 6, 1.7)
    W = quad_weights(1.0, g)
    h = np.diff(g.nodes)
    for i in range(1, len(g)):
        expect = np.zeros(len(g))
        expect[:i] += h[:i] / 2
        expect[1:i + 1] += h[:i] / 2
        assert np.allclose(W[i], expect, atol=1e-15)


@pytest.mark.parametrize("beta", [0.2, 0.5, 1.0, 1.6, 2.5])
def test_quad_weights_row_sums(beta):
    g = graded_grid(1.0, 64, 2)
    W = quad_weights(beta, g)
    assert np.allclose(W.sum(axis=1), g.nodes**beta / beta, rtol=1e-12, atol=1e-15)
    assert np.all(np.isfinite(W)) and np.all(W >= 0)
    assert np.all(np.triu(W, 1) == 0)


def test_quad_weights_beta_function_oracle():
    g = graded_grid(1.0, 8, 1)
    W = quad_weights(0.2, g)
    exact = g.nodes**1.2 * BETA_2_02
    assert np.max(np.abs(W @ g.nodes - exact)) <= 1e-12


def test_rl_integral_examples():
    g = graded_grid(1.0, 256, 2)
    assert np.all(rl_integral(GridFunction(g, np.zeros(len(g))), 0.7).values == 0)
    one = rl_integral(GridFunction(g, np.ones(len(g))), 0.5)
    assert np.allclose(one.values, g.nodes**0.5 / gamma(1.5), atol=1e-12)
    u = graded_grid(1.0, 1024, 1)
    got = rl_integral(GridFunction.sample(u, lambda t: t**0.6), 0.2).values
    assert np.max(np.abs(got - G16_OVER_G18 * u.nodes**0.8)) <= 5e-3


def test_rl_integral_linearity_and_positivity():
    g = graded_grid(1.0, 128, 2)
    rng = np.random.default_rng(3)
    f, h = rng.normal(size=len(g)), rng.normal(size=len(g))
    a, b = 1.7, -0.3
    lhs = rl_integral(GridFunction(g, a * f + b * h), 0.4).values
    rhs = a * rl_integral(GridFunction(g, f), 0.4).values + b * rl_integral(GridFunction(g, h), 0.4).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-13
    pos = rl_integral(GridFunction(g, np.abs(f)), 0.4).values
    assert np.all(pos >= 0)


def test_semigroup():
    g = graded_grid(1.0, 1024, 1)
    f = GridFunction.sample(g, np.cos)
    two = rl_integral(rl_integral(f, 0.3), 0.4).values
    one = rl_integral(f, 0.7).values
    assert np.max(np.abs(two - one)) <= 2e-3


@pytest.mark.parametrize("mu", [0.5, 1.0, 2.6])
@pytest.mark.parametrize("delta", [0.2, 0.8, 1.4])
def test_power_rule_convergence_order(mu, delta):
    # r = 3 keeps every pair at order ~2; see test_power_rule_order_limit_r2
    errs = []
    for N in (64, 128, 256, 512):
        g = graded_grid(1.0, N, 3)
        c, e = rl_power_rule(delta, mu)
        got = rl_integral(GridFunction.sample(g, lambda t: t**mu), delta).values
        errs.append(np.max(np.abs(got - c * g.nodes**e)))
    if max(errs) <= 1e-12:
        return                      # exact for piecewise-linear data
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert orders[-1] >= 1.5


@pytest.mark.xfail(strict=True, reason="r = 2 limits (mu, delta) = (0.5, 0.2) to order r(mu + delta) = 1.4")
def test_power_rule_order_limit_r2():
    errs = []
    for N in (256, 512, 1024):
        g = graded_grid(1.0, N, 2)
        c, e = rl_power_rule(0.2, 0.5)
        got = rl_integral(GridFunction.sample(g, lambda t: t**0.5), 0.2).values
        errs.append(np.max(np.abs(got - c * g.nodes**e)))
    assert math.log2(errs[-2] / errs[-1]) >= 1.5


def test_nodal_derivative_exact_for_polynomials():
    g = graded_grid(1.0, 40, 2)
    t = g.nodes
    y = 3 - t + 2 * t**2 - t**3 + 0.5 * t**4
    assert np.allclose(nodal_derivative(t, y, 3), -6 + 12 * t, atol=1e-7)
    q = 1 - 2 * t + 5 * t**2
    assert np.allclose(nodal_derivative(t, q, 1), -2 + 10 * t, atol=1e-9)
    with pytest.raises(GridTooCoarseError):
        nodal_derivative(t[:3], y[:3], 2)


def test_caputo_examples():
    g = graded_grid(1.0, 2048, 2)
    const = caputo_derivative(GridFunction(g, np.full(len(g), 4.2)), 1.3)
    assert np.all(const.values == 0)
    lin = caputo_derivative(GridFunction.sample(g, lambda t: t), 0.5, 0.01)
    assert np.max(np.abs(lin.values - lin.nodes**0.5 / gamma(1.5))) <= 1e-6
    u = GridFunction.sample(g, lambda t: gamma(1.6) / gamma(3.6) * t**2.6)
    d = caputo_derivative(u, 2.2, 0.1)
    assert d.nodes[0] >= 0.1
    assert np.max(np.abs(d.values - G16_OVER_G14 * d.nodes**0.4)) <= 5e-3


@pytest.mark.parametrize("beta", [0.3, 1.0, 1.5, 2.2, 3.0])
def test_caputo_annihilates_low_polynomials(beta):
    g = graded_grid(1.0, 512, 2)
    for k in range(math.ceil(beta)):
        d = caputo_derivative(GridFunction.sample(g, lambda t: t**k), beta)
        assert np.max(np.abs(d.values)) <= 1e-8


def test_caputo_high_order_roundoff_scaling():
    # order-4 differences amplify rounding of the data by ~ eps / h^4 at the
    # coarse end of the grid, so annihilation is only to that level
    g = graded_grid(1.0, 512, 2)
    d = caputo_derivative(GridFunction.sample(g, lambda t: t**3), 3.7)
    h = np.diff(g.nodes).max()
    err = np.max(np.abs(d.values))
    assert 0 < err <= 100 * np.finfo(float).eps / h**4


def test_caputo_coarse_grid():
    g = graded_grid(1.0, 2, 1)
    with pytest.raises(GridTooCoarseError):
        caputo_derivative(GridFunction(g, np.zeros(3)), 2.5)
