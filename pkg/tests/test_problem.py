import math

import numpy as np
import pytest

from fracivp.core import GridFunction, gamma, graded_grid
from fracivp.errors import DomainError, UnsupportedCaseError
from fracivp.problem import (
    NO_GUARANTEE, Case, ProblemSpec, check_hypotheses, classify, reconstruct_u,
    reformulate, residual,
)
from fracivp.core import nodal_derivative

G16_OVER_G36 = 0.24038461538461536306
G12_OVER_G26 = 0.64224466256492121643


def spec(orders, init=None, rhs="0", horizon=1.0):
    if init is None:
        init = (0.0,) * math.ceil(orders[-1])
    return ProblemSpec(orders, init, horizon, rhs)


@pytest.mark.parametrize("orders, case", [
    ((1.8, 2.2), Case.UNSUPPORTED),
    ((0.4, 2.6), Case.A),
    ((1, 2.5), Case.B),
    ((0.5, 3), Case.C),
    ((1.4, 1.5), Case.UNSUPPORTED),
    ((1, 2), Case.UNSUPPORTED),
    ((1, 1.9), Case.UNSUPPORTED),
    ((1, 2.0001), Case.B),
    ((0.5, 2), Case.C),
    ((0.5, 1.2), Case.UNSUPPORTED),
    ((0.0, 1.5), Case.UNSUPPORTED),
    ((0.2, 0.7, 3.5), Case.A),
])
def test_classify_table(orders, case):
    tag = classify(spec(orders))
    assert tag.case is case
    assert tag.supported == (case is not Case.UNSUPPORTED)
    if not tag.supported:
        assert tag.reason


def test_classify_reason_names_condition():
    tag = classify(spec((1.8, 2.2)))
    assert "ceil(a_(n-1)) + 1 = 3" in tag.reason


def test_spec_validation():
    with pytest.raises(ValueError):
        spec((2.5,))
    with pytest.raises(ValueError):
        spec((1.0, 0.5))
    with pytest.raises(ValueError):
        ProblemSpec((0.4, 2.6), (0, 0), 1.0, "0")
    with pytest.raises(ValueError):
        ProblemSpec((0.4, 2.6), (0, 0, 0), 0.0, "0")
    with pytest.raises(ValueError):
        ProblemSpec((0.4, 1.6, 2.6), (0, 0, 0), 1.0, parse_k1())


def parse_k1():
    from fracivp.expr import parse
    return parse("y1", 1)


def test_hypotheses_case_a():
    s = spec((0.4, 2.6), rhs="y1")
    rep = check_hypotheses(s, classify(s))
    assert rep.satisfied
    bad = spec((0.4, 2.6), (0, 1, 0), rhs="y1")
    rep = check_hypotheses(bad, classify(bad))
    assert not rep.satisfied
    assert [h.name for h in rep.violations()] == ["u0^(1) = 0"]
    nonzero = spec((0.4, 2.6), rhs="1 + y1")
    assert not check_hypotheses(nonzero, classify(nonzero)).satisfied


def test_hypotheses_case_b():
    s = spec((1, 2.5), (0, 2, 0), rhs="y1 - 2")
    rep = check_hypotheses(s, classify(s))
    assert rep.satisfied
    assert rep.items[0].measured == 0.0


def test_hypotheses_case_b_multi_term_note():
    s = spec((0.5, 1, 2.5), (0, 2, 0), rhs="y1 + y2 - 2")
    rep = check_hypotheses(s, classify(s))
    assert rep.satisfied and "last" in rep.items[0].note


def test_hypotheses_case_c_propagates_domain_error():
    s = spec((0.5, 3), rhs="y1^0.5")
    with pytest.raises(DomainError):
        check_hypotheses(s, classify(s))
    ok = spec((0.5, 3), rhs="sin(t)*y1")
    assert check_hypotheses(ok, classify(ok)).satisfied


def test_hypotheses_reject_unsupported():
    s = spec((1.8, 2.2))
    with pytest.raises(UnsupportedCaseError):
        check_hypotheses(s, classify(s))


def test_reformulate_examples():
    a = reformulate(spec((0.4, 2.6)), classify(spec((0.4, 2.6))))
    assert (a.reconstruction_order, a.outer_order) == (1, pytest.approx(1.6))
    assert a.inner_orders == (pytest.approx(0.6),) and a.forcing_poly == (0.0, 0.0)
    sb = spec((1, 2.5), (7.0, 3.0, 4.0))
    b = reformulate(sb, classify(sb))
    assert (b.reconstruction_order, b.outer_order, b.inner_orders) == (1, 1.5, (0.0,))
    assert b.forcing_poly == (3.0, 4.0) and b.lower_initials == (7.0,)
    c = reformulate(spec((0.5, 3)), classify(spec((0.5, 3))))
    assert (c.reconstruction_order, c.outer_order, c.inner_orders) == (1, 2, (0.5,))


def test_reformulate_unsupported_needs_force():
    s = spec((1.8, 2.2))
    tag = classify(s)
    with pytest.raises(UnsupportedCaseError):
        reformulate(s, tag)
    vp = reformulate(s, tag, force=True)
    assert vp.watermark == NO_GUARANTEE
    assert (vp.reconstruction_order, vp.inner_orders) == (2, (pytest.approx(0.2),))
    s2 = spec((1.4, 1.5))
    with pytest.raises(UnsupportedCaseError):
        reformulate(s2, classify(s2), force=True)
    vp2 = reformulate(s2, classify(s2), force=True, fractional_reconstruction=True)
    assert vp2.fractional and vp2.reconstruction_order == 1.4 and vp2.forcing_poly == ()
    assert vp2.outer_order == pytest.approx(0.1) and vp2.inner_orders == (0.0,)


@pytest.mark.parametrize("orders, init", [
    ((0.4, 2.6), (1.0, 0.0, 3.0)),
    ((1, 2.5), (1.0, 2.0, 3.0)),
    ((0.5, 3), (5.0, 6.0, 7.0)),
    ((0.3, 1.5, 4.2), (1, 2, 0, 4, 5)),
])
def test_reformulate_preserves_information(orders, init):
    s = spec(orders, init)
    vp = reformulate(s, classify(s))
    assert vp.orders() == pytest.approx(s.orders)
    assert vp.initial_values() == pytest.approx(s.initial_values)


def test_case_slot_rules():
    a = reformulate(spec((0.4, 2.6)), classify(spec((0.4, 2.6))))
    assert a.inner_orders[-1] > 0
    sb = spec((0.5, 1, 2.5))
    b = reformulate(sb, classify(sb))
    assert b.inner_orders[-1] == 0 and b.inner_orders[0] > 0


def test_reconstruct_examples():
    g = graded_grid(1.0, 64, 2)
    vp = reformulate(spec((1.5, 2.6), (1.0, 2.0, 0.0)), classify(spec((1.5, 2.6), (1.0, 2.0, 0.0))),
                     force=True)
    assert vp.reconstruction_order == 2
    u = reconstruct_u(GridFunction(g, np.zeros(len(g))), vp)
    assert np.max(np.abs(u.values - (1 + 2 * g.nodes))) <= 1e-15

    g = graded_grid(1.0, 2048, 2)
    s1 = spec((1.8, 2.2))
    vp1 = reformulate(s1, classify(s1), force=True)
    u1 = reconstruct_u(GridFunction.sample(g, lambda t: t**0.6), vp1)
    assert np.max(np.abs(u1.values - G16_OVER_G36 * g.nodes**2.6)) <= 1e-6

    s2 = spec((1.4, 1.5))
    vp2 = reformulate(s2, classify(s2), force=True, fractional_reconstruction=True)
    u2 = reconstruct_u(GridFunction.sample(g, lambda t: t**0.2), vp2)
    assert np.max(np.abs(u2.values - G12_OVER_G26 * g.nodes**1.6)) <= 1e-5


def test_reconstruct_then_differentiate_round_trip():
    g = graded_grid(1.0, 512, 2)
    s = spec((0.4, 2.6), (1.0, 0.0, 0.5))
    vp = reformulate(s, classify(s))
    v = GridFunction.sample(g, lambda t: np.cos(3 * t) + t**2)
    u = reconstruct_u(v, vp)
    back = nodal_derivative(g.nodes, u.values, int(vp.reconstruction_order))
    inner = slice(2, -2)
    assert np.max(np.abs(back[inner] - v.values[inner])) <= 1e-3


def test_residual_examples():
    g = graded_grid(1.0, 2048, 2)
    cex1 = spec((1.8, 2.2), rhs="gamma(1.6)/(2*gamma(1.4))*t^0.4"
                " + (gamma(1.6)*gamma(1.8))^0.5/(2*gamma(1.4))*y1^0.5")
    u = GridFunction.sample(g, lambda t: G16_OVER_G36 * t**2.6)
    r = residual(u, cex1, 0.1)
    assert r.nodes[0] >= 0.1 and np.max(np.abs(r.values)) <= 5e-3

    s = spec((0.4, 2.6), (1.0, 0.0, 3.0))
    poly = GridFunction.sample(g, lambda t: 1 + 1.5 * t**2)
    assert np.max(np.abs(residual(poly, s).values)) <= 1e-8

    m = spec((0.4, 2.6), rhs=f"{gamma(4) / gamma(1.4)!r}*t^0.4 + y1 - {gamma(4) / gamma(3.6)!r}*t^2.6")
    cube = GridFunction.sample(g, lambda t: t**3)
    assert np.max(np.abs(residual(cube, m, 0.1).values)) <= 5e-3
