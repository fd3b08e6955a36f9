import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoprox.certificates import (ABOVE, BELOW, VALID, Certificate, a_priori_constant,
                                  asymptotic_certificate, average_certificate, certify_operator,
                                  compose_certificates, cyclic_projections_certificate,
                                  finite_certificate, fold_compose, km_certificate, linear_rate,
                                  prox_certificate, prox_prox_certificate,
                                  projected_gradient_certificate, rate_from_certificate)
from geoprox.functions import Ball, Indicator, Power, ProxParams, Radial, Segment
from geoprox.operators import KM, Average, Compose, Identity, Project, Prox
from geoprox.spaces import DomainError, Euclidean, SphereCap

c_in = st.floats(1.01, 2.0)
alpha_in = st.floats(0.01, 0.99)


def C(alpha, eps=0.0, c=2.0, p=2.0):
    return Certificate(alpha, eps, p, c)


def test_prox_certificate_examples():
    k = prox_certificate(2.0)
    assert (k.alpha, k.eps) == (0.5, 0.0)
    k = prox_certificate(1.5)
    assert k.alpha == pytest.approx(3 / 11, abs=1e-15)
    assert k.eps == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DomainError):
        prox_certificate(1.0)


def test_composition_examples():
    k = compose_certificates(C(0.5), C(0.5))
    assert (k.alpha, k.eps) == (pytest.approx(2 / 3), 0.0)
    assert compose_certificates(C(1 / 3), C(0.5)).alpha == pytest.approx(3 / 5, abs=1e-15)
    assert compose_certificates(C(0.5, 0.1), C(0.5, 0.1)).eps == pytest.approx(0.21, abs=1e-15)


def test_prox_prox_examples():
    k = prox_prox_certificate(2.0)
    assert (k.alpha, k.eps) == (pytest.approx(2 / 3), 0.0)
    k = prox_prox_certificate(1.5)
    assert (k.alpha, k.eps) == (pytest.approx(0.5), pytest.approx(3.0))
    f = fold_compose([prox_certificate(1.7)] * 2)
    assert prox_prox_certificate(1.7).alpha == pytest.approx(f.alpha, abs=1e-15)
    assert prox_prox_certificate(1.7).eps == pytest.approx(f.eps, abs=1e-15)


def test_km_examples():
    inner = prox_certificate(1.6)
    k = km_certificate(inner, 1.0)
    assert (k.alpha, k.eps) == (pytest.approx(inner.alpha, abs=1e-15), inner.eps)
    assert km_certificate(C(0.5), 0.5).alpha == pytest.approx(0.25, abs=1e-15)
    assert km_certificate(None, 0.01, eps=1.0).eps == pytest.approx(0.01)


def test_average_examples():
    k = C(0.4, 0.1)
    assert (average_certificate([k]).alpha, average_certificate([k]).eps) == (0.4, 0.1)
    got = average_certificate([C(0.3), C(0.5, 0.2)])
    assert (got.alpha, got.eps) == (0.5, 0.2)
    assert average_certificate([k, k, k]).alpha == k.alpha


def test_projected_gradient_examples():
    k = projected_gradient_certificate(1.0, 2.0)
    assert (k.alpha, k.eps) == (pytest.approx(2 / 3), 0.0)
    for beta in (0.1, 0.5, 0.9):
        a_b = km_certificate(C(0.5), beta).alpha
        assert projected_gradient_certificate(beta, 2.0).alpha == pytest.approx(1 / (2 - a_b))
    assert projected_gradient_certificate(1e-9, 1.5).eps == pytest.approx(0.0, abs=1e-8)


def test_cyclic_projection_values():
    for n in range(2, 7):
        res = cyclic_projections_certificate(n)
        assert res.certificate.alpha == pytest.approx(n / (n + 1), abs=1e-15)
        assert res.closed_form_alpha == pytest.approx((n - 1) / n)


def test_prox_after_a_known_operator_agrees_with_composition():
    for c in (1.3, 1.7, 2.0):
        k = finite_certificate("prox_after", c, alpha0=0.5, eps0=0.0)
        ref = compose_certificates(C(0.5, 0.0, c), prox_certificate(c), c)
        assert (k.alpha, k.eps) == (pytest.approx(ref.alpha), pytest.approx(ref.eps))


def test_prox_km_prox_violation_closed_form():
    for c in np.linspace(1.05, 2.0, 20):
        for beta in (0.2, 0.5, 0.8):
            k = finite_certificate("prox_km_prox", c, beta=beta)
            ref = compose_certificates(km_certificate(prox_certificate(c), beta),
                                       prox_certificate(c), c)
            e = prox_certificate(c).eps
            assert k.alpha == pytest.approx(ref.alpha, rel=1e-14)
            assert k.eps == pytest.approx((1 + beta) * e + beta * e * e, rel=1e-12, abs=1e-15)


def test_asymptotic_limits():
    assert asymptotic_certificate("prox", 1.0, 0.1).limit.alpha == 0.5
    assert asymptotic_certificate("prox_after", 1.0, 0.1, alpha0=0.5).limit.alpha == \
        pytest.approx(2 / 3)
    assert asymptotic_certificate("km", 1.0, 0.1, beta=0.5).limit.alpha == pytest.approx(0.25)
    for name, kw in (("prox", {}), ("prox_prox", {}), ("km", {"beta": 0.5}),
                     ("projected_gradient", {"beta": 0.5}), ("prox_km_prox", {"beta": 0.5})):
        gaps = []
        for delta in (1e-1, 1e-2, 1e-3, 1e-5):
            res = asymptotic_certificate(name, 1.0, delta, **kw)
            gaps.append(abs(res.local.alpha - res.limit.alpha) + res.local.eps)
        assert gaps[-1] <= 1e-4, name
        assert all(b <= a for a, b in zip(gaps, gaps[1:])), name


def test_rate_examples():
    r = linear_rate(0.5, 0.0, 2.0)
    assert r.gamma == pytest.approx(math.sqrt(3) / 2)
    assert r.validity == VALID and r.mu_upper == math.inf
    assert rate_from_certificate(C(0.5), 2.0).gamma == r.gamma
    assert linear_rate(0.5, 0.0, 1.0).validity == BELOW
    assert linear_rate(0.5, 0.5, 2.0).validity == ABOVE
    assert linear_rate(0.5, 0.5, 2.0).gamma == pytest.approx(math.sqrt(1.25))


def test_rate_approaches_violation_bound_for_large_mu():
    assert linear_rate(0.5, 0.2, 1e8).gamma == pytest.approx(math.sqrt(1.2), rel=1e-12)
    assert linear_rate(0.5, 0.0, 1e8, p=3).gamma == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(alpha_in, st.floats(0.0, 0.5), st.floats(1.0, 20.0), st.floats(1.0, 3.0))
def test_rate_increases_with_mu(alpha, eps, mu, scale):
    # the contraction factor weakens as the subregularity modulus grows
    lo, hi = linear_rate(alpha, eps, mu), linear_rate(alpha, eps, mu * (1 + scale))
    if lo.validity == VALID and hi.validity == VALID:
        assert hi.gamma >= lo.gamma


@settings(max_examples=200, deadline=None)
@given(c_in)
def test_prox_prox_matches_pairwise_fold(c):
    direct, folded = prox_prox_certificate(c), fold_compose([prox_certificate(c)] * 2)
    assert direct.alpha == pytest.approx(folded.alpha, rel=1e-12)
    assert direct.eps == pytest.approx(folded.eps, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(alpha_in, st.floats(0.0, 2.0), c_in)
def test_km_with_full_step_is_identity(alpha, eps, c):
    k = km_certificate(C(alpha, eps, c), 1.0)
    assert k.alpha == pytest.approx(alpha, rel=1e-14)
    assert k.eps == eps


@settings(max_examples=200, deadline=None)
@given(alpha_in, alpha_in, c_in)
def test_composition_matches_reciprocal_form(a0, a1, c):
    t0, t1 = (1 - a0) / a0, (1 - a1) / a1
    ref = (t0 + t1) / ((c / 2) * t0 * t1 + t0 + t1)
    assert compose_certificates(C(a0, c=c), C(a1, c=c), c).alpha == pytest.approx(ref, rel=1e-12)


def test_a_priori_constant():
    assert a_priori_constant(C(0.5)) == pytest.approx(1.0)
    assert a_priori_constant(C(0.5, 0.2)) == pytest.approx(math.sqrt(1.2))
    assert a_priori_constant(C(2 / 3, 0.0, c=1.5, p=3)) == pytest.approx((4 / 1.5) ** (1 / 3))


def test_certify_operator_tree():
    cap = SphereCap(2, 1.0, [0.0, 0.0, 1.0], math.pi / 8)
    a = np.array([0.0, 0.0, 1.0])
    P = Prox(Radial(a, Power(2.0)), ProxParams(1.0))
    assert certify_operator(cap, P).alpha == prox_certificate(cap.c).alpha
    k = certify_operator(cap, Compose([P, P]))
    assert k.alpha == pytest.approx(prox_prox_certificate(cap.c).alpha)
    k = certify_operator(cap, KM(P, 0.5))
    assert k.alpha == pytest.approx(km_certificate(prox_certificate(cap.c), 0.5).alpha)
    E = Euclidean(2)
    seg = Segment(np.zeros(2), np.ones(2))
    assert certify_operator(E, Project(seg)).alpha == 0.5
    assert certify_operator(E, Prox(Indicator(Ball(np.zeros(2), 1.0)), ProxParams(1.0))).eps == 0
    k = certify_operator(E, Average([(Project(seg), 0.5),
                                     (Compose([Project(seg), Project(seg)]), 0.5)]))
    assert k.alpha == pytest.approx(2 / 3)
    with pytest.raises(DomainError):
        certify_operator(E, Identity())
