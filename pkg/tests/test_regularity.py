import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoprox.certificates import prox_certificate
from geoprox.functions import Ball, Halfspace, Power, ProxParams, Radial, Segment
from geoprox.operators import KM, Compose, Identity, KnownPoint, KnownSet, PointMap, Project, Prox
from geoprox.regularity import (BallRegion, BoxRegion, SampleSpec, check_gauge_monotone,
                                check_quasi_strict, draw, estimate_subregularity,
                                estimate_violation, firmness_frontier, tail_sum)
from geoprox.spaces import DomainError, Euclidean, SphereCap

E2 = Euclidean(2)
NORTH = np.array([0.0, 0.0, 1.0])
BOX = SampleSpec(seed=3, count=2000, region=BoxRegion(np.array([-2.0, -2.0]), np.array([2.0, 2.0])))
X_AXIS = Segment(np.array([-100.0, 0.0]), np.array([100.0, 0.0]))
Y_AXIS = Segment(np.array([0.0, -100.0]), np.array([0.0, 100.0]))


def rotation(theta, centre=np.zeros(2)):
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    return PointMap(lambda x: centre + R @ (x - centre), f"rot({theta})")


def test_violation_examples():
    y = np.zeros(2)
    assert estimate_violation(E2, Identity(), y, 0.3, BOX) == 0.0
    hs = Halfspace(np.array([1.0, 2.0]), 0.5)
    assert estimate_violation(E2, Project(hs), y, 0.5, BOX) <= 1e-8
    # rotation by pi/2: ((1 - a)/a) * 4 sin^2(pi/4) = 2 at a = 1/2
    assert estimate_violation(E2, rotation(math.pi / 2), y, 0.5, BOX) == pytest.approx(2.0, rel=1e-12)


def test_frontier_examples():
    y = np.zeros(2)
    fe = firmness_frontier(E2, Project(Ball(np.array([0.5, 0.0]), 1.0)), y,
                           [0.5, 0.6, 0.8, 0.95], BOX)
    assert np.all(fe.eps <= 1e-12)
    assert np.all(firmness_frontier(E2, Identity(), y, [0.2, 0.5, 0.9], BOX).eps == 0.0)
    cap = SphereCap(2, 1.0, NORTH, math.pi / 8)
    a = cap.exp(NORTH, np.array([0.1, 0.05, 0.0]))
    T = Prox(Radial(a, Power(2.0)), ProxParams(0.8))
    cert = prox_certificate(cap.c)
    assert estimate_violation(cap, T, a, cert.alpha, SampleSpec(seed=1, count=2000)) <= \
        cert.eps + 1e-8


def test_violation_requires_a_fixed_point():
    with pytest.raises(DomainError):
        estimate_violation(E2, Project(Ball(np.array([3.0, 0.0]), 1.0)), np.zeros(2), 0.5, BOX)


def test_quasi_strict_examples():
    cap = SphereCap(2, 1.0, NORTH, math.pi / 8)
    a = cap.exp(NORTH, np.array([-0.1, 0.1, 0.0]))
    ok, margin = check_quasi_strict(cap, Prox(Radial(a, Power(2.0)), ProxParams(0.5)), a,
                                    SampleSpec(seed=2, count=2000))
    assert ok and margin > 0
    assert not check_quasi_strict(E2, Identity(), np.zeros(2), BOX)[0]
    assert not check_quasi_strict(E2, rotation(0.7), np.zeros(2), BOX)[0]


def test_subregularity_examples():
    C = Ball(np.zeros(2), 1.0)
    est = estimate_subregularity(E2, Project(C), KnownSet([C]), BOX)
    assert est.mu == pytest.approx(1.0, rel=1e-12)
    assert est.excluded_near_fix > 0
    est = estimate_subregularity(E2, KM(Project(C), 0.5), KnownSet([C]), BOX)
    assert est.mu == pytest.approx(2.0, rel=1e-12)
    T = Compose([Project(X_AXIS), Project(Y_AXIS)])
    est = estimate_subregularity(E2, T, KnownPoint(np.zeros(2)), BOX)
    assert est.mu == pytest.approx(1.0, rel=1e-12)


def test_subregularity_is_seed_reproducible():
    C = Ball(np.array([0.3, 0.0]), 0.5)
    T = Compose([Project(C), Project(Halfspace(np.array([0.0, 1.0]), 0.1))])
    S = KnownSet([C, Halfspace(np.array([0.0, 1.0]), 0.1)])
    a = estimate_subregularity(E2, T, S, BOX)
    b = estimate_subregularity(E2, T, S, BOX)
    assert a.mu == b.mu and np.array_equal(a.witness, b.witness)


def test_sampling_regions():
    cap = SphereCap(2, 1.0, NORTH, math.pi / 8)
    with pytest.raises(DomainError):
        draw(cap, SampleSpec(region=BoxRegion(np.zeros(3), np.ones(3))))
    with pytest.raises(DomainError):
        draw(cap, SampleSpec(region=BallRegion(NORTH, cap.delta * 2)))
    pts = draw(E2, SampleSpec(seed=0, count=500, region=BallRegion(np.ones(2), 0.5)))
    assert np.all(np.linalg.norm(pts - 1.0, axis=1) <= 0.5)


def test_gauge_examples():
    d = 0.5 ** np.arange(20)
    assert check_gauge_monotone(d, 0.5)
    assert not check_gauge_monotone(d, 0.25)
    assert not check_gauge_monotone(np.ones(10), 0.9)
    assert check_gauge_monotone(d, lambda t: 0.5 * t)


def test_tail_sum_examples():
    assert tail_sum(0.5, 1.0, 0) == pytest.approx(2.0)
    assert tail_sum(0.9, 1.0, 1) == pytest.approx(9.0)
    vals = [tail_sum(0.7, 1.0, k) for k in range(60)]
    assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-8
    with pytest.raises(DomainError):
        tail_sum(1.0, 1.0, 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.0, 0.9), st.integers(0, 2 ** 32 - 1))
def test_frontier_is_monotone_in_alpha(a1, gap, seed):
    a2 = min(a1 + gap, 0.99)
    T = rotation(1.1)
    spec = SampleSpec(seed=seed, count=200, region=BOX.region)
    fe = firmness_frontier(E2, T, np.zeros(2), [a1, a2], spec)
    assert fe.eps[1] <= fe.eps[0] + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 2.0), st.integers(0, 2 ** 32 - 1))
def test_relaxed_certificate_stays_valid(lam, seed):
    # if (alpha, eps) holds on a sample, so does (alpha', eps) for alpha' >= alpha
    cap = SphereCap(2, 1.0, NORTH, math.pi / 8)
    a = cap.exp(NORTH, np.array([0.05, -0.1, 0.0]))
    T = Prox(Radial(a, Power(2.0)), ProxParams(lam))
    cert = prox_certificate(cap.c)
    spec = SampleSpec(seed=seed, count=200)
    fe = firmness_frontier(cap, T, a, [cert.alpha, 0.5 * (1 + cert.alpha), 0.99], spec)
    assert np.all(fe.eps <= cert.eps + 1e-8)
