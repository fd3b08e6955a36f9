"""Operator expressions built from prox mappings and projectors.

An expression is an immutable tree::

    Identity | Prox(f, params) | Project(set) | KM(inner, beta)
             | Compose([T_n, ..., T_1])   # applies T_1 first
             | Average([(T_i, w_i), ...], p)

``apply`` evaluates a tree at a point.  On a sphere cap every intermediate
point is checked to stay in the cap; leaving it raises :class:`DomainEscape`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.optimize import minimize

from ._scalar import golden_argmin
from .functions import (Ball, ConvexFunction, ConvexSet, Halfspace, ProxParams,
                        Segment, contains, project, prox, set_distance)
from .spaces import DomainError, ModelSpace


class DomainEscape(DomainError):
    """An operator produced a point outside the sphere cap."""


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True, eq=False)
class Prox:
    f: ConvexFunction
    params: ProxParams


@dataclass(frozen=True, eq=False)
class Project:
    set: ConvexSet


@dataclass(frozen=True, eq=False)
class KM:
    """Relaxation ``beta T + (1 - beta) Id`` taken along geodesics."""

    inner: "OperatorExpr"
    beta: float

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"relaxation parameter must lie in (0, 1], got {self.beta}")


@dataclass(frozen=True, eq=False)
class Compose:
    ops: tuple

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if not self.ops:
            raise DomainError("composition needs at least one operator")


@dataclass(frozen=True, eq=False)
class Average:
    """Weighted p-barycenter of the images ``T_i x``."""

    terms: tuple
    p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((op, float(w)) for op, w in self.terms))
        weights = [w for _, w in self.terms]
        if not weights or min(weights) <= 0:
            raise DomainError("average needs positive weights")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise DomainError("average weights must sum to 1")
        if not self.p > 1:
            raise DomainError("barycenter exponent must exceed 1")


@dataclass(frozen=True, eq=False)
class PointMap:
    """Arbitrary map given as a Python callable (not serializable)."""

    func: Callable = field(repr=False)
    label: str = "map"


OperatorExpr = Union[Identity, Prox, Project, KM, Compose, Average, PointMap]


def apply(space: ModelSpace, T: OperatorExpr, x, check_cap: bool = True) -> np.ndarray:
    x = space.check(x)
    out = _apply(space, T, x, check_cap)
    return out


def _guard(space, y, T, check_cap):
    if check_cap and space.is_sphere and not space.in_cap(y):
        raise DomainEscape(
            f"{type(T).__name__} left the cap (distance "
            f"{float(space.cap_distance(y)):.6g} > {space.delta:.6g})")
    return y


def _apply(space, T, x, check_cap):
    if isinstance(T, Identity):
        return x
    if isinstance(T, Prox):
        y = prox(space, T.f, T.params, x)
    elif isinstance(T, Project):
        y = project(space, T.set, x)
    elif isinstance(T, KM):
        inner = _apply(space, T.inner, x, check_cap)
        y = space.geodesic(x, inner, T.beta)
    elif isinstance(T, Compose):
        y = x
        for op in reversed(T.ops):
            y = _apply(space, op, y, check_cap)
        return y
    elif isinstance(T, Average):
        imgs = [_apply(space, op, x, check_cap) for op, _ in T.terms]
        y = barycenter(space, imgs, [w for _, w in T.terms], T.p)
    elif isinstance(T, PointMap):
        y = space.check(T.func(x))
    else:
        raise TypeError(f"not an operator expression: {T!r}")
    return _guard(space, y, T, check_cap)


def walk(T: OperatorExpr):
    """Yield every node of an expression tree, parents first."""
    yield T
    if isinstance(T, KM):
        yield from walk(T.inner)
    elif isinstance(T, Compose):
        for op in T.ops:
            yield from walk(op)
    elif isinstance(T, Average):
        for op, _ in T.terms:
            yield from walk(op)


# -- transport discrepancy and surrogate ------------------------------------------

def transport_discrepancy(space: ModelSpace, T: OperatorExpr, x, y,
                          Tx=None, Ty=None) -> float:
    """The six-distance discrepancy of ``T`` at the pair ``(x, y)``.

    ``(c/2) [d(Tx,x)^p + d(Ty,y)^p + d(Tx,Ty)^p + d(x,y)^p - d(Tx,y)^p - d(x,Ty)^p]``
    """
    x, y = space.check(x), space.check(y)
    Tx = apply(space, T, x) if Tx is None else Tx
    Ty = apply(space, T, y) if Ty is None else Ty
    d, p = space.distance, space.p
    return 0.5 * space.c * (d(Tx, x) ** p + d(Ty, y) ** p + d(Tx, Ty) ** p
                            + d(x, y) ** p - d(Tx, y) ** p - d(x, Ty) ** p)


# -- fixed-set descriptors --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KnownPoint:
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))


@dataclass(frozen=True, eq=False)
class KnownSet:
    """Intersection of library sets and (optionally) single points."""

    sets: tuple = ()
    points: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        object.__setattr__(self, "points",
                           tuple(np.asarray(q, dtype=float) for q in self.points))
        if not self.sets and not self.points:
            raise DomainError("known set needs at least one member")


@dataclass(frozen=True)
class EmptySet:
    pass


@dataclass(frozen=True)
class Unknown:
    pass


FixedSetDescriptor = Union[KnownPoint, KnownSet, EmptySet, Unknown]


def surrogate(space: ModelSpace, T: OperatorExpr, x, S: FixedSetDescriptor,
              Tx=None) -> float:
    """Residual surrogate ``(c/2)^(1/p) d(Tx, x)``, or ``inf`` for an empty ``S``.

    Assumes ``S`` is a subset of the fixed points of ``T``. The factor
    ``(c/2)^(1/p)`` is the one that makes ``surrogate^p`` equal the transport
    discrepancy at a fixed point; the reciprocal ``(2/c)^(1/p)`` is sometimes
    quoted for the same quantity and is deliberately not used.
    """
    x = space.check(x)
    if isinstance(S, EmptySet):
        return math.inf
    Tx = apply(space, T, x) if Tx is None else Tx
    return (0.5 * space.c) ** (1.0 / space.p) * float(space.distance(Tx, x))


def fixed_point_distance(space: ModelSpace, S: FixedSetDescriptor, x) -> float:
    """Distance from ``x`` to the described set, accurate to about 1e-8."""
    x = space.check(x)
    if isinstance(S, KnownPoint):
        return float(space.distance(x, S.point))
    if isinstance(S, KnownSet):
        return _intersection_distance(space, S, x)
    if isinstance(S, EmptySet):
        return math.inf
    raise DomainError("distance to an unknown fixed set is undefined")


def _intersection_distance(space, S, x, tol=1e-10):
    if S.points:
        q = S.points[0]
        if any(space.distance(q, r) > 1e-8 for r in S.points[1:]) or \
                not all(contains(space, c, q, 1e-8) for c in S.sets):
            raise DomainError("described fixed set is empty")
        return float(space.distance(x, q))
    sets = S.sets
    if len(sets) == 1:
        return set_distance(space, sets[0], x)
    gaps = [set_distance(space, c, x) for c in sets]
    if max(gaps) == 0.0:
        return 0.0
    if not space.is_sphere and all(isinstance(c, Halfspace) for c in sets):
        return float(space.distance(x, _halfspace_nearest(sets, x)))
    # if some single-set projection is feasible it is the nearest feasible point;
    # feasibility is judged relative to the step so tiny distances stay exact
    for c in sets:
        y = project(space, c, x)
        step = float(space.distance(x, y))
        if all(set_distance(space, other, y) <= 1e-9 * step for other in sets):
            return step
    segs = [c for c in sets if isinstance(c, Segment)]
    if segs:
        return _segment_intersection_distance(space, segs[0],
                                              [c for c in sets if c is not segs[0]], x, tol)
    if not space.is_sphere:
        return float(space.distance(x, _dykstra(space, sets, x)))
    return float(space.distance(x, _sphere_balls_nearest(space, sets, x)))


def _halfspace_nearest(sets, x):
    """Nearest point of a polyhedron by enumerating active constraint sets."""
    N = np.array([h.normal for h in sets], dtype=float)
    b = np.array([h.offset for h in sets], dtype=float)
    best, best_d = None, math.inf
    for k in range(1, len(sets) + 1):
        for active in itertools.combinations(range(len(sets)), k):
            A, rhs = N[list(active)], b[list(active)]
            try:
                lam = np.linalg.solve(A @ A.T, A @ x - rhs)
            except np.linalg.LinAlgError:
                continue
            if np.any(lam < 0):
                continue
            y = x - A.T @ lam
            scale = np.abs(b) + np.linalg.norm(N, axis=1) * (np.linalg.norm(y) + np.linalg.norm(x))
            if np.all(N @ y - b <= 1e-12 * scale):
                d = float(np.linalg.norm(y - x))
                if d < best_d:
                    best, best_d = y, d
    if best is None:
        raise DomainError("described fixed set is empty")
    return best


def _segment_intersection_distance(space, seg, others, x, tol):
    def point(t):
        return space.geodesic(seg.a, seg.b, t)

    def gap(t):
        return sum(set_distance(space, c, point(t)) for c in others)

    t0 = golden_argmin(gap, 0.0, 1.0, 1e-14)
    if gap(t0) > 1e-9:
        raise DomainError("described fixed set is empty")

    def edge(inside, outside):
        if gap(outside) <= tol:
            return outside
        for _ in range(200):
            mid = 0.5 * (inside + outside)
            if mid in (inside, outside):
                break
            if gap(mid) <= tol:
                inside = mid
            else:
                outside = mid
        return inside

    lo, hi = edge(t0, 0.0), edge(t0, 1.0)
    if hi - lo < 1e-15:
        return float(space.distance(x, point(lo)))
    t = golden_argmin(lambda s: float(space.distance(x, point(s))), lo, hi, 1e-14)
    return float(space.distance(x, point(t)))


def _dykstra(space, sets, x, max_cycles=200000):
    y = x.copy()
    incr = [np.zeros_like(x) for _ in sets]
    for _ in range(max_cycles):
        prev = y
        for i, c in enumerate(sets):
            z = y + incr[i]
            y = project(space, c, z)
            incr[i] = z - y
        if np.linalg.norm(y - prev) <= 1e-15 * (1.0 + np.linalg.norm(y)):
            break
    return y


def _sphere_balls_nearest(space, sets, x):
    if not all(isinstance(c, Ball) for c in sets):
        raise DomainError("spherical intersections support balls and segments only")
    R2 = space.radius ** 2
    cons = [{"type": "eq", "fun": lambda y: y @ y - R2, "jac": lambda y: 2 * y}]
    for c in sets:
        lim = R2 * math.cos(c.radius / space.radius)
        cons.append({"type": "ineq", "fun": lambda y, c=c, lim=lim: y @ c.center - lim,
                     "jac": lambda y, c=c: c.center})
    start = project(space, sets[0], x)
    res = minimize(lambda y: float((y - x) @ (y - x)), start, jac=lambda y: 2 * (y - x),
                   constraints=cons, method="SLSQP",
                   options={"ftol": 1e-16, "maxiter": 1000})
    y = res.x * (space.radius / np.linalg.norm(res.x))
    if not all(contains(space, c, y, 1e-8) for c in sets):
        raise DomainError("described fixed set is empty")
    return y


# -- barycenters ------------------------------------------------------------------

def two_point_fraction(weight: float, p: float) -> float:
    """Barycentric coordinate of the first point in the two-point p-barycenter.

    The barycenter of ``weight * delta_x1 + (1 - weight) * delta_x2`` is the
    point at fraction ``1 - t`` from ``x1`` toward ``x2`` where
    ``t = 1 / (((1 - weight) / weight)^(1/(p-1)) + 1)``.
    """
    if weight >= 1.0:
        return 1.0
    if weight <= 0.0:
        return 0.0
    return 1.0 / (((1.0 - weight) / weight) ** (1.0 / (p - 1.0)) + 1.0)


def _objective(space, z, pts, w, p):
    return float(np.sum(w * space.distance(pts, z) ** p))


def barycenter(space: ModelSpace, points: Sequence, weights: Sequence[float],
               p: float = 2.0, tol: float = 1e-14, max_iter: int = 10000) -> np.ndarray:
    """Minimizer of ``z -> sum_i w_i d(z, x_i)^p`` for a finite weighted set."""
    pts = space.check(np.asarray(points, dtype=float))
    w = np.asarray(weights, dtype=float)
    if pts.ndim != 2 or len(pts) != len(w):
        raise DomainError("need one weight per point")
    if len(w) == 0 or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
        raise DomainError("weights must be positive and sum to 1")
    if not p > 1:
        raise DomainError("barycenter exponent must exceed 1")
    if len(pts) == 1:
        return pts[0].copy()
    if len(pts) == 2:
        t = two_point_fraction(w[0], p)
        return space.geodesic(pts[0], pts[1], 1.0 - t)
    if not space.is_sphere and p == 2.0:
        return w @ pts
    # seed by folding two-point barycenters, then majorize-minimize steps
    z, acc = pts[0], w[0]
    for xi, wi in zip(pts[1:], w[1:]):
        t = two_point_fraction(acc / (acc + wi), p)
        z = space.geodesic(z, xi, 1.0 - t)
        acc += wi
    fz = _objective(space, z, pts, w, p)
    for _ in range(max_iter):
        d = np.maximum(space.distance(pts, z), 1e-300)
        coef = w * d ** (p - 2.0)
        v = coef @ space.log(np.broadcast_to(z, pts.shape), pts) / coef.sum()
        step = 1.0
        while step > 1e-12:
            cand = space.exp(z, step * v)
            fc = _objective(space, cand, pts, w, p)
            # objective rounding stalls the line search near the minimizer
            if fc <= fz * (1.0 + 4e-16):
                break
            step *= 0.5
        else:
            break
        moved = float(space.distance(z, cand))
        z, fz = cand, fc
        if moved <= tol:
            break
    return z
