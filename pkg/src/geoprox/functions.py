"""Convex sets and functions with computable projections and prox mappings.

The library is deliberately small: radial functions ``w * h(d(x, anchor))``
with a convex nondecreasing profile ``h``, and indicator functions of balls,
geodesic segments and (Euclidean) halfspaces.  For radial functions the prox
minimizer lies on the geodesic from ``x`` to the anchor, so the prox reduces
to a one-dimensional convex problem in the distance travelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ._scalar import bisect_increasing, golden_section
from .spaces import GEOM_TOL, DomainError, ModelSpace


def _arr(obj, *names):
    for name in names:
        value = np.array(getattr(obj, name), dtype=float)
        value.setflags(write=False)
        object.__setattr__(obj, name, value)


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        _arr(self, "center")
        if not self.radius > 0:
            raise DomainError("ball radius must be positive")


@dataclass(frozen=True, eq=False)
class Segment:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        _arr(self, "a", "b")


@dataclass(frozen=True, eq=False)
class Halfspace:
    """The Euclidean halfspace ``{x : <normal, x> <= offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        _arr(self, "normal")
        if not np.linalg.norm(self.normal) > 0:
            raise DomainError("halfspace normal must be nonzero")


ConvexSet = Union[Ball, Segment, Halfspace]


@dataclass(frozen=True)
class Linear:
    """Profile ``h(r) = slope * r``."""

    slope: float

    def __post_init__(self):
        if not self.slope > 0:
            raise DomainError("slope must be positive")

    def value(self, r):
        return self.slope * r

    def derivative(self, r):
        # left derivative at r = 0 is what the prox optimality condition needs
        return self.slope + 0.0 * r


@dataclass(frozen=True)
class Power:
    """Profile ``h(r) = coefficient * r**exponent`` with ``exponent >= 1``."""

    exponent: float
    coefficient: float = 1.0

    def __post_init__(self):
        if not self.exponent >= 1:
            raise DomainError("power profile needs exponent >= 1")
        if not self.coefficient > 0:
            raise DomainError("coefficient must be positive")

    def value(self, r):
        return self.coefficient * np.power(r, self.exponent)

    def derivative(self, r):
        q = self.exponent
        if q == 1:
            return self.coefficient + 0.0 * r
        return self.coefficient * q * np.power(r, q - 1)


@dataclass(frozen=True, eq=False)
class Radial:
    anchor: np.ndarray
    profile: Union[Linear, Power]

    def __post_init__(self):
        _arr(self, "anchor")


@dataclass(frozen=True, eq=False)
class Indicator:
    set: ConvexSet


ConvexFunction = Union[Radial, Indicator]


@dataclass(frozen=True)
class ProxParams:
    lam: float
    p: float = 2.0

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("prox step must be positive")
        if not self.p > 1:
            raise DomainError("prox exponent p must exceed 1")


# -- sets -------------------------------------------------------------------

def set_points(cset: ConvexSet) -> list[np.ndarray]:
    """Defining points of a set (used for bounding boxes and validation)."""
    if isinstance(cset, Ball):
        return [cset.center]
    if isinstance(cset, Segment):
        return [cset.a, cset.b]
    return []


def validate_set(space: ModelSpace, cset: ConvexSet) -> None:
    if isinstance(cset, Halfspace):
        if space.is_sphere:
            raise DomainError("halfspaces are only defined in Euclidean space")
        if cset.normal.shape != (space.ambient_dim,):
            raise DomainError("halfspace normal has the wrong dimension")
        return
    for pt in set_points(cset):
        space.check(pt)
    if isinstance(cset, Ball) and space.is_sphere and cset.radius >= math.pi / 2 * space.radius:
        raise DomainError("spherical ball radius must be below a quarter great circle")


def project(space: ModelSpace, cset: ConvexSet, x) -> np.ndarray:
    """Metric projection of ``x`` onto ``cset``."""
    x = space.check(x)
    validate_set(space, cset)
    if isinstance(cset, Ball):
        d = space.distance(cset.center, x)
        if d <= cset.radius:
            return x
        return space.geodesic(cset.center, x, cset.radius / d)
    if isinstance(cset, Halfspace):
        n = cset.normal
        excess = float(n @ x) - cset.offset
        if excess <= 0.0:
            return x
        return x - (excess / float(n @ n)) * n
    if isinstance(cset, Segment):
        return _project_segment(space, cset, x)
    raise TypeError(f"not a convex set: {cset!r}")


def _project_segment(space, seg, x):
    a, b = seg.a, seg.b
    L = space.distance(a, b)
    if L == 0.0:
        return a.copy()
    if not space.is_sphere:
        # parametrize about the midpoint: no cancellation for x near it
        m, h = 0.5 * (a + b), 0.5 * (b - a)
        s = float((x - m) @ h / (h @ h))
        if s <= -1.0:
            return a.copy()
        if s >= 1.0:
            return b.copy()
        return m + s * h
    # nearest point of the great circle through a and b, then clamp to the arc
    R = space.radius
    e1 = a / np.linalg.norm(a)
    w = b - (b @ e1) * e1
    e2 = w / np.linalg.norm(w)
    q1, q2 = float(x @ e1), float(x @ e2)
    if math.hypot(q1, q2) > 1e-15 * R:
        phi = math.atan2(q2, q1)
        if 0.0 <= phi <= L / R:
            return space.geodesic(a, b, phi * R / L)
    # beyond the arc (or x orthogonal to its plane): nearer endpoint, ties to a
    return a.copy() if space.distance(x, a) <= space.distance(x, b) else b.copy()


def contains(space: ModelSpace, cset: ConvexSet, x, tol: float = GEOM_TOL) -> bool:
    x = space.check(x)
    if isinstance(cset, Ball):
        return bool(space.distance(cset.center, x) <= cset.radius + tol)
    if isinstance(cset, Halfspace):
        n = cset.normal
        return bool((float(n @ x) - cset.offset) / np.linalg.norm(n) <= tol)
    return bool(space.distance(x, project(space, cset, x)) <= tol)


def set_distance(space: ModelSpace, cset: ConvexSet, x) -> float:
    return float(space.distance(x, project(space, cset, x)))


# -- functions ----------------------------------------------------------------

def evaluate(space: ModelSpace, f: ConvexFunction, x):
    """Value of ``f`` at ``x`` (``+inf`` outside the set for indicators)."""
    x = space.check(x)
    if isinstance(f, Radial):
        return f.profile.value(space.distance(x, f.anchor))
    if isinstance(f, Indicator):
        return 0.0 if contains(space, f.set, x) else math.inf
    raise TypeError(f"not a library function: {f!r}")


def argmin_description(f: ConvexFunction):
    """The minimizer set of ``f``: a point for radial functions, else the set."""
    return f.anchor if isinstance(f, Radial) else f.set


def _radial_objective(f: Radial, params: ProxParams, D: float):
    h, lam, p = f.profile, params.lam, params.p
    scale = 1.0 / (p * lam ** (p - 1))

    def phi(s):
        return float(h.value(D - s)) + scale * s ** p

    def dphi(s):
        return -float(h.derivative(D - s)) + (s / lam) ** (p - 1)

    return phi, dphi


def _radial_step(f: Radial, params: ProxParams, D: float, tol: float = 1e-12) -> float:
    """Distance travelled toward the anchor by the prox from distance ``D``."""
    if D == 0.0:
        return 0.0
    phi, dphi = _radial_objective(f, params, D)
    lo, hi = golden_section(phi, 0.0, D, tol)
    # the objective is convex with a left derivative everywhere on (0, D]
    if dphi(D) <= 0.0:
        return D
    # dphi(0) = -h'(D) < 0 < dphi(D): polish the root inside the golden bracket
    a, b = max(0.0, lo - tol), min(D, hi + tol)
    if not dphi(a) < 0.0 < dphi(b):
        a, b = 0.0, D
    return bisect_increasing(dphi, a, b)


def prox(space: ModelSpace, f: ConvexFunction, params: ProxParams, x) -> np.ndarray:
    """Proximal point ``argmin_y f(y) + d(y, x)^p / (p lam^(p-1))``."""
    x = space.check(x)
    if isinstance(f, Indicator):
        return project(space, f.set, x)
    if not isinstance(f, Radial):
        raise TypeError(f"not a library function: {f!r}")
    anchor = space.check(f.anchor)
    D = float(space.distance(x, anchor))
    s = _radial_step(f, params, D)
    if s <= 0.0:
        return x
    if s >= D:
        return anchor.copy()
    return space.geodesic(x, anchor, s / D)


def prox_residual(space: ModelSpace, f: ConvexFunction, params: ProxParams, x) -> float:
    """First-order optimality residual of the scalar prox problem at the solution."""
    x = space.check(x)
    if not isinstance(f, Radial):
        return 0.0
    D = float(space.distance(x, f.anchor))
    if D == 0.0:
        return 0.0
    s = _radial_step(f, params, D)
    _, dphi = _radial_objective(f, params, D)
    g = dphi(s)
    if s >= D:
        return max(g, 0.0)
    if s <= 0.0:
        return max(-g, 0.0)
    return abs(g)


def moreau_envelope(space: ModelSpace, f: ConvexFunction, lam: float, x) -> float:
    """Moreau-Yosida envelope ``min_y f(y) + d(x, y)^2 / (2 lam)``."""
    y = prox(space, f, ProxParams(lam, 2.0), x)
    return float(evaluate(space, f, y)) + space.distance(y, x) ** 2 / (2.0 * lam)


# -- brute-force verifier -------------------------------------------------------

def oracle_grid(space: ModelSpace, resolution: int, center=None, radius=None,
                box=None):
    """Grid over a region of the space and its spacing.

    Euclidean: a ``resolution``-per-axis grid over ``box = (lo, hi)``.
    Sphere (``dim == 2``): a geodesic polar grid of ``resolution`` rings over
    the ball ``(center, radius)``, defaulting to the cap.
    """
    if resolution < 8:
        raise DomainError("oracle resolution must be at least 8 cells per axis")
    if not space.is_sphere:
        if box is None:
            raise DomainError("Euclidean oracle grid needs a bounding box")
        lo, hi = (np.asarray(v, dtype=float) for v in box)
        axes = [np.linspace(l, h, resolution + 1) for l, h in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        spacing = float(np.linalg.norm((hi - lo) / resolution))
        return pts, spacing
    if space.dim != 2:
        raise DomainError("spherical oracle grid is implemented for 2-spheres only")
    center = space.check(space.center if center is None else center)
    radius = space.delta if radius is None else float(radius)
    h = radius / resolution
    basis = space.tangent_basis(center)
    pts = [center[None, :]]
    for i in range(1, resolution + 1):
        r = i * h
        m = max(8, int(math.ceil(2 * math.pi * r / h)))
        ang = 2 * math.pi * np.arange(m) / m
        tangent = r * (np.cos(ang)[:, None] * basis[0] + np.sin(ang)[:, None] * basis[1])
        pts.append(space.exp(np.broadcast_to(center, tangent.shape), tangent))
    return np.concatenate(pts), 2.0 * h


def _grid_for(space, f, x, resolution, center, radius, box):
    if isinstance(f, Indicator) and isinstance(f.set, Segment):
        seg = f.set
        ts = np.linspace(0.0, 1.0, resolution * 8 + 1)
        pts = space.geodesic(seg.a, seg.b, ts)
        return pts, space.distance(seg.a, seg.b) / (resolution * 8), True
    if box is None and not space.is_sphere:
        anchors = [x]
        if isinstance(f, Radial):
            anchors.append(f.anchor)
        else:
            anchors += set_points(f.set)
            if isinstance(f.set, Ball):
                r = f.set.radius
                anchors += [f.set.center - r, f.set.center + r]
        stack = np.stack(anchors)
        lo, hi = stack.min(axis=0), stack.max(axis=0)
        pad = 0.05 * max(float(np.max(hi - lo)), 1.0)
        box = (lo - pad, hi + pad)
    pts, spacing = oracle_grid(space, resolution, center, radius, box)
    return pts, spacing, False


def prox_oracle(space: ModelSpace, f: ConvexFunction, params: ProxParams, x,
                resolution: int = 200, center=None, radius=None, box=None) -> np.ndarray:
    """Grid argmin of the prox objective; an independent check on :func:`prox`.

    Membership in sets is decided in closed form (balls, halfspaces) or by
    gridding the set itself (segments), never through :func:`project`.
    """
    x = space.check(x)
    pts, _, on_set = _grid_for(space, f, x, resolution, center, radius, box)
    lam, p = params.lam, params.p
    dist = space.distance(pts, x)
    obj = dist ** p / (p * lam ** (p - 1))
    if isinstance(f, Radial):
        obj = obj + f.profile.value(space.distance(pts, f.anchor))
    elif not on_set:
        cset = f.set
        if isinstance(cset, Ball):
            inside = space.distance(pts, cset.center) <= cset.radius
        else:
            inside = pts @ cset.normal <= cset.offset
        obj = np.where(inside, obj, np.inf)
    return pts[int(np.argmin(obj))].copy()
