"""Model geodesic spaces: Euclidean space and small caps of a round sphere.

Points are plain numpy arrays of ambient coordinates.  Every metric routine
broadcasts over leading axes, so a batch of points is an array of shape
``(n, ambient_dim)``.

A sphere of curvature ``kappa`` is the ambient sphere of radius
``1/sqrt(kappa)`` in ``R^(dim+1)``.  Geometry primitives (distance, geodesic,
log/exp) are valid anywhere on that sphere away from antipodes; the cap of
radius ``delta`` about ``center`` is the *domain* used by operators and
samplers, and is enforced via :meth:`ModelSpace.check_cap`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GEOM_TOL = 1e-10
RESIDUAL_TOL = 1e-9
SPHERE_NORM_TOL = 1e-12
# geodesic angle beyond which two sphere points count as antipodal
ANTIPODAL_MARGIN = 1e-8


class DomainError(ValueError):
    """A point or parameter lies outside the domain of a space or operation."""


def local_convexity_constant(kappa: float, delta: float) -> float:
    """Uniform convexity constant of a geodesic ball of radius ``delta``.

    Returns ``4 delta sqrt(kappa) tan(pi/2 - 2 delta sqrt(kappa))``, the
    constant for which a ball of that radius in a space of curvature at most
    ``kappa`` is 2-uniformly convex.  Valid for ``0 < delta < pi/(4 sqrt(kappa))``.
    """
    if kappa <= 0:
        raise DomainError(f"curvature must be positive, got {kappa}")
    u = 2.0 * delta * math.sqrt(kappa)
    if not 0.0 < u < math.pi / 2:
        raise DomainError(
            f"delta={delta} outside (0, pi/(4 sqrt(kappa))) for kappa={kappa}")
    # 2u*tan(pi/2 - u) == 2u/tan(u); the latter keeps full precision as u -> 0
    return 2.0 * u / math.tan(u)


@dataclass(frozen=True, eq=False)
class ModelSpace:
    """A concrete 2-uniformly convex geodesic space.

    Use :func:`Euclidean` or :func:`SphereCap` to construct one.
    """

    kind: str
    dim: int
    kappa: float = 0.0
    center: np.ndarray | None = None
    delta: float = math.inf
    p: float = 2.0
    c: float = 2.0
    _basis: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_sphere(self) -> bool:
        return self.kind == "sphere_cap"

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1 if self.is_sphere else self.dim

    @property
    def radius(self) -> float:
        """Radius of the ambient sphere (infinite for Euclidean space)."""
        return 1.0 / math.sqrt(self.kappa) if self.is_sphere else math.inf

    def describe(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.is_sphere:
            out.update(kappa=self.kappa, center=self.center.tolist(),
                       delta=self.delta)
        return out

    # -- validation ---------------------------------------------------------

    def check(self, x, cap: bool = False) -> np.ndarray:
        """Return ``x`` as a float array after checking it lies in the space.

        With ``cap=True`` a sphere point must also lie in the cap.
        """
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.ambient_dim,):
            raise DomainError(
                f"expected points with {self.ambient_dim} coordinates, "
                f"got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DomainError("non-finite coordinates")
        if self.is_sphere:
            dev = np.abs(np.linalg.norm(x, axis=-1) * math.sqrt(self.kappa) - 1.0)
            if np.any(dev > SPHERE_NORM_TOL):
                raise DomainError(
                    f"point off the sphere of curvature {self.kappa} "
                    f"(norm deviation {float(np.max(dev)):.3g})")
            if cap:
                self.check_cap(x)
        return x

    def cap_distance(self, x) -> np.ndarray:
        return self.distance(self.center, x)

    def in_cap(self, x, tol: float = GEOM_TOL):
        if not self.is_sphere:
            return np.ones(np.shape(x)[:-1], dtype=bool)
        return self.cap_distance(x) <= self.delta + tol

    def check_cap(self, x, tol: float = GEOM_TOL) -> None:
        if self.is_sphere and not np.all(self.in_cap(x, tol)):
            worst = float(np.max(self.cap_distance(x)))
            raise DomainError(
                f"point at distance {worst:.6g} from the cap center exceeds "
                f"cap radius {self.delta:.6g}")

    # -- metric -------------------------------------------------------------

    def distance(self, x, y) -> np.ndarray | float:
        """Intrinsic distance, broadcasting over leading axes."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not self.is_sphere:
            out = np.linalg.norm(x - y, axis=-1)
        else:
            # 2*atan2(|u-v|, |u+v|) is accurate at both small and large angles
            R = self.radius
            u = x / np.linalg.norm(x, axis=-1, keepdims=True)
            v = y / np.linalg.norm(y, axis=-1, keepdims=True)
            out = 2.0 * R * np.arctan2(np.linalg.norm(u - v, axis=-1),
                                       np.linalg.norm(u + v, axis=-1))
        return float(out) if np.ndim(out) == 0 else out

    def geodesic(self, x, y, t) -> np.ndarray:
        """Point at fraction ``t`` along the geodesic from ``x`` to ``y``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any((t < 0.0) | (t > 1.0)):
            raise DomainError("geodesic parameter must lie in [0, 1]")
        tt = t[..., None]
        if not self.is_sphere:
            return (1.0 - tt) * x + tt * y
        R = self.radius
        theta = np.asarray(self.distance(x, y)) / R
        if np.any(theta > math.pi - ANTIPODAL_MARGIN):
            raise DomainError("antipodal points have no unique geodesic")
        th = theta[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.sin(th)
            a = np.where(s > 0, np.sin((1.0 - tt) * th) / s, 1.0 - tt)
            b = np.where(s > 0, np.sin(tt * th) / s, tt)
        out = a * x + b * y
        out = R * out / np.linalg.norm(out, axis=-1, keepdims=True)
        # exact endpoints
        out = np.where(tt == 0.0, x, out)
        out = np.where(tt == 1.0, y, out)
        return out

    def log(self, x, y) -> np.ndarray:
        """Tangent vector at ``x`` pointing to ``y`` with length ``d(x, y)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not self.is_sphere:
            return y - x
        R2 = self.radius ** 2
        w = y - (np.sum(x * y, axis=-1, keepdims=True) / R2) * x
        nw = np.linalg.norm(w, axis=-1, keepdims=True)
        d = np.asarray(self.distance(x, y))[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(nw > 0, w * (d / nw), 0.0)

    def exp(self, x, v) -> np.ndarray:
        """Follow the geodesic from ``x`` with initial velocity ``v`` for unit time."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if not self.is_sphere:
            return x + v
        R = self.radius
        nv = np.linalg.norm(v, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            step = np.where(nv > 0, R * np.sin(nv / R) * v / nv, 0.0)
        out = np.cos(nv / R) * x + step
        return R * out / np.linalg.norm(out, axis=-1, keepdims=True)

    # -- sampling -----------------------------------------------------------

    def tangent_basis(self, x) -> np.ndarray:
        """Orthonormal basis (rows) of the tangent space at ``x``."""
        if not self.is_sphere:
            return np.eye(self.dim)
        n = np.asarray(x, dtype=float) / np.linalg.norm(x)
        # Householder-free: complete n to an orthonormal frame via QR
        m = np.column_stack([n, np.eye(self.ambient_dim)])
        q, _ = np.linalg.qr(m)
        return q[:, 1:self.ambient_dim].T

    def sample_ball(self, rng: np.random.Generator, n: int, center=None,
                    radius: float | None = None) -> np.ndarray:
        """Uniform samples from a geodesic ball (volume measure).

        On the sphere the ball defaults to the cap.  Radii are drawn by
        inverse CDF of the geodesic polar volume element.
        """
        if center is None:
            if not self.is_sphere:
                raise DomainError("Euclidean ball sampling needs a center")
            center = self.center
        if radius is None:
            radius = self.delta
        center = self.check(center)
        k = self.dim
        dirs = rng.standard_normal((n, k))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        u = rng.random(n)
        if not self.is_sphere:
            r = radius * u ** (1.0 / k)
            return center + r[:, None] * dirs
        R = self.radius
        if k == 2:
            r = R * np.arccos(1.0 - u * (1.0 - math.cos(radius / R)))
        else:
            r = self._sample_radii_rejection(rng, n, radius)
        tangent = dirs @ self.tangent_basis(center)
        return self.exp(np.broadcast_to(center, tangent.shape), r[:, None] * tangent)

    def _sample_radii_rejection(self, rng, n, radius):
        R = self.radius
        top = math.sin(min(radius / R, math.pi / 2)) ** (self.dim - 1)
        out = np.empty(0)
        while out.size < n:
            r = radius * rng.random(2 * n)
            keep = rng.random(2 * n) * top <= np.sin(r / R) ** (self.dim - 1)
            out = np.concatenate([out, r[keep]])
        return out[:n]


def Euclidean(dim: int) -> ModelSpace:
    if dim < 1:
        raise DomainError("dimension must be a positive integer")
    return ModelSpace(kind="euclidean", dim=int(dim))


def SphereCap(dim: int, kappa: float, center, delta: float) -> ModelSpace:
    """Cap of radius ``delta`` about ``center`` on the sphere of curvature ``kappa``."""
    if dim < 1:
        raise DomainError("dimension must be a positive integer")
    c = local_convexity_constant(kappa, delta)
    center = np.array(center, dtype=float)
    center.setflags(write=False)
    space = ModelSpace(kind="sphere_cap", dim=int(dim), kappa=float(kappa),
                       center=center, delta=float(delta), c=c)
    space.check(center)
    return space


@dataclass(frozen=True, eq=False)
class GeodesicSegment:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))


# Module-level forms of the space methods.

def distance(space: ModelSpace, x, y):
    return space.distance(space.check(x), space.check(y))


def geodesic(space: ModelSpace, x, y, t):
    return space.geodesic(space.check(x), space.check(y), t)


def convexity_residual(space: ModelSpace, x, y, z, t):
    """Slack in the p-uniform convexity inequality at ``(x, y, z, t)``.

    ``(1-t) d(z,x)^p + t d(z,y)^p - (c/2) t (1-t) d(x,y)^p - d(z, m_t)^p``
    where ``m_t`` is the point at fraction ``t`` from ``x`` to ``y``.
    Nonnegative whenever the space is p-uniformly convex with constant ``c``.
    """
    x, y, z = space.check(x), space.check(y), space.check(z)
    t = np.asarray(t, dtype=float)
    p, c = space.p, space.c
    m = space.geodesic(x, y, t)
    return ((1 - t) * space.distance(z, x) ** p + t * space.distance(z, y) ** p
            - 0.5 * c * t * (1 - t) * space.distance(x, y) ** p
            - space.distance(z, m) ** p)


def on_segment(space: ModelSpace, seg: GeodesicSegment, x,
               tol: float = GEOM_TOL) -> bool:
    """Whether ``x`` lies on the segment, via the triangle equality."""
    gap = (space.distance(seg.a, x) + space.distance(x, seg.b)
           - space.distance(seg.a, seg.b))
    return bool(gap <= tol)


def is_perpendicular(space: ModelSpace, gamma: GeodesicSegment,
                     eta: GeodesicSegment, p_common, samples: int = 64,
                     tol: float = GEOM_TOL) -> bool:
    """Sampled check that ``gamma`` is perpendicular to ``eta`` at ``p_common``.

    Tests ``d(x, p) <= d(x, y) + tol`` on a ``samples x samples`` grid of
    points ``x`` on ``gamma`` and ``y`` on ``eta`` (endpoints included).  This
    is a necessary condition only; it is exact up to sampling resolution.
    """
    pc = space.check(p_common)
    for seg in (gamma, eta):
        space.check(seg.a)
        space.check(seg.b)
        if not on_segment(space, seg, pc):
            raise DomainError("common point does not lie on both segments")
    ts = np.linspace(0.0, 1.0, samples)
    xs = space.geodesic(gamma.a, gamma.b, ts)
    ys = space.geodesic(eta.a, eta.b, ts)
    d_xp = space.distance(xs, pc)
    d_xy = space.distance(xs[:, None, :], ys[None, :, :])
    return bool(np.all(d_xp[:, None] <= d_xy + tol))
