"""Sampled checks of firmness, strict decrease and metric subregularity.

Everything here is empirical: an operator is evaluated on a seeded sample
of points and the relevant ratios are maximized (or minimized) over the
sample.  Reductions are plain max/min so results depend only on the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .operators import (EmptySet, FixedSetDescriptor, OperatorExpr, Unknown, apply,
                        fixed_point_distance)
from .spaces import DomainError, ModelSpace

FIXED_TOL = 1e-10
RESIDUAL_FLOOR = 1e-14
GAUGE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class BallRegion:
    """Geodesic ball; on a sphere cap the defaults are the cap itself."""

    center: Optional[np.ndarray] = None
    radius: Optional[float] = None


@dataclass(frozen=True, eq=False)
class BoxRegion:
    """Axis-aligned box (Euclidean spaces only)."""

    lo: np.ndarray
    hi: np.ndarray


Region = Union[BallRegion, BoxRegion]


@dataclass(frozen=True, eq=False)
class SampleSpec:
    """Seeded sampling recipe.

    ``exclusion`` is the radius around the fixed set (or fixed point) inside
    which samples are discarded; ``None`` means ``1e-6`` times the region
    scale.
    """

    seed: int = 0
    count: int = 1000
    region: Region = field(default_factory=BallRegion)
    exclusion: Optional[float] = None

    def __post_init__(self):
        if self.count < 1:
            raise DomainError("sample count must be positive")
        if self.exclusion is not None and self.exclusion < 0:
            raise DomainError("exclusion radius must be nonnegative")


def region_scale(space: ModelSpace, region: Region) -> float:
    if isinstance(region, BoxRegion):
        return float(np.max(np.asarray(region.hi) - np.asarray(region.lo)))
    if region.radius is not None:
        return float(region.radius)
    if space.is_sphere:
        return float(space.delta)
    raise DomainError("Euclidean ball region needs a radius")


def exclusion_radius(space: ModelSpace, spec: SampleSpec) -> float:
    if spec.exclusion is not None:
        return float(spec.exclusion)
    return 1e-6 * region_scale(space, spec.region)


def draw(space: ModelSpace, spec: SampleSpec) -> np.ndarray:
    """The ``spec.count`` sample points, shape ``(count, ambient_dim)``."""
    rng = np.random.default_rng(spec.seed)
    reg = spec.region
    if isinstance(reg, BoxRegion):
        if space.is_sphere:
            raise DomainError("box regions are only defined on Euclidean spaces")
        lo, hi = np.asarray(reg.lo, dtype=float), np.asarray(reg.hi, dtype=float)
        if lo.shape != (space.dim,) or hi.shape != (space.dim,) or np.any(hi < lo):
            raise DomainError("malformed box region")
        return lo + (hi - lo) * rng.random((spec.count, space.dim))
    if space.is_sphere:
        radius = space.delta if reg.radius is None else reg.radius
        center = space.center if reg.center is None else space.check(reg.center)
        if float(space.cap_distance(center)) + radius > space.delta * (1 + 1e-12):
            raise DomainError("sampling region must lie inside the cap")
        return space.sample_ball(rng, spec.count, center=center, radius=radius)
    if reg.radius is None:
        raise DomainError("Euclidean ball region needs a radius")
    center = np.zeros(space.dim) if reg.center is None else reg.center
    return space.sample_ball(rng, spec.count, center=center, radius=reg.radius)


def images(space: ModelSpace, T: OperatorExpr, xs: np.ndarray) -> np.ndarray:
    return np.array([apply(space, T, x) for x in xs])


def _require_fixed(space, T, y):
    y = space.check(y)
    r = float(space.distance(apply(space, T, y), y))
    if r > FIXED_TOL:
        raise DomainError(f"reference point is not fixed (residual {r:.3g})")
    return y


# -- almost firmness ----------------------------------------------------------------

@dataclass(frozen=True)
class ViolationSample:
    """Per-sample pieces of the firmness ratio at a fixed point ``y``."""

    points: np.ndarray
    dTy: np.ndarray     # d(Tx, y)^p
    dTx: np.ndarray     # d(Tx, x)^p
    dxy: np.ndarray     # d(x, y)^p
    c: float

    def ratios(self, alpha: float) -> np.ndarray:
        """``[d(Tx,y)^p + tau (c/2) d(Tx,x)^p] / d(x,y)^p - 1`` per sample."""
        if not 0.0 < alpha < 1.0:
            raise DomainError("firmness constant must lie in (0, 1)")
        tau = (1.0 - alpha) / alpha
        return (self.dTy + tau * 0.5 * self.c * self.dTx) / self.dxy - 1.0


def violation_sample(space: ModelSpace, T: OperatorExpr, y, spec: SampleSpec,
                     c: Optional[float] = None) -> ViolationSample:
    """Evaluate ``T`` on the sample; ``c`` overrides the space constant in the ratio."""
    y = _require_fixed(space, T, y)
    xs = draw(space, spec)
    p = space.p
    dxy = np.asarray(space.distance(xs, y)) ** p
    keep = dxy > max(exclusion_radius(space, spec), 0.0) ** p
    keep &= dxy > 0
    xs, dxy = xs[keep], dxy[keep]
    if len(xs) == 0:
        raise DomainError("no samples left after exclusion")
    txs = images(space, T, xs)
    return ViolationSample(points=xs,
                           dTy=np.asarray(space.distance(txs, y)) ** p,
                           dTx=np.asarray(space.distance(txs, xs)) ** p,
                           dxy=dxy, c=space.c if c is None else float(c))


def estimate_violation(space: ModelSpace, T: OperatorExpr, y, alpha: float,
                       spec: SampleSpec, c: Optional[float] = None) -> float:
    """Smallest violation consistent with the sample at constant ``alpha``."""
    r = violation_sample(space, T, y, spec, c).ratios(alpha)
    return max(float(np.max(r)), 0.0)


@dataclass(frozen=True)
class FirmnessEstimate:
    alphas: np.ndarray
    eps: np.ndarray
    witnesses: np.ndarray   # sample attaining the max, one row per alpha

    def to_dict(self) -> dict:
        return {"alphas": self.alphas.tolist(), "eps": self.eps.tolist(),
                "witnesses": self.witnesses.tolist()}


def firmness_frontier(space: ModelSpace, T: OperatorExpr, y, alphas: Sequence[float],
                      spec: SampleSpec, c: Optional[float] = None) -> FirmnessEstimate:
    vs = violation_sample(space, T, y, spec, c)
    alphas = np.asarray(alphas, dtype=float)
    eps, wit = [], []
    for a in alphas:
        r = vs.ratios(a)
        i = int(np.argmax(r))
        eps.append(max(float(r[i]), 0.0))
        wit.append(vs.points[i])
    return FirmnessEstimate(alphas, np.array(eps), np.array(wit))


# -- strict decrease ----------------------------------------------------------------

def check_quasi_strict(space: ModelSpace, T: OperatorExpr, xbar, spec: SampleSpec,
                       skip_fixed: bool = False):
    """Whether ``d(Tx, xbar) < d(x, xbar)`` on every sample.

    Returns ``(ok, margin)`` with ``margin`` the smallest observed
    ``d(x, xbar) - d(Tx, xbar)``.  With ``skip_fixed`` the samples that are
    themselves fixed points (residual below ``1e-14``) are ignored.
    """
    xbar = _require_fixed(space, T, xbar)
    xs = draw(space, spec)
    dx = np.asarray(space.distance(xs, xbar))
    keep = (dx >= exclusion_radius(space, spec)) & (dx > 0)
    xs, dx = xs[keep], dx[keep]
    txs = images(space, T, xs) if len(xs) else xs
    if skip_fixed and len(xs):
        moved = np.asarray(space.distance(txs, xs)) >= RESIDUAL_FLOOR
        xs, dx, txs = xs[moved], dx[moved], txs[moved]
    if len(xs) == 0:
        raise DomainError("no samples left after exclusion")
    margin = dx - np.asarray(space.distance(txs, xbar))
    m = float(np.min(margin))
    return m > 0.0, m


# -- metric subregularity -----------------------------------------------------------

@dataclass(frozen=True)
class SubregularityEstimate:
    mu: float
    witness: np.ndarray
    exclusion: float
    used: int
    excluded_near_fix: int
    excluded_small_residual: int

    def to_dict(self) -> dict:
        return {"mu": self.mu, "witness": self.witness.tolist(), "exclusion": self.exclusion,
                "used": self.used, "excluded_near_fix": self.excluded_near_fix,
                "excluded_small_residual": self.excluded_small_residual}


def estimate_subregularity(space: ModelSpace, T: OperatorExpr, S: FixedSetDescriptor,
                           spec: SampleSpec) -> SubregularityEstimate:
    """Largest sampled ``d(x, Fix) / d(x, Tx)``."""
    if isinstance(S, (Unknown, EmptySet)):
        raise DomainError("subregularity needs a known nonempty fixed set")
    rho = exclusion_radius(space, spec)
    if not rho > 0:
        raise DomainError("subregularity needs a positive exclusion radius")
    xs = draw(space, spec)
    dfix = np.array([fixed_point_distance(space, S, x) for x in xs])
    near = dfix < rho
    xs, dfix = xs[~near], dfix[~near]
    res = np.asarray(space.distance(images(space, T, xs), xs)) if len(xs) else dfix
    small = res < RESIDUAL_FLOOR
    xs, dfix, res = xs[~small], dfix[~small], res[~small]
    if len(xs) == 0:
        raise DomainError("all samples were excluded")
    ratio = dfix / res
    i = int(np.argmax(ratio))
    return SubregularityEstimate(mu=float(ratio[i]), witness=xs[i], exclusion=rho,
                                 used=len(xs), excluded_near_fix=int(near.sum()),
                                 excluded_small_residual=int(small.sum()))


# -- gauges -------------------------------------------------------------------------

def check_gauge_monotone(distances: Sequence[float],
                         gamma: Union[float, Callable[[float], float]]) -> bool:
    """Whether ``d[k+1] <= theta(d[k]) + 1e-12`` for every ``k``.

    ``gamma`` is either a rate (linear gauge ``theta(t) = gamma t``) or a
    callable gauge.
    """
    d = np.asarray(distances, dtype=float)
    if d.size == 0:
        raise DomainError("empty trace")
    if np.any(d < 0):
        raise DomainError("distances must be nonnegative")
    theta = gamma if callable(gamma) else (lambda t: gamma * t)
    return all(d[k + 1] <= theta(d[k]) + GAUGE_SLACK for k in range(len(d) - 1))


def tail_sum(gamma: float, t: float, k: int) -> float:
    """``sum_{j >= k} gamma^j t = t gamma^k / (1 - gamma)``."""
    if not 0.0 <= gamma < 1.0:
        raise DomainError("gauge rate must lie in [0, 1)")
    if t < 0 or k < 0:
        raise DomainError("need t >= 0 and k >= 0")
    return t * gamma ** k / (1.0 - gamma)
