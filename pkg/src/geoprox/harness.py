"""Fixed-point iteration, rate analysis and ready-made experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .certificates import (Certificate, RatePrediction, a_priori_constant, certify_operator,
                           certify_operator_asymptotic, rate_from_certificate)
from .functions import Ball, Linear, Power, ProxParams, Radial, Segment, Halfspace
from .operators import (Average, Compose, DomainEscape, EmptySet, FixedSetDescriptor,
                        KnownPoint, KnownSet, KM, OperatorExpr, Project, Prox, Unknown,
                        apply, fixed_point_distance)
from .regularity import (BallRegion, BoxRegion, SampleSpec, check_gauge_monotone,
                         estimate_subregularity, tail_sum)
from .spaces import DomainError, Euclidean, ModelSpace, SphereCap

RESIDUAL_BELOW, MAX_ITER, DOMAIN_ESCAPE = "ResidualBelow", "MaxIter", "DomainEscape"
PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"
RATE_SLACK = 1.02
ASYMPTOTIC_SLACK = 1.05
NECESSITY_SLACK = 1.05
BOUND_SLACK = 1e-12
# sphere coordinates carry ~1e-16 absolute error, so step ratios below this
# residual are dominated by rounding
SPHERE_TOL = 1e-10


@dataclass
class IterationTrace:
    iterates: np.ndarray            # x_0, ..., x_K
    residuals: np.ndarray           # d(x_k, T x_k)
    dist_to_fix: Optional[np.ndarray]
    stop_reason: str
    tol: float
    escape_index: Optional[int] = None
    message: str = ""

    def __len__(self):
        return len(self.iterates)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]


def iterate(space: ModelSpace, T: OperatorExpr, x0, tol: float = 1e-12,
            max_iter: int = 10_000, fixed: Optional[FixedSetDescriptor] = None) -> IterationTrace:
    """Run ``x_{k+1} = T x_k`` until ``d(x_k, T x_k) <= tol`` or ``max_iter`` steps.

    Leaving the sphere cap ends the run with stop reason ``DomainEscape``
    and the index of the offending iterate; nothing is raised.
    """
    x = space.check(x0, cap=True)
    known = fixed is not None and not isinstance(fixed, (Unknown, EmptySet))
    xs, res, dist = [], [], []
    reason, escape, msg = MAX_ITER, None, ""
    for k in range(max_iter + 1):
        xs.append(x)
        if known:
            dist.append(fixed_point_distance(space, fixed, x))
        try:
            tx = apply(space, T, x)
        except DomainEscape as exc:
            res.append(math.nan)
            reason, escape, msg = DOMAIN_ESCAPE, k + 1, str(exc)
            break
        r = float(space.distance(x, tx))
        res.append(r)
        if r <= tol:
            reason = RESIDUAL_BELOW
            break
        if k == max_iter:
            break
        x = tx
    return IterationTrace(iterates=np.array(xs), residuals=np.array(res),
                          dist_to_fix=np.array(dist) if known else None,
                          stop_reason=reason, tol=tol, escape_index=escape, message=msg)


# -- rate analysis ------------------------------------------------------------------

@dataclass
class RateReport:
    distances: np.ndarray
    ratios: np.ndarray              # d_{k+1}/d_k, nan where d_k = 0
    window_start: int
    fitted_rate: float
    tightest_gauge: float           # largest ratio in the window
    distance_is_proxy: bool         # True when distances are to the final iterate
    prediction: Optional[RatePrediction] = None
    asymptotic_prediction: Optional[RatePrediction] = None
    verdict: str = SKIPPED
    asymptotic_verdict: str = SKIPPED
    gauge_monotone: bool = False
    a_priori_constant: Optional[float] = None
    a_priori_holds: Optional[bool] = None
    a_priori_worst_slack: Optional[float] = None
    necessity_modulus: Optional[float] = None
    necessity_holds: Optional[bool] = None

    def to_dict(self) -> dict:
        def num(v):
            return None if v is None or not math.isfinite(v) else float(v)
        return {
            "distances": [num(v) for v in self.distances],
            "ratios": [num(v) for v in self.ratios],
            "window_start": self.window_start,
            "fitted_rate": num(self.fitted_rate),
            "tightest_gauge": num(self.tightest_gauge),
            "distance_is_proxy": self.distance_is_proxy,
            "prediction": None if self.prediction is None else self.prediction.to_dict(),
            "asymptotic_prediction": (None if self.asymptotic_prediction is None
                                      else self.asymptotic_prediction.to_dict()),
            "verdict": self.verdict,
            "asymptotic_verdict": self.asymptotic_verdict,
            "gauge_monotone": self.gauge_monotone,
            "a_priori_constant": num(self.a_priori_constant),
            "a_priori_holds": self.a_priori_holds,
            "a_priori_worst_slack": num(self.a_priori_worst_slack),
            "necessity_modulus": num(self.necessity_modulus),
            "necessity_holds": self.necessity_holds,
        }


def step_ratios(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d[:-1] > 0, d[1:] / np.where(d[:-1] > 0, d[:-1], 1.0), np.nan)


def fitted_rate(ratios: np.ndarray) -> float:
    """Geometric mean of the defined ratios (zero if any ratio is zero)."""
    r = ratios[np.isfinite(ratios)]
    if r.size == 0:
        return 0.0
    if np.any(r == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(r))))


def analyze(trace: IterationTrace, prediction: Optional[RatePrediction] = None,
            certificate: Optional[Certificate] = None,
            asymptotic_prediction: Optional[RatePrediction] = None,
            space: Optional[ModelSpace] = None) -> RateReport:
    """Compare the observed convergence of a trace against predictions.

    The fitted rate is the geometric mean of the step ratios over the tail
    half of the trace (the window).  Gauge monotonicity, the a-priori bound
    ``d(x_k, x*) <= a s_k(t0)`` (``x*`` the final iterate, ``t0`` the
    distance at the start of the window) and the bound ``1/(1 - rate)`` on
    ``d(x_k, Fix)/d(x_k, T x_k)`` are all checked on the window.
    """
    n = len(trace)
    if n < 2:
        raise DomainError("rate analysis needs at least two iterates")
    proxy = trace.dist_to_fix is None
    if proxy:
        if space is None:
            raise DomainError("distances to the limit need the space")
        d = np.asarray(space.distance(trace.iterates, trace.final), dtype=float)
    else:
        d = np.asarray(trace.dist_to_fix, dtype=float)
    ratios = step_ratios(d)
    w = (len(ratios)) // 2
    window = ratios[w:]
    rate = fitted_rate(window)
    finite = window[np.isfinite(window)]
    report = RateReport(distances=d, ratios=ratios, window_start=w, fitted_rate=rate,
                        tightest_gauge=float(finite.max()) if finite.size else 0.0,
                        distance_is_proxy=proxy, prediction=prediction,
                        asymptotic_prediction=asymptotic_prediction)
    dw = d[w:]
    report.gauge_monotone = check_gauge_monotone(dw, rate)

    if prediction is not None and prediction.valid:
        report.verdict = PASS if rate <= prediction.gamma * RATE_SLACK else FAIL
    if asymptotic_prediction is not None and asymptotic_prediction.valid:
        report.asymptotic_verdict = (PASS if rate <= asymptotic_prediction.gamma * ASYMPTOTIC_SLACK
                                     else FAIL)

    if certificate is not None and rate < 1.0:
        a = a_priori_constant(certificate)
        to_limit = (d[w:] if proxy else
                    np.asarray(_distances_to_final(trace, space, w), dtype=float))
        bound = np.array([a * tail_sum(rate, dw[0], j) for j in range(len(dw))])
        slack = bound + BOUND_SLACK - to_limit
        report.a_priori_constant = a
        report.a_priori_holds = bool(np.all(slack >= 0))
        report.a_priori_worst_slack = float(slack.min())

    if rate < 1.0:
        res = trace.residuals[w:len(dw) + w]
        ok = (res > 1e-14) & (dw > 0)
        if np.any(ok):
            mu = float(np.max(dw[ok] / res[ok]))
            report.necessity_modulus = mu
            report.necessity_holds = mu <= NECESSITY_SLACK / (1.0 - rate)
    return report


def _distances_to_final(trace, space, w):
    xs = trace.iterates[w:]
    if space is not None:
        return space.distance(xs, trace.final)
    # Euclidean fallback when no space is supplied
    return np.linalg.norm(xs - trace.final, axis=-1)


# -- experiments --------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    space: ModelSpace
    operator: OperatorExpr
    x0: np.ndarray
    tol: float = 1e-12
    max_iter: int = 10_000
    sample: SampleSpec = field(default_factory=SampleSpec)
    fixed: FixedSetDescriptor = field(default_factory=Unknown)
    certificate: Optional[Certificate] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=lambda: {"trace": "trace.csv",
                                                   "report": "report.json"})

    def with_seed(self, seed: int) -> "ExperimentConfig":
        s = self.sample
        return _replace(self, sample=SampleSpec(seed=seed, count=s.count, region=s.region,
                                                exclusion=s.exclusion))


def _replace(cfg, **kw):
    from dataclasses import replace
    return replace(cfg, **kw)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trace: IterationTrace
    report: Optional[RateReport]
    certificate: Optional[Certificate]
    asymptotic_certificate: Optional[Certificate]
    subregularity: object = None
    notes: list = field(default_factory=list)


def run_experiment(cfg: ExperimentConfig, estimate_mu: bool = True) -> ExperimentResult:
    """Iterate, certify, estimate the subregularity modulus and analyze."""
    space, T = cfg.space, cfg.operator
    trace = iterate(space, T, cfg.x0, cfg.tol, cfg.max_iter, cfg.fixed)
    notes = []
    try:
        cert = cfg.certificate or certify_operator(space, T)
        cert_bar = certify_operator_asymptotic(space, T)
    except DomainError as exc:
        cert = cert_bar = None
        notes.append(f"no certificate: {exc}")
    sub = pred = pred_bar = None
    known = not isinstance(cfg.fixed, (Unknown, EmptySet))
    if estimate_mu and known and trace.stop_reason != DOMAIN_ESCAPE:
        sub = estimate_subregularity(space, T, cfg.fixed, cfg.sample)
        if cert is not None:
            pred = rate_from_certificate(cert, sub.mu)
            pred_bar = rate_from_certificate(cert_bar, sub.mu)
            if not pred.valid:
                notes.append(f"rate prediction not valid ({pred.validity})")
    report = None
    if len(trace) >= 2 and trace.stop_reason != DOMAIN_ESCAPE:
        report = analyze(trace, pred, cert, pred_bar, space)
    return ExperimentResult(cfg, trace, report, cert, cert_bar, sub, notes)


# -- presets ------------------------------------------------------------------------

def _unit(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def _cap_point(space: ModelSpace, r: float, theta: float) -> np.ndarray:
    """Point at geodesic distance ``r`` from the cap center in direction ``theta``."""
    basis = space.tangent_basis(space.center)
    v = r * (math.cos(theta) * basis[0] + math.sin(theta) * basis[1])
    return space.exp(space.center, v)


def _north(kappa):
    return np.array([0.0, 0.0, 1.0 / math.sqrt(kappa)])


def preset_two_halfspaces(theta: float = math.pi / 4, seed: int = 0,
                          count: int = 2000) -> ExperimentConfig:
    """Alternating projections between two planar halfspaces meeting at angle ``theta``.

    Starting from ``(-1, 0)`` every cycle multiplies the distance to the
    intersection by exactly ``cos(theta)^2``.
    """
    if not 0.0 < theta < math.pi / 2:
        raise DomainError("angle must lie in (0, pi/2)")
    space = Euclidean(2)
    A = Halfspace(np.array([0.0, -1.0]), 0.0)
    B = Halfspace(np.array([-math.sin(theta), math.cos(theta)]), 0.0)
    return ExperimentConfig(
        space=space, operator=Compose([Project(A), Project(B)]), x0=np.array([-1.0, 0.0]),
        sample=SampleSpec(seed=seed, count=count,
                          region=BoxRegion(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))),
        fixed=KnownSet([A, B]), name="two_halfspaces", params={"theta": theta})


def preset_cyclic_projections(n: int = 3, variant: str = "lines", seed: int = 0,
                              count: int = 2000) -> ExperimentConfig:
    """Cyclic projections onto ``n`` planar sets sharing a common point.

    ``lines``: lines through the origin at angles ``k pi / (2n)``; the
    common point is the origin.  ``balls``: unit balls centred on a circle of
    radius 0.8 about the origin, which all contain it.
    """
    if n < 2:
        raise DomainError("need at least two sets")
    space = Euclidean(2)
    if variant == "lines":
        sets = [Segment(-10.0 * _unit(k * math.pi / (2 * n)), 10.0 * _unit(k * math.pi / (2 * n)))
                for k in range(n)]
        fixed = KnownPoint(np.zeros(2))
        x0 = np.array([0.3, 0.9])
    elif variant == "balls":
        sets = [Ball(0.8 * _unit(2 * math.pi * k / n), 1.0) for k in range(n)]
        fixed = KnownSet(sets)
        x0 = np.array([-1.5, 1.2])
    else:
        raise DomainError(f"unknown cyclic projections variant {variant!r}")
    T = Compose([Project(s) for s in reversed(sets)])   # P_n o ... o P_1
    return ExperimentConfig(
        space=space, operator=T, x0=x0,
        sample=SampleSpec(seed=seed, count=count,
                          region=BoxRegion(np.array([-2.0, -2.0]), np.array([2.0, 2.0]))),
        fixed=fixed, name="cyclic_projections", params={"n": n, "variant": variant})


def preset_alg1_prox_chain(kappa: float = 1.0, delta: float = math.pi / 64,
                           lams=(1.0, 1.0), weights=(1.0, 1.0), seed: int = 0,
                           count: int = 2000) -> ExperimentConfig:
    """Proximal splitting ``prox_{f_N} o ... o prox_{f_1}`` on a sphere cap.

    Each ``f_i = w_i d(., a)^2`` shares the minimizer ``a`` (the cap
    center), and the start lies at distance ``delta/2`` from it.
    """
    space = SphereCap(2, kappa, _north(kappa), delta)
    a = space.center
    proxes = [Prox(Radial(a, Power(2.0, w)), ProxParams(lam)) for lam, w in zip(lams, weights)]
    return ExperimentConfig(
        space=space, operator=Compose(list(reversed(proxes))),
        x0=_cap_point(space, delta / 2, 0.3), tol=SPHERE_TOL,
        sample=SampleSpec(seed=seed, count=count), fixed=KnownPoint(a),
        name="alg1_prox_chain",
        params={"kappa": kappa, "delta": delta, "lams": list(lams), "weights": list(weights)})


def preset_alg2_projected_gradient(kappa: float = 1.0, delta: float = math.pi / 64,
                                   beta: float = 0.5, lam: float = 1.0, weight: float = 1.0,
                                   seed: int = 0, count: int = 2000) -> ExperimentConfig:
    """Projected prox iteration ``P_C o (beta prox_g + (1 - beta) Id)`` on a sphere cap.

    ``g = weight d(., a)^2`` with ``a`` the cap center and ``C`` a geodesic
    arc through ``a``; the start lies at distance ``delta/2`` off the arc.
    """
    space = SphereCap(2, kappa, _north(kappa), delta)
    a = space.center
    C = Segment(_cap_point(space, 0.9 * delta, math.pi), _cap_point(space, 0.9 * delta, 0.0))
    T = Compose([Project(C), KM(Prox(Radial(a, Power(2.0, weight)), ProxParams(lam)), beta)])
    return ExperimentConfig(
        space=space, operator=T, x0=_cap_point(space, delta / 2, 1.0), tol=SPHERE_TOL,
        sample=SampleSpec(seed=seed, count=count), fixed=KnownPoint(a),
        name="alg2_projected_gradient",
        params={"kappa": kappa, "delta": delta, "beta": beta, "lam": lam, "weight": weight})


def fermat_weber_point(space: ModelSpace, anchors, weights, resolution: int = 60,
                       tol: float = 1e-15, max_iter: int = 100_000) -> np.ndarray:
    """Minimizer of ``sum_i w_i d(z, a_i)`` on a 2-sphere cap.

    A polar grid over the cap seeds a Riemannian Weiszfeld iteration.
    """
    from .functions import oracle_grid
    A = space.check(np.asarray(anchors, dtype=float))
    w = np.asarray(weights, dtype=float)
    pts, _ = oracle_grid(space, resolution)
    vals = np.array([np.sum(w * space.distance(A, z)) for z in pts])
    z = pts[int(np.argmin(vals))]
    for _ in range(max_iter):
        d = np.asarray(space.distance(A, z))
        if np.any(d < 1e-300):
            return A[int(np.argmin(d))]
        coef = w / d
        v = coef @ space.log(np.broadcast_to(z, A.shape), A) / coef.sum()
        nz = space.exp(z, v)
        if float(space.distance(z, nz)) <= tol:
            return nz
        z = nz
    return z


def preset_sphere_fermat_weber(kappa: float = 1.0, delta: float = math.pi / 64, anchors=None,
                               weights=None, lam: float = 0.01, seed: int = 0,
                               count: int = 1000) -> ExperimentConfig:
    """Averaged prox mappings of ``d(., a_i)`` on a sphere cap.

    The fixed point is the weighted Fermat-Weber point of the anchors as
    long as it is farther than ``lam`` from every anchor.  The default
    anchors form a square of radius ``0.6 delta`` about the cap center and
    the start lies on a diagonal, so iterates stay on that diagonal.
    """
    space = SphereCap(2, kappa, _north(kappa), delta)
    if anchors is None:
        anchors = [_cap_point(space, 0.6 * delta, k * math.pi / 2) for k in range(4)]
    anchors = [space.check(a, cap=True) for a in anchors]
    if weights is None:
        weights = [1.0 / len(anchors)] * len(anchors)
    weights = [float(v) for v in weights]
    T = Average([(Prox(Radial(a, Linear(1.0)), ProxParams(lam)), w)
                 for a, w in zip(anchors, weights)])
    star = fermat_weber_point(space, anchors, weights)
    if min(float(space.distance(star, a)) for a in anchors) <= lam:
        raise DomainError("Fermat-Weber point lies within one prox step of an anchor")
    return ExperimentConfig(
        space=space, operator=T, x0=_cap_point(space, delta / 2, math.pi / 4), tol=SPHERE_TOL,
        sample=SampleSpec(seed=seed, count=count, region=BallRegion(star, delta / 4)),
        fixed=KnownPoint(star), name="sphere_fermat_weber",
        params={"kappa": kappa, "delta": delta, "lam": lam,
                "anchors": [a.tolist() for a in anchors], "weights": weights})


PRESETS = {
    "two_halfspaces": preset_two_halfspaces,
    "cyclic_projections": preset_cyclic_projections,
    "alg1_prox_chain": preset_alg1_prox_chain,
    "alg2_projected_gradient": preset_alg2_projected_gradient,
    "sphere_fermat_weber": preset_sphere_fermat_weber,
}


def preset(name: str, **params) -> ExperimentConfig:
    try:
        build = PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    try:
        return build(**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for preset {name!r}: {exc}") from None
