"""Invariant suites behind ``geoprox verify``.

Each check takes a sample size and a seed and returns a :class:`CheckResult`
holding the measured quantities, the threshold and a pass flag.  Results
contain no timings, so repeated runs with one seed serialize identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .certificates import (fold_compose, km_certificate, prox_certificate,
                           prox_prox_certificate)
from .functions import (Ball, Halfspace, Indicator, Linear, Power, ProxParams, Radial, Segment,
                        set_distance)
from .harness import _cap_point, iterate, preset, run_experiment
from .operators import (KM, Average, Compose, KnownPoint, Project, Prox, apply, barycenter,
                        surrogate, transport_discrepancy, two_point_fraction)
from .regularity import (BallRegion, SampleSpec, check_quasi_strict, draw, estimate_violation,
                         firmness_frontier)
from .spaces import Euclidean, SphereCap, convexity_residual

NORTH = np.array([0.0, 0.0, 1.0])
EPS_SLACK = 1e-8


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    threshold: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed),
                "measured": _clean(self.measured), "threshold": _clean(self.threshold)}


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else str(float(v))
    return v


def _split(total, parts):
    """Sizes of ``parts`` nearly equal chunks summing to ``total``."""
    base, extra = divmod(total, parts)
    return [base + (i < extra) for i in range(parts)]


def random_radial(space, rng) -> Prox:
    """Prox of a random radial function anchored inside the cap."""
    anchor = space.sample_ball(rng, 1)[0]
    kind = int(rng.integers(3))
    if kind == 0:
        prof = Power(2.0, float(rng.uniform(0.2, 3.0)))
    elif kind == 1:
        prof = Power(float(rng.uniform(1.2, 4.0)), float(rng.uniform(0.2, 3.0)))
    else:
        prof = Linear(float(rng.uniform(0.1, 2.0)))
    lam = float(rng.uniform(0.05, 2.0))
    if kind == 2:
        lam = float(rng.uniform(0.05, 0.8)) * space.delta
    return Prox(Radial(anchor, prof), ProxParams(lam))


# -- individual checks --------------------------------------------------------------

def check_convexity(n: int = 100_000, seed: int = 0) -> CheckResult:
    """Uniform convexity residual on a cap (>= -1e-9) and in the plane (|.| <= 1e-12)."""
    rng = np.random.default_rng(seed)
    cap = SphereCap(2, 1.0, NORTH, math.pi / 8)
    x, y, z = (cap.sample_ball(rng, n) for _ in range(3))
    t = rng.random(n)
    rc = convexity_residual(cap, x, y, z, t)
    E = Euclidean(3)
    xe, ye, ze = (rng.normal(size=(n, 3)) for _ in range(3))
    re = convexity_residual(E, xe, ye, ze, t)
    m = {"cap_c": cap.c, "cap_min_residual": float(np.min(rc)),
         "euclidean_max_abs_residual": float(np.max(np.abs(re)))}
    ok = m["cap_min_residual"] >= -1e-9 and m["euclidean_max_abs_residual"] <= 1e-12
    return CheckResult("uniform_convexity", ok, m,
                       {"cap_min_residual": -1e-9, "euclidean_max_abs_residual": 1e-12})


def prox_violation_sweep(space, n: int, seed: int, n_funcs: int = 100):
    """Largest ``eps_hat(alpha_c)`` and ``eps_hat(1/2)`` over random radial prox maps."""
    rng = np.random.default_rng(seed)
    cert = prox_certificate(space.c)
    worst_c, worst_half = 0.0, 0.0
    for i, m in enumerate(_split(n, n_funcs)):
        T = random_radial(space, rng)
        fe = firmness_frontier(space, T, T.f.anchor, [cert.alpha, 0.5],
                               SampleSpec(seed=seed + 1 + i, count=m))
        worst_c = max(worst_c, float(fe.eps[0]))
        worst_half = max(worst_half, float(fe.eps[1]))
    return cert, worst_c, worst_half


def arc_projection_half_violation(delta: float, n: int, seed: int, c=None) -> float:
    """``eps_hat(1/2)`` of the projector onto a diameter arc of the cap."""
    space = SphereCap(2, 1.0, NORTH, delta)
    arc = Segment(_cap_point(space, delta, math.pi), _cap_point(space, delta, 0.0))
    y = _cap_point(space, 0.3 * delta, 0.0)
    return estimate_violation(space, Project(arc), y, 0.5, SampleSpec(seed=seed, count=n), c=c)


def check_prox_certificate(n: int = 10_000, seed: int = 0) -> CheckResult:
    m, ok = {}, True
    for label, delta in (("pi/8", math.pi / 8), ("pi/16", math.pi / 16)):
        space = SphereCap(2, 1.0, NORTH, delta)
        cert, worst, _ = prox_violation_sweep(space, n, seed)
        m[label] = {"alpha_c": cert.alpha, "eps_c": cert.eps, "eps_hat": worst}
        ok &= worst <= cert.eps + EPS_SLACK
    # shrinkage of eps_hat(1/2): with the cap constant, and with c = 2
    deltas = (math.pi / 8, math.pi / 16, math.pi / 32)
    k = max(n // 10, 100)
    cap_c, flat = [], []
    for j, d in enumerate(deltas):
        space = SphereCap(2, 1.0, NORTH, d)
        _, _, half = prox_violation_sweep(space, k, seed + 7 * j, n_funcs=10)
        cap_c.append(half)
        flat.append(arc_projection_half_violation(d, k, seed + 7 * j, c=2.0))
    mono = all(b <= a + 1e-12 for a, b in zip(cap_c, cap_c[1:]))
    bounded = all(h <= prox_certificate(SphereCap(2, 1.0, NORTH, d).c).eps + EPS_SLACK
                  for h, d in zip(cap_c, deltas))
    strict = all(b < a for a, b in zip(flat, flat[1:]))
    m["half_violation_cap_c"] = cap_c
    m["half_violation_c2_arc_projection"] = flat
    ok &= mono and bounded and strict
    return CheckResult("prox_certificate", ok, m,
                       {"eps_hat": "eps_c + 1e-8", "half_violation": "nonincreasing as delta shrinks"})


def check_quasi_strict_prox(n: int = 10_000, seed: int = 0, n_funcs: int = 100) -> CheckResult:
    rng = np.random.default_rng(seed)
    space = SphereCap(2, 1.0, NORTH, math.pi / 8)
    worst, all_ok = math.inf, True
    for i, m in enumerate(_split(n, n_funcs)):
        T = random_radial(space, rng)
        ok, margin = check_quasi_strict(space, T, T.f.anchor, SampleSpec(seed=seed + 1 + i, count=m))
        all_ok &= ok
        worst = min(worst, margin)
    return CheckResult("quasi_strict", all_ok and worst > 0, {"min_margin": worst},
                       {"min_margin": "> 0"})


def check_composition(n: int = 10_000, seed: int = 0) -> CheckResult:
    # relative gap: eps_circ reaches ~1e4 at c = 1.01, so absolute rounding is ~1e-12
    grid = np.linspace(1.01, 2.0, 100)
    gap = 0.0
    for c in grid:
        direct, folded = prox_prox_certificate(c), fold_compose([prox_certificate(c)] * 2)
        for u, v in ((direct.alpha, folded.alpha), (direct.eps, folded.eps)):
            gap = max(gap, abs(u - v) / max(1.0, abs(u)))
    rng = np.random.default_rng(seed)
    space = SphereCap(2, 1.0, NORTH, math.pi / 8)
    cert = prox_prox_certificate(space.c)
    worst = 0.0
    for i, m in enumerate(_split(n, 50)):
        a = space.sample_ball(rng, 1, radius=0.5 * space.delta)[0]
        f1 = random_radial(space, rng)
        f1 = Prox(Radial(a, f1.f.profile), f1.params)
        if i % 2:
            f2 = Prox(Indicator(Ball(space.geodesic(a, space.center, 0.5), 0.3 * space.delta)),
                      ProxParams(1.0))
        else:
            g = random_radial(space, rng)
            f2 = Prox(Radial(a, g.f.profile), g.params)
        T = Compose([f2, f1])
        worst = max(worst, estimate_violation(space, T, a, cert.alpha,
                                              SampleSpec(seed=seed + 1 + i, count=m)))
    m = {"fold_gap": gap, "alpha_circ": cert.alpha, "eps_circ": cert.eps, "eps_hat": worst}
    ok = gap <= 1e-12 and worst <= cert.eps + EPS_SLACK
    return CheckResult("composition", ok, m,
                       {"fold_gap": "1e-12 relative", "eps_hat": "eps_circ + 1e-8"})


def check_km(n: int = 10_000, seed: int = 0) -> CheckResult:
    space = SphereCap(2, 1.0, NORTH, math.pi / 8)
    pc = prox_certificate(space.c)
    m, ok = {}, True
    for j, beta in enumerate((0.25, 0.5, 0.75)):
        rng = np.random.default_rng(seed + j)
        cert = km_certificate(pc, beta)
        worst, ident = 0.0, 0.0
        for i, k in enumerate(_split(n, 50)):
            P = random_radial(space, rng)
            T = KM(P, beta)
            spec = SampleSpec(seed=seed + 100 * j + i, count=k)
            worst = max(worst, estimate_violation(space, T, P.f.anchor, cert.alpha, spec))
            for x in draw(space, SampleSpec(seed=seed + 100 * j + i, count=min(k, 20))):
                lhs = float(space.distance(x, apply(space, T, x)))
                rhs = beta * float(space.distance(x, apply(space, P, x)))
                ident = max(ident, abs(lhs - rhs))
        m[str(beta)] = {"alpha_beta": cert.alpha, "eps_beta": cert.eps, "eps_hat": worst,
                        "residual_identity_gap": ident}
        ok &= worst <= cert.eps + EPS_SLACK and ident <= 1e-10
    return CheckResult("km_relaxation", ok, m,
                       {"eps_hat": "eps_c beta + 1e-8", "residual_identity_gap": 1e-10})


def two_point_oracle(space, x1, x2, w, p) -> float:
    """``t`` such that the barycenter sits at fraction ``1 - t`` from ``x1``.

    Minimizes ``w d(z, x1)^p + (1 - w) d(z, x2)^p`` over ``z`` on the
    geodesic by bounded scalar minimization, using actual distances.
    """
    def obj(s):
        z = space.geodesic(x1, x2, s)
        return w * float(space.distance(z, x1)) ** p + (1 - w) * float(space.distance(z, x2)) ** p
    res = minimize_scalar(obj, bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": 1e-12, "maxiter": 500})
    return 1.0 - float(res.x)


def check_two_point_barycenter(n: int = 0, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    cap = SphereCap(2, 1.0, NORTH, math.pi / 8)
    x1, x2 = cap.sample_ball(rng, 2)
    E = Euclidean(2)
    e1, e2 = rng.normal(size=(2, 2))
    worst, lib = 0.0, 0.0
    for w in np.round(np.arange(1, 10) / 10, 10):
        for p in (2, 3, 4):
            t = two_point_fraction(w, p)
            for space, a, b in ((cap, x1, x2), (E, e1, e2)):
                worst = max(worst, abs(t - two_point_oracle(space, a, b, w, p)))
                z = barycenter(space, [a, b], [w, 1 - w], p)
                lib = max(lib, float(space.distance(z, space.geodesic(a, b, 1 - t))))
    return CheckResult("two_point_barycenter", worst <= 1e-6 and lib <= 1e-12,
                       {"max_fraction_gap": worst, "library_gap": lib},
                       {"max_fraction_gap": 1e-6, "library_gap": 1e-12})


def check_linear_rate(n: int = 2000, seed: int = 0) -> CheckResult:
    m, ok = {}, True
    for label, theta in (("pi/6", math.pi / 6), ("pi/4", math.pi / 4), ("pi/3", math.pi / 3)):
        res = run_experiment(preset("two_halfspaces", theta=theta, seed=seed, count=n))
        rep, pred = res.report, res.report.prediction
        target = math.cos(theta) ** 2
        rel = abs(rep.fitted_rate - target) / target
        m[label] = {"fitted_rate": rep.fitted_rate, "cos2": target, "relative_gap": rel,
                    "alpha": res.certificate.alpha, "eps": res.certificate.eps,
                    "mu_hat": res.subregularity.mu, "gamma": pred.gamma,
                    "validity": pred.validity, "verdict": rep.verdict}
        ok &= (rel <= 0.02 and pred.valid and rep.verdict == "PASS"
               and abs(res.certificate.alpha - 2 / 3) <= 1e-15 and res.certificate.eps == 0.0)
    return CheckResult("linear_rate", ok, m, {"relative_gap": 0.02, "rate": "<= 1.02 gamma"})


def check_intersection(n: int = 0, seed: int = 0) -> CheckResult:
    E = Euclidean(2)
    cap = SphereCap(2, 1.0, NORTH, math.pi / 8)
    cases = [
        (E, Ball(np.array([0.0, 0.0]), 1.0), Ball(np.array([1.5, 0.0]), 1.0), [3.0, 2.0]),
        (E, Ball(np.array([0.0, 0.0]), 1.0), Halfspace(np.array([1.0, 1.0]), -1.0), [2.0, 2.0]),
        (E, Segment(np.array([-3.0, 0.0]), np.array([3.0, 0.0])),
         Segment(np.array([-3.0, -1.5]), np.array([3.0, 1.5])), [1.0, 2.0]),
        (cap, Ball(_cap_point(cap, 0.1, 0.0), 0.2), Ball(_cap_point(cap, 0.1, 2.5), 0.2),
         _cap_point(cap, 0.35, 1.2)),
        (cap, Segment(_cap_point(cap, 0.35, math.pi), _cap_point(cap, 0.35, 0.0)),
         Ball(_cap_point(cap, 0.1, 1.0), 0.15), _cap_point(cap, 0.3, 4.0)),
    ]
    worst = 0.0
    for space, A, B, x0 in cases:
        tr = iterate(space, Compose([Project(A), Project(B)]), x0, tol=1e-13, max_iter=100_000)
        worst = max(worst, set_distance(space, A, tr.final), set_distance(space, B, tr.final))
    return CheckResult("fixed_point_intersection", worst <= 1e-6, {"max_set_distance": worst},
                       {"max_set_distance": 1e-6})


def shipped_operators(space):
    """One instance of every operator family, with a fixed point of each."""
    c0 = space.center if space.is_sphere else np.zeros(space.dim)
    d = space.delta if space.is_sphere else 1.0

    def pt(r, th):
        return _cap_point(space, r * d, th) if space.is_sphere else c0 + r * d * np.array(
            [math.cos(th), math.sin(th)])

    a = pt(0.2, 0.5)
    ball = Ball(pt(0.3, 2.0), 0.3 * d)
    seg = Segment(pt(0.7, math.pi), pt(0.7, 0.0))
    radial = Prox(Radial(a, Power(2.0)), ProxParams(0.5))
    ops = {
        "project_ball": (Project(ball), ball.center),
        "project_segment": (Project(seg), seg.a),
        "prox_radial_power": (radial, a),
        "prox_radial_linear": (Prox(Radial(a, Linear(1.0)), ProxParams(0.1 * d)), a),
        "prox_indicator": (Prox(Indicator(ball), ProxParams(1.0)), ball.center),
        "km_prox": (KM(radial, 0.5), a),
        "prox_prox": (Compose([Prox(Radial(a, Linear(0.5)), ProxParams(0.1 * d)), radial]), a),
        "projected_gradient": (Compose([Project(Segment(pt(0.7, 0.5 + math.pi), pt(0.7, 0.5))),
                                        KM(radial, 0.5)]), a),
        "average": (Average([(radial, 0.5), (Prox(Radial(a, Power(3.0)), ProxParams(1.0)), 0.5)]),
                    a),
    }
    if not space.is_sphere:
        hs = Halfspace(np.array([1.0, 0.0]), 0.2)
        ops["project_halfspace"] = (Project(hs), np.array([0.0, 0.0]))
    return ops


def check_surrogate(n: int = 1000, seed: int = 0) -> CheckResult:
    worst_s, worst_t = 0.0, 0.0
    for space in (SphereCap(2, 1.0, NORTH, math.pi / 8), Euclidean(2)):
        region = BallRegion() if space.is_sphere else BallRegion(np.zeros(2), 1.0)
        for j, (name, (T, y)) in enumerate(sorted(shipped_operators(space).items())):
            xs = draw(space, SampleSpec(seed=seed + j, count=n, region=region))
            S = KnownPoint(y)
            for x in xs:
                tx = apply(space, T, x)
                dtx = math.sqrt(float(np.sum((tx - x) ** 2))) if not space.is_sphere else \
                    2.0 * space.radius * math.atan2(np.linalg.norm(tx - x), np.linalg.norm(tx + x))
                worst_s = max(worst_s, abs(surrogate(space, T, x, S) - (space.c / 2) ** 0.5 * dtx))
                psi = transport_discrepancy(space, T, x, y)
                worst_t = max(worst_t, abs(psi - 0.5 * space.c * dtx ** 2))
    return CheckResult("surrogate_consistency", worst_s <= 1e-10 and worst_t <= 1e-9,
                       {"surrogate_gap": worst_s, "discrepancy_gap": worst_t},
                       {"surrogate_gap": 1e-10, "discrepancy_gap": 1e-9})


PRESET_RUNS = [
    ("two_halfspaces", {"theta": math.pi / 6}),
    ("two_halfspaces", {"theta": math.pi / 4}),
    ("two_halfspaces", {"theta": math.pi / 3}),
    ("cyclic_projections", {"n": 3}),
    ("cyclic_projections", {"n": 3, "variant": "balls"}),
    ("alg1_prox_chain", {}),
    ("alg2_projected_gradient", {}),
    ("sphere_fermat_weber", {}),
]


def check_gauge(n: int = 1000, seed: int = 0) -> CheckResult:
    m, ok = {}, True
    for name, kw in PRESET_RUNS:
        res = run_experiment(preset(name, seed=seed, count=n, **kw))
        rep = res.report
        label = name + "".join(f",{k}={v:.6g}" if isinstance(v, float) else f",{k}={v}"
                               for k, v in sorted(kw.items()))
        converged = res.trace.stop_reason == "ResidualBelow"
        m[label] = {"converged": converged, "fitted_rate": rep.fitted_rate,
                    "gauge_monotone": rep.gauge_monotone, "a_priori_holds": rep.a_priori_holds,
                    "a_priori_worst_slack": rep.a_priori_worst_slack, "verdict": rep.verdict,
                    "asymptotic_verdict": rep.asymptotic_verdict,
                    "necessity_holds": rep.necessity_holds}
        ok &= converged and rep.gauge_monotone and bool(rep.a_priori_holds)
        ok &= rep.verdict != "FAIL" and rep.asymptotic_verdict != "FAIL"
        ok &= rep.necessity_holds is not False
    return CheckResult("gauge_machinery", ok, m,
                       {"gauge": "d[k+1] <= rate d[k] + 1e-12", "a_priori": "d(x_k, x*) <= a s_k(t0)"})


CHECKS = {
    "uniform_convexity": (check_convexity, 10),
    "prox_certificate": (check_prox_certificate, 1),
    "quasi_strict": (check_quasi_strict_prox, 1),
    "composition": (check_composition, 1),
    "km_relaxation": (check_km, 1),
    "two_point_barycenter": (check_two_point_barycenter, 0),
    "linear_rate": (check_linear_rate, 1),
    "fixed_point_intersection": (check_intersection, 0),
    "surrogate_consistency": (check_surrogate, 0.1),
    "gauge_machinery": (check_gauge, 0.5),
}


def run_suite(seed: int = 0, samples: int = 1000, only=None) -> dict:
    """Run every check (or those named in ``only``) with ``samples`` as the base size."""
    results = []
    for name, (fn, scale) in CHECKS.items():
        if only and name not in only:
            continue
        results.append(fn(max(int(samples * scale), 10), seed).to_dict())
    return {"seed": seed, "samples": samples, "passed": all(r["passed"] for r in results),
            "checks": results}
