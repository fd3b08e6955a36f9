"""Closed-form calculus of firmness constants and violations.

A :class:`Certificate` ``(alpha, eps)`` asserts, for an operator ``T`` and a
fixed point ``y``, the inequality

    d(Tx, y)^p <= (1 + eps) d(x, y)^p - ((1 - alpha)/alpha) (c/2) d(Tx, x)^p.

The functions here only transform constants; whether a certificate actually
holds for a concrete operator is checked empirically in
:mod:`geoprox.regularity`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from functools import reduce
from typing import NamedTuple, Optional

from .spaces import DomainError, local_convexity_constant

PROJECTOR_ALPHA = 0.5


@dataclass(frozen=True)
class Certificate:
    alpha: float
    eps: float
    p: float = 2.0
    c: float = 2.0
    scope: str = "fixed_points"      # or "asymptotic"
    delta: Optional[float] = None    # neighbourhood radius for asymptotic scope
    provenance: str = ""

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"certificate constant must lie in (0, 1), got {self.alpha}")
        if self.eps < 0.0:
            raise DomainError("violation must be nonnegative")
        if self.scope == "asymptotic" and self.eps != 0.0:
            raise DomainError("asymptotic certificates carry zero violation")

    @property
    def tau(self) -> float:
        return (1.0 - self.alpha) / self.alpha

    def to_dict(self) -> dict:
        return asdict(self)


def _check_c(c):
    if not 1.0 < c <= 2.0:
        raise DomainError(f"convexity constant must lie in (1, 2], got {c}")


def prox_certificate(c: float, p: float = 2.0) -> Certificate:
    _check_c(c)
    a = c * (c - 1.0)
    return Certificate(alpha=a / (a + 2.0), eps=(2.0 - c) / (c - 1.0), p=p, c=c,
                       provenance=f"prox(c={c:.17g})")


def projector_certificate(c: float = 2.0, p: float = 2.0) -> Certificate:
    return Certificate(alpha=PROJECTOR_ALPHA, eps=0.0, p=p, c=c, provenance="projector")


def compose_alpha(a0: float, a1: float, c: float) -> float:
    s = a0 + a1 - 2.0 * a0 * a1
    return s / (0.5 * c * (1.0 - a0 - a1 + a0 * a1) + s)


def compose_certificates(c0: Certificate, c1: Certificate, c: Optional[float] = None) -> Certificate:
    """Certificate of ``T1 o T0`` at a common fixed point (``T0`` applied first)."""
    if c0.p != c1.p:
        raise DomainError("cannot compose certificates with different p")
    c = c0.c if c is None else c
    return Certificate(alpha=compose_alpha(c0.alpha, c1.alpha, c),
                       eps=c0.eps + c1.eps + c0.eps * c1.eps, p=c0.p, c=c,
                       provenance=f"({c1.provenance}) o ({c0.provenance})")


def fold_compose(certs, c: Optional[float] = None) -> Certificate:
    """Left fold of :func:`compose_certificates` in application order."""
    certs = list(certs)
    if not certs:
        raise DomainError("nothing to compose")
    return reduce(lambda acc, nxt: compose_certificates(acc, nxt, c), certs)


def prox_prox_certificate(c: float, p: float = 2.0) -> Certificate:
    _check_c(c)
    return Certificate(alpha=2.0 * (c - 1.0) / (2.0 * c - 1.0),
                       eps=1.0 / (c - 1.0) ** 2 - 1.0, p=p, c=c,
                       provenance=f"prox o prox(c={c:.17g})")


def km_alpha(alpha: float, beta: float, p: float) -> float:
    b = beta ** (p - 1.0)
    return alpha * b / (alpha * b - alpha * beta + 1.0)


def km_certificate(inner: Optional[Certificate], beta: float, p: float = 2.0,
                   eps: Optional[float] = None, c: float = 2.0) -> Certificate:
    """Certificate of the relaxation ``beta T + (1 - beta) Id``.

    ``inner`` may be ``None`` when only a violation ``eps`` of plain
    nonexpansiveness is known; that case corresponds to ``alpha = 1``.
    """
    if not 0.0 < beta <= 1.0:
        raise DomainError(f"relaxation parameter must lie in (0, 1], got {beta}")
    if inner is None:
        if eps is None:
            raise DomainError("need an inner certificate or a violation")
        alpha, e, prov = 1.0, eps, f"nonexpansive(eps={eps:.17g})"
    else:
        alpha, e, p, c, prov = inner.alpha, inner.eps, inner.p, inner.c, inner.provenance
    return Certificate(alpha=km_alpha(alpha, beta, p), eps=e * beta, p=p, c=c,
                       provenance=f"KM({prov}, beta={beta:.17g})")


def average_certificate(certs) -> Certificate:
    certs = list(certs)
    if not certs:
        raise DomainError("cannot average an empty family")
    if len({(k.p, k.c) for k in certs}) > 1:
        raise DomainError("averaged certificates must share p and c")
    return Certificate(alpha=max(k.alpha for k in certs), eps=max(k.eps for k in certs),
                       p=certs[0].p, c=certs[0].c,
                       provenance="avg[" + ", ".join(k.provenance for k in certs) + "]")


def projected_gradient_certificate(beta: float, c: float, p: float = 2.0) -> Certificate:
    """Certificate of ``P_C o (beta prox + (1 - beta) Id)``."""
    km = km_certificate(prox_certificate(c, p), beta, p)
    return Certificate(alpha=1.0 / (0.5 * c * (1.0 - km.alpha) + 1.0),
                       eps=prox_certificate(c, p).eps * beta, p=p, c=c,
                       provenance=f"P_C o KM(prox(c={c:.17g}), beta={beta:.17g})")


class CyclicCertificate(NamedTuple):
    certificate: Certificate      # pairwise fold of projector certificates
    closed_form_alpha: float      # (N - 1) / N


def cyclic_projections_certificate(n: int, c: float = 2.0, p: float = 2.0) -> CyclicCertificate:
    """Cyclic projections onto ``n`` sets: folded constant and ``(n-1)/n``.

    The two values disagree (the fold gives ``n/(n+1)`` at ``c = 2``); both
    are returned so callers can report them side by side.
    """
    if n < 2:
        raise DomainError("cyclic projections need at least two sets")
    folded = fold_compose([projector_certificate(c, p)] * n, c)
    folded = Certificate(alpha=folded.alpha, eps=folded.eps, p=p, c=c,
                         provenance=f"cyclic projections N={n}")
    return CyclicCertificate(folded, (n - 1.0) / n)


# -- asymptotic (small neighbourhood) constants -----------------------------------------

class AsymptoticCertificate(NamedTuple):
    local: Certificate    # finite certificate at c = c_delta
    limit: Certificate    # c -> 2 constant, zero violation


def _limit_alpha(builder, **kw):
    p = kw.get("p", 2.0)
    if builder == "prox":
        return 0.5
    if builder == "prox_prox":
        return 2.0 / 3.0
    if builder == "prox_after":
        return 1.0 / (2.0 - kw["alpha0"])
    b = kw["beta"] ** (p - 1.0)
    km_bar = b / (b - kw["beta"] + 2.0)
    if builder == "km":
        return km_bar
    if builder in ("projected_gradient", "prox_km_prox"):
        return 1.0 / (2.0 - km_bar)
    raise DomainError(f"unknown certificate builder {builder!r}")


def finite_certificate(builder: str, c: float, **kw) -> Certificate:
    """Certificate of a named operator family at convexity constant ``c``."""
    p = kw.get("p", 2.0)
    if builder == "prox":
        return prox_certificate(c, p)
    if builder == "prox_prox":
        return prox_prox_certificate(c, p)
    if builder == "prox_after":
        t0 = Certificate(alpha=kw["alpha0"], eps=kw.get("eps0", 0.0), p=p, c=c,
                         provenance="T0")
        return compose_certificates(t0, prox_certificate(c, p), c)
    if builder == "km":
        return km_certificate(prox_certificate(c, p), kw["beta"], p)
    if builder == "projected_gradient":
        return projected_gradient_certificate(kw["beta"], c, p)
    if builder == "prox_km_prox":
        km = km_certificate(prox_certificate(c, p), kw["beta"], p)
        return compose_certificates(km, prox_certificate(c, p), c)
    raise DomainError(f"unknown certificate builder {builder!r}")


def asymptotic_certificate(builder: str, kappa: float, delta: float, **kw) -> AsymptoticCertificate:
    """Finite certificate on a ball of radius ``delta`` plus its ``c -> 2`` limit.

    Builders: ``prox``, ``prox_prox``, ``prox_after`` (needs ``alpha0``,
    optional ``eps0``), ``km`` (``beta``), ``projected_gradient`` (``beta``),
    ``prox_km_prox`` (``beta``).  All accept ``p``.
    """
    c = local_convexity_constant(kappa, delta)
    local = replace(finite_certificate(builder, c, **kw), delta=delta)
    limit = Certificate(alpha=_limit_alpha(builder, **kw), eps=0.0, p=kw.get("p", 2.0),
                        c=2.0, scope="asymptotic", delta=delta,
                        provenance=f"{builder} limit")
    return AsymptoticCertificate(local, limit)


# -- rates ---------------------------------------------------------------------------

VALID, BELOW, ABOVE = "Valid", "BelowLowerBound", "AtOrAboveOne"


@dataclass(frozen=True)
class RatePrediction:
    gamma: float
    mu: float
    tau: float
    validity: str
    mu_lower: float
    mu_upper: float

    @property
    def valid(self) -> bool:
        return self.validity == VALID

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mu_upper"] = None if math.isinf(self.mu_upper) else self.mu_upper
        return d


def linear_rate(alpha: float, eps: float, mu: float, p: float = 2.0) -> RatePrediction:
    if not mu > 0:
        raise DomainError("subregularity modulus must be positive")
    tau = (1.0 - alpha) / alpha
    gp = 1.0 + eps - tau / mu ** p
    lower = (tau / (1.0 + eps)) ** (1.0 / p)
    upper = math.inf if eps == 0.0 else (tau / eps) ** (1.0 / p)
    if gp <= 0.0:
        validity = BELOW
    elif gp >= 1.0:
        validity = ABOVE
    else:
        validity = VALID
    return RatePrediction(gamma=max(gp, 0.0) ** (1.0 / p), mu=mu, tau=tau,
                          validity=validity, mu_lower=lower, mu_upper=upper)


def rate_from_certificate(cert: Certificate, mu: float) -> RatePrediction:
    """Linear rate ``(1 + eps - tau/mu^p)^(1/p)`` implied by a certificate."""
    return linear_rate(cert.alpha, cert.eps, mu, cert.p)


def a_priori_constant(cert: Certificate, c: Optional[float] = None) -> float:
    """Constant ``a`` with ``d(x_k, x*) <= a * s_k(t0)`` for gauge monotone traces."""
    c = cert.c if c is None else c
    return (2.0 * cert.alpha * (1.0 + cert.eps) / (c * (1.0 - cert.alpha))) ** (1.0 / cert.p)


# -- certificates of operator trees ---------------------------------------------------

def certify_operator(space, T, c: Optional[float] = None) -> Certificate:
    """Certificate of an operator expression from the calculus above.

    Projectors and prox mappings of indicators get ``(1/2, 0)``; prox
    mappings of radial functions get :func:`prox_certificate`; relaxations,
    compositions (folded in application order) and averages combine these.
    ``c`` defaults to the convexity constant of ``space``; pass ``c=2`` for
    the small-neighbourhood limit.
    """
    from .functions import Indicator
    from .operators import KM, Average, Compose, Project, Prox

    c = space.c if c is None else c
    p = space.p

    def walk(node):
        if isinstance(node, Project) or (isinstance(node, Prox)
                                         and isinstance(node.f, Indicator)):
            return projector_certificate(c, p)
        if isinstance(node, Prox):
            return prox_certificate(c, p)
        if isinstance(node, KM):
            return km_certificate(walk(node.inner), node.beta, p)
        if isinstance(node, Compose):
            return fold_compose([walk(op) for op in reversed(node.ops)], c)
        if isinstance(node, Average):
            return average_certificate([walk(op) for op, _ in node.terms])
        raise DomainError(f"no certificate rule for {type(node).__name__}")

    return walk(T)


def certify_operator_asymptotic(space, T) -> Certificate:
    """Small-neighbourhood constant of an operator tree (``c -> 2``, zero violation)."""
    cert = certify_operator(space, T, c=2.0)
    return Certificate(alpha=cert.alpha, eps=0.0, p=cert.p, c=2.0, scope="asymptotic",
                       delta=space.delta if space.is_sphere else None,
                       provenance=cert.provenance + " limit")
