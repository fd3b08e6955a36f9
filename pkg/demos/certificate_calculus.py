"""Walk through the certificate calculus.

Prints prox, composition, relaxation and cyclic-projection constants for a
few convexity constants, then the predicted linear rate as the
subregularity modulus grows.

    python demos/certificate_calculus.py
"""

import numpy as np

from geoprox.certificates import cyclic_projections_certificate, finite_certificate, linear_rate
from geoprox.spaces import local_convexity_constant


def table():
    print(f"{'c':>6} {'prox a':>9} {'prox e':>9} {'prox2 a':>9} {'prox2 e':>9} {'km a':>9}")
    for c in (2.0, 1.9, 1.75, 1.5, 1.25):
        p = finite_certificate("prox", c)
        pp = finite_certificate("prox_prox", c)
        km = finite_certificate("km", c, beta=0.5)
        print(f"{c:6.2f} {p.alpha:9.5f} {p.eps:9.5f} {pp.alpha:9.5f} {pp.eps:9.5f} {km.alpha:9.5f}")


def caps():
    # the convexity constant of a cap shrinks from 2 as the cap grows
    print("\ncap radius -> c_delta (curvature 1)")
    for delta in np.pi / np.array([64, 32, 16, 8, 5]):
        print(f"  {delta:8.5f}  {local_convexity_constant(1.0, delta):.6f}")


def cyclic():
    print("\ncyclic projections: pairwise fold vs (N-1)/N")
    for n in range(2, 7):
        res = cyclic_projections_certificate(n)
        print(f"  N={n}  fold {res.certificate.alpha:.6f}  (N-1)/N {res.closed_form_alpha:.6f}")


def rates():
    print("\nrate for alpha=1/2, eps=0 as mu grows")
    for mu in (1.0, 1.2, 1.5, 2.0, 4.0, 10.0):
        r = linear_rate(0.5, 0.0, mu)
        g = "-" if r.validity == "BelowLowerBound" else f"{r.gamma:.5f}"
        print(f"  mu={mu:5.1f}  gamma={g:>8}  {r.validity}")


if __name__ == "__main__":
    table()
    caps()
    cyclic()
    rates()
