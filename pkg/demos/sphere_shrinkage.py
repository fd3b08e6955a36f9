"""How the sampled violation behaves as the cap shrinks.

For radial prox maps the violation at alpha = 1/2, measured with the cap's
own convexity constant, is zero on every cap.  Measured with c = 2 the
projector onto an arc through the cap shows a violation that decays as the
cap radius shrinks, and the certified constants approach their limits.

    python demos/sphere_shrinkage.py
"""

import math

from geoprox.certificates import asymptotic_certificate
from geoprox.spaces import SphereCap
from geoprox.verify import NORTH, arc_projection_half_violation, prox_violation_sweep


def main():
    print(f"{'delta':>8} {'c_delta':>9} {'prox eps(1/2)':>14} {'arc eps(1/2), c=2':>18}")
    for k in (8, 16, 32, 64):
        delta = math.pi / k
        space = SphereCap(2, 1.0, NORTH, delta)
        _, _, half = prox_violation_sweep(space, 2000, seed=k, n_funcs=20)
        arc = arc_projection_half_violation(delta, 2000, seed=k, c=2.0)
        print(f"{delta:8.5f} {space.c:9.6f} {half:14.3e} {arc:18.3e}")

    print("\ncertified constants against their limits")
    for builder, kw in (("prox", {}), ("prox_prox", {}), ("km", {"beta": 0.5}),
                        ("projected_gradient", {"beta": 0.5})):
        for delta in (math.pi / 8, math.pi / 64, 1e-4):
            res = asymptotic_certificate(builder, 1.0, delta, **kw)
            print(f"  {builder:>18} delta={delta:8.5f}  alpha={res.local.alpha:.6f} "
                  f"eps={res.local.eps:.2e}  limit={res.limit.alpha:.6f}")


if __name__ == "__main__":
    main()
