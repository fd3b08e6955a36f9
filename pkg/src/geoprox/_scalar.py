import math

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, tol=1e-12, max_iter=500):
    """Bracket the minimizer of a unimodal ``f`` on ``[lo, hi]``.

    Returns the final bracket ``(lo, hi)`` with ``hi - lo <= tol`` (or after
    ``max_iter`` reductions).
    """
    a, b = float(lo), float(hi)
    x1 = b - INVPHI * (b - a)
    x2 = a + INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INVPHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INVPHI * (b - a)
            f2 = f(x2)
    return a, b


def golden_argmin(f, lo, hi, tol=1e-12):
    """Minimizer of unimodal ``f`` on ``[lo, hi]``, endpoints included."""
    a, b = golden_section(f, lo, hi, tol)
    best = 0.5 * (a + b)
    fb = f(best)
    for cand in (lo, hi):
        fc = f(cand)
        if fc < fb:
            best, fb = cand, fc
    return best


def bisect_increasing(g, lo, hi, max_iter=200):
    """Root of a nondecreasing ``g`` with ``g(lo) < 0 < g(hi)``, to float precision."""
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
