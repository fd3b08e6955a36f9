"""Acceptance gate: one test per criterion, full sample sizes, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

import subprocess
import sys

import pytest

from geoprox import verify
from geoprox.certificates import cyclic_projections_certificate

SEED = 0


def report(capsys, number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


def _assert(capsys, number, title, ok, detail):
    assert report(capsys, number, title, ok, detail), detail


def test_01_uniform_convexity(capsys):
    m = verify.check_convexity(100_000, SEED).measured
    ok = m["cap_min_residual"] >= -1e-9 and m["euclidean_max_abs_residual"] <= 1e-12
    _assert(capsys, 1, "uniform convexity", ok,
            f"cap min residual {m['cap_min_residual']:.3e} (>= -1e-9), "
            f"Euclidean max |residual| {m['euclidean_max_abs_residual']:.3e} (<= 1e-12)")


def test_02_prox_certificate(capsys):
    m = verify.check_prox_certificate(10_000, SEED).measured
    bound = all(m[k]["eps_hat"] <= m[k]["eps_c"] + 1e-8 for k in ("pi/8", "pi/16"))
    cap_c = m["half_violation_cap_c"]
    flat = m["half_violation_c2_arc_projection"]
    shrink = all(b <= a + 1e-12 for a, b in zip(cap_c, cap_c[1:])) and \
        all(b < a for a, b in zip(flat, flat[1:]))
    detail = "; ".join(f"delta={k}: eps_hat {m[k]['eps_hat']:.3e} <= eps_c {m[k]['eps_c']:.4e}"
                       for k in ("pi/8", "pi/16"))
    detail += (f"; eps_hat(1/2) cap-c {['%.2e' % v for v in cap_c]}, "
               f"c=2 arc {['%.2e' % v for v in flat]}")
    _assert(capsys, 2, "prox certificate", bound and shrink, detail)


def test_03_quasi_strict(capsys):
    m = verify.check_quasi_strict_prox(10_000, SEED).measured
    _assert(capsys, 3, "quasi strict nonexpansiveness", m["min_margin"] > 0,
            f"min margin {m['min_margin']:.3e} (> 0)")


def test_04_composition(capsys):
    m = verify.check_composition(10_000, SEED).measured
    ok = m["fold_gap"] <= 1e-12 and m["eps_hat"] <= m["eps_circ"] + 1e-8
    _assert(capsys, 4, "composition calculus", ok,
            f"fold gap {m['fold_gap']:.2e} (<= 1e-12 relative), eps_hat {m['eps_hat']:.3e} "
            f"<= eps_circ {m['eps_circ']:.4e}")


def test_05_km(capsys):
    m = verify.check_km(10_000, SEED).measured
    ok = all(v["eps_hat"] <= v["eps_beta"] + 1e-8 and v["residual_identity_gap"] <= 1e-10
             for v in m.values())
    detail = "; ".join(f"beta={b}: eps_hat {v['eps_hat']:.2e} <= {v['eps_beta']:.3e}, "
                       f"identity gap {v['residual_identity_gap']:.1e}" for b, v in m.items())
    _assert(capsys, 5, "KM relaxation", ok, detail)


def test_06_two_point_barycenter(capsys):
    m = verify.check_two_point_barycenter(0, SEED).measured
    _assert(capsys, 6, "two-point barycenter", m["max_fraction_gap"] <= 1e-6,
            f"max |t_formula - t_oracle| {m['max_fraction_gap']:.2e} (<= 1e-6)")


def test_07_linear_rate(capsys):
    m = verify.check_linear_rate(2000, SEED).measured
    ok = True
    parts = []
    for k, v in m.items():
        ok &= (v["relative_gap"] <= 0.02 and v["validity"] == "Valid"
               and v["fitted_rate"] <= 1.02 * v["gamma"]
               and abs(v["alpha"] - 2 / 3) <= 1e-15 and v["eps"] == 0.0)
        parts.append(f"theta={k}: rate {v['fitted_rate']:.6f} vs cos^2 {v['cos2']:.6f}, "
                     f"gamma {v['gamma']:.4f} (mu_hat {v['mu_hat']:.3f}, {v['validity']})")
    _assert(capsys, 7, "linear rate", ok, "; ".join(parts))


def test_08_intersection(capsys):
    m = verify.check_intersection(0, SEED).measured
    _assert(capsys, 8, "fixed-point intersection", m["max_set_distance"] <= 1e-6,
            f"max distance to either set {m['max_set_distance']:.2e} (<= 1e-6)")


def test_09_surrogate(capsys):
    m = verify.check_surrogate(1000, SEED).measured
    ok = m["surrogate_gap"] <= 1e-10 and m["discrepancy_gap"] <= 1e-9
    _assert(capsys, 9, "surrogate consistency", ok,
            f"surrogate gap {m['surrogate_gap']:.2e} (<= 1e-10), "
            f"discrepancy gap {m['discrepancy_gap']:.2e} (<= 1e-9)")


def test_10_gauge(capsys):
    m = verify.check_gauge(1000, SEED).measured
    ok = all(v["converged"] and v["gauge_monotone"] and v["a_priori_holds"] for v in m.values())
    bad = [k for k, v in m.items() if not (v["gauge_monotone"] and v["a_priori_holds"])]
    _assert(capsys, 10, "gauge machinery", ok,
            f"{len(m)} preset traces, gauge and a-priori bound hold"
            + (f"; failing: {bad}" if bad else ""))


def test_11_determinism(capsys):
    cmd = [sys.executable, "-m", "geoprox", "verify", "--seed", "7"]
    runs = [subprocess.run(cmd, capture_output=True, timeout=120) for _ in range(2)]
    same = runs[0].stdout == runs[1].stdout and len(runs[0].stdout) > 0
    codes = [r.returncode for r in runs]
    _assert(capsys, 11, "determinism", same and codes == [0, 0],
            f"byte-identical reports: {same}, exit codes {codes}")


def test_cyclic_fold_value():
    # pairwise fold of N projector certificates at c = 2
    for n in range(2, 8):
        assert cyclic_projections_certificate(n).certificate.alpha == pytest.approx(n / (n + 1),
                                                                                   abs=1e-15)


if __name__ == "__main__":
    results = []
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and name[5:7].isdigit():
            try:
                fn(None)
                results.append(True)
            except AssertionError:
                results.append(False)
    sys.exit(0 if all(results) else 1)
