"""End-to-end acceptance runs, one group of tests per criterion.

Each test records its measured numbers through the `record` fixture; the
terminal summary prints one PASS/FAIL line per criterion.  Parts that the
mathematics does not support are marked xfail(strict=True): they still run,
still assert the stated target, and show as FAIL in the summary.
"""
import math

import numpy as np
import pytest

from thermolab.kernels import DoubleKernelSpec, double_kernel, kernel_radial, kernel_spec, profile_amplitude, undamped
from thermolab.params import UNIT, ModelParams, derive
from thermolab.quadrature import RadialWindow, gaussian_profile, solution_l2_norm
from thermolab.rates import (EXPONENT_TOL, ReferenceRate, blowup_probe, fit_log_linear, fit_rate,
                             i_of_t_series, log_grid, profile_error_experiment, reference_rate,
                             table1, trend_check, zone_decay_fit)
from thermolab.roots import quartic_coefficients, quartic_value, residual_scale, roots_array, solve_quartic
from thermolab.solution import (Model, SpectralState, Target, cramer_coefficients, evaluate_type3,
                                generic_coefficients, reduce_data, solution_arrays, vandermonde_solve)

DP = derive(UNIT)
DP2 = undamped(DP)
P2 = UNIT.with_delta(0.0)
TS = log_grid(1e2, 1e6, 12)
THREADS = 4


def vieta_residual(params, r, lam):
    coeffs = np.asarray(quartic_coefficients(params, r), dtype=float).ravel()
    scale = np.abs(coeffs) + np.abs(np.poly(np.abs(lam)))
    return float(np.max(np.abs(np.poly(lam).real - coeffs) / np.maximum(scale, 1e-300)))


# ------------------------------------------------------------------ 1


def test_c1_root_correctness(record):
    rng = np.random.default_rng(2024)
    worst_v = worst_q = worst_u = 0.0
    unstable = 0
    for k in range(1200):
        b, kappa, gamma = np.exp(rng.uniform(np.log(0.1), np.log(10), 3))
        delta = 0.0 if k >= 1000 else float(np.exp(rng.uniform(np.log(0.01), np.log(10))))
        params = ModelParams(b, kappa, gamma, delta)
        r = float(10 ** rng.uniform(-6, 4))
        lam = roots_array(params, [r])[0][0]
        worst_v = max(worst_v, vieta_residual(params, r, lam))
        worst_q = max(worst_q, float(np.max(np.abs(quartic_value(params, r, lam))
                                            / residual_scale(params, r, lam))))
        if delta > 0:
            unstable += int(np.max(lam.real) >= 0)
        else:
            dp = derive(params)
            want = np.sort(np.array([1, -1, 1, -1]) * 1j * np.array([dp.nu1, dp.nu1, dp.nu2, dp.nu2]) * r)
            got = np.sort(lam)
            worst_u = max(worst_u, float(np.max(np.abs(got - want)) / max(1.0, np.max(np.abs(want)))))
    ok = worst_v <= 1e-9 and worst_q <= 1e-9 and unstable == 0 and worst_u <= 1e-10
    record(1, "1000 damped + 200 undamped random cases", ok,
           f"Vieta {worst_v:.2g}, residual {worst_q:.2g}, unstable {unstable}, undamped {worst_u:.2g}")
    assert ok


# ------------------------------------------------------------------ 2


@pytest.mark.xfail(strict=True, reason="the real parts are even in r: the correction after -c2 r^2 is O(r^4)")
def test_c2_small_zone_real_part_order(record):
    rs = np.geomspace(1e-4, 1e-2, 9)
    lam, _ = roots_array(UNIT, rs)
    err = np.abs(lam[:, 0].real + DP.c2 * rs ** 2)
    slope = np.polyfit(np.log(rs), np.log(err), 1)[0]
    ok = abs(slope - 3.0) <= 0.1
    record(2, "slope of |Re lambda + c2 r^2| (target 3 +- 0.1)", ok, f"measured {slope:.4f}")
    assert ok


@pytest.mark.xfail(strict=True, reason="the real root approaches -kappa/delta with an O(r^-2) error")
def test_c2_large_zone_real_root_order(record):
    rs = np.geomspace(1e2, 1e4, 9)
    lam, zone = roots_array(UNIT, rs)
    assert all(int(z) == 1 for z in zone)
    err = np.abs(lam[:, 1].real + UNIT.kappa / UNIT.delta)
    slope = np.polyfit(np.log(rs), np.log(err), 1)[0]
    ok = abs(slope + 1.0) <= 0.1
    record(2, "slope of |lambda_2 + kappa/delta| (target -1 +- 0.1)", ok, f"measured {slope:.4f}")
    assert ok


# ------------------------------------------------------------------ 3


def test_c3_initial_data_reproduced(record):
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(1000):
        params = ModelParams(*np.exp(rng.uniform(-1, 1, 4)))
        r = float(10 ** rng.uniform(-2, 1))
        data = tuple(complex(x, y) for x, y in rng.normal(size=(4, 2)))
        rs = solve_quartic(params, derive(params), r)
        for target in (Target.U, Target.THETA):
            fo = reduce_data(params, SpectralState.curl_free(*data, r), target, Model.TYPE_III)
            got = evaluate_type3(vandermonde_solve(rs, fo), rs, 0.0, derivatives=3)
            want = np.array(fo.v)
            worst = max(worst, float(np.max(np.abs(got - want)) / max(1.0, np.max(np.abs(want)))))
    ok = worst <= 1e-9
    record(3, "solution and 3 derivatives at t=0 (1000 cases, both targets)", ok, f"worst {worst:.2g}")
    assert ok


def test_c3_cramer_vs_generic(record):
    rng = np.random.default_rng(32)
    worst = 0.0
    for _ in range(1000):
        params = ModelParams(*np.exp(rng.uniform(-1, 1, 4)))
        r = float(10 ** rng.uniform(-2, 1))
        lam = roots_array(params, [r])[0][0]
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        a, b = cramer_coefficients(lam, v), generic_coefficients(lam, v)
        worst = max(worst, float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))))
    ok = worst <= 1e-9
    record(3, "Cramer vs generic solve (1000 samples)", ok, f"worst {worst:.2g}")
    assert ok


def test_c3_delta_to_zero(record):
    rs = np.linspace(0.1, 1.0, 10)
    ts = np.linspace(0, 10, 21)
    data = (0.3, -0.7, 0.5, 1.0)

    def sup(delta):
        p = UNIT.with_delta(delta)
        worst = 0.0
        for t in ts:
            a = solution_arrays(p, rs, t, data, "TypeIII")
            b = solution_arrays(P2, rs, t, data, "TypeII")
            worst = max(worst, *(np.max(np.abs(a[k] - b[k])) for k in a))
        return worst
    deltas = np.array([1e-3, 1e-4, 1e-5])
    errs = np.array([sup(d) for d in deltas])
    order = np.polyfit(np.log(deltas), np.log(errs), 1)[0]
    spread = np.max(errs / deltas) / np.min(errs / deltas)
    ok = order >= 1.0 - EXPONENT_TOL and spread <= 1.01
    record(3, "type III -> type II around delta=1e-4", ok,
           f"order {order:.5f}, err/delta spread {spread:.5f}, err(1e-4)={errs[1]:.3g}")
    assert ok


# ------------------------------------------------------------------ 4

SPEC_S1 = DoubleKernelSpec(1.0, 1.0, DP.nu1, DP.nu2, DP.c1, DP.c2, 1)
SPEC_S0 = DoubleKernelSpec(DP.alpha0 - DP.alpha2, DP.alpha0 + DP.alpha2, DP.nu1, DP.nu2, DP.c1, DP.c2, 0)
EPS0 = 1.0


@pytest.mark.parametrize("label, spec, n, expected", [
    ("sigma=1 n=3", SPEC_S1, 3, 1.0), ("sigma=1 n=5", SPEC_S1, 5, -0.5),
    ("sigma=0 n=1", SPEC_S0, 1, 1.0), ("sigma=0 n=3", SPEC_S0, 3, -0.5),
])
def test_c4_power_rates(record, label, spec, n, expected):
    fit = fit_rate(TS, i_of_t_series(spec, n, TS, EPS0, threads=THREADS), model="power")
    ok = abs(fit.exponent - expected) <= EXPONENT_TOL
    record(4, f"{label} exponent (target {expected:g})", ok, f"{fit.exponent:.4f}, r2 {fit.r_squared:.5f}")
    assert ok


@pytest.mark.parametrize("label, spec, n", [("sigma=1 n=4", SPEC_S1, 4), ("sigma=0 n=2", SPEC_S0, 2)])
def test_c4_log_rates(record, label, spec, n):
    b, a, r2 = fit_log_linear(TS, i_of_t_series(spec, n, TS, EPS0, threads=THREADS))
    ok = r2 > 0.99 and b > 0
    record(4, f"{label} log-linear", ok, f"I = {a:.4g} + {b:.4g} ln t, r2 {r2:.7f}")
    assert ok


# ------------------------------------------------------------------ 5


@pytest.mark.parametrize("n, expected", [(1, 3.0), (3, 1.0)])
def test_c5_equal_weight_power(record, n, expected):
    fit = fit_rate(TS, i_of_t_series(SPEC_S1, n, TS, EPS0, threads=THREADS), model="power")
    ok = abs(fit.exponent - expected) <= EXPONENT_TOL
    record(5, f"l1=l2 n={n} exponent (target {expected:g})", ok, f"{fit.exponent:.4f}")
    assert ok


@pytest.mark.xfail(strict=True, reason="for n=2 the integral converges to a pure t^2 law, no log factor")
def test_c5_equal_weight_n2_sqrt_log(record):
    norms = np.sqrt(i_of_t_series(SPEC_S1, 2, TS, EPS0, threads=THREADS))
    fit = fit_rate(TS, norms)
    improvement = fit.rss_power / fit.rss if fit.rss > 0 else math.inf
    ok = fit.log_flag == "sqrt_log" and abs(fit.exponent - 1.0) <= EXPONENT_TOL and improvement >= 2
    plain = fit_rate(TS, norms, model="power")
    record(5, "l1=l2 n=2 norm ~ t sqrt(ln t)", ok,
           f"selected {fit.log_flag}, plain power exponent of I {2 * plain.exponent:.4f}, "
           f"log-model improvement {improvement:.3g}x")
    assert ok


def test_c5_blowup_probes(record):
    spec = DoubleKernelSpec(1.0, 2.0, 1.0, 1.0, DP.c1, DP.c2, 1)
    eps1 = np.geomspace(1e-6, 1e-3, 10)
    f1, _ = blowup_probe(spec, 1, 1.0, eps1)
    f2, _ = blowup_probe(spec, 2, 1.0, eps1)
    ok1 = abs(f1.exponent + 1.0) <= EXPONENT_TOL
    ok2 = f2.r_squared > 0.99
    record(5, "blow-up n=1 slope in eps1 (target -1)", ok1, f"{f1.exponent:.4f}")
    record(5, "blow-up n=2 linear in ln(1/eps1)", ok2, f"coefficient {f2.exponent:.4f}, r2 {f2.r_squared:.6f}")
    assert ok1 and ok2


# ------------------------------------------------------------------ 6


def test_c6_kernel_limits(record):
    spec = kernel_spec("G2", DP)
    worst = 0.0
    for t in (0.5, 7.0, 300.0):
        v = double_kernel(spec, t, np.array([1e-12]), branch="series")[0]
        worst = max(worst, abs(v - t) / t)
    ok1 = worst <= 1e-8
    record(6, "G2 -> t as r -> 0 (series branch)", ok1, f"relative error {worst:.2g}")

    coef = abs(DP.gamma / DP.alpha2 * (DP.nu1 ** 2 - DP.nu2 ** 2)) / 6
    worst3 = 0.0
    for t, r in ((1.0, 1e-3), (10.0, 1e-5), (100.0, 1e-7), (3.0, 1e-6)):
        got = abs(kernel_radial("G3", DP2, t, np.array([r]))[0])
        worst3 = max(worst3, abs(got / (coef * t ** 3 * r) - 1))
    ok2 = worst3 <= 0.01
    record(6, "G3 small-rt magnitude", ok2, f"relative error {worst3:.2g}")

    r = np.geomspace(1e-6, 5, 400)
    same = all(np.array_equal(profile_amplitude(a, DP2, 1.7, t, r), profile_amplitude(b, DP2, 1.7, t, r))
               for a, b in (("phi_tilde", "phi"), ("psi_tilde", "psi")) for t in (0.3, 40.0, 1e4))
    record(6, "undamped profiles equal damped ones at delta=0", same, "bit-identical" if same else "differ")
    assert ok1 and ok2 and same


# ------------------------------------------------------------------ 7

TREND_TS = log_grid(1e2, 1e6, 9)


@pytest.mark.slow
@pytest.mark.parametrize("n", [1, 2, 3, 5])
@pytest.mark.parametrize("target", ["U", "Theta"])
def test_c7_damped_profile_errors(record, n, target):
    series = profile_error_experiment(UNIT, DP, gaussian_profile(n), "TypeIII", target, TREND_TS, n,
                                      threads=THREADS)
    tc = trend_check(*zip(*series))
    record(7, f"{target} n={n}", tc.passed, f"drop {tc.drop:.3g}x, decreasing beyond 1e3: {tc.decreasing}")
    assert tc.passed


# ------------------------------------------------------------------ 8


@pytest.mark.parametrize("target, n", [("U", 1), ("U", 2), ("U", 3), ("U", 4), ("Theta", 1), ("Theta", 2)])
def test_c8_upper_bounds(record, target, n):
    prof = gaussian_profile(n)
    rate = ReferenceRate("D" if target == "U" else "E", n)
    ts = log_grid(1e3, 1e6, 8)
    window = RadialWindow(0.0, prof.tail_radius)
    ratios = [solution_l2_norm(P2, DP2, prof, "TypeII", target, t, window, n).value / reference_rate(rate, t)
              for t in ts]
    spread = max(ratios) / min(ratios)
    ok = spread <= 20
    record(8, f"upper bound {target} n={n}", ok, f"max/min {spread:.3g}")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("target, n", [("U", 1), ("U", 2), ("U", 3), ("U", 4), ("Theta", 1), ("Theta", 2)])
def test_c8_windowed_errors(record, target, n):
    series = profile_error_experiment(P2, DP2, gaussian_profile(n), "TypeII", target, TREND_TS, n,
                                      threads=THREADS)
    tc = trend_check(*zip(*series))
    record(8, f"windowed error {target} n={n}", tc.passed,
           f"drop {tc.drop:.3g}x, decreasing beyond 1e3: {tc.decreasing}")
    assert tc.passed


# ------------------------------------------------------------------ 9

# cells whose finite-window fit cannot show the predicted sqrt-log factor
LOG_CELLS = {("longitudinal_II", 2), ("longitudinal_III", 2), ("thermal_III", 2)}


@pytest.fixture(scope="module")
def table():
    return {(c.row, c.n): c for c in table1(UNIT, threads=THREADS)}


def _describe(c):
    return f"{c.row} n={c.n}: predicted {c.predicted}, fitted {c.exponent:+.4f} {c.log_flag}"


def test_c9_table_cells(record, table):
    cells = [c for key, c in table.items() if key not in LOG_CELLS]
    bad = [_describe(c) for c in cells if not c.matches]
    record(9, f"{len(cells) - len(bad)}/{len(cells)} cells without the n=2 log factors", not bad,
           "; ".join(bad) or "all match")
    assert not bad


@pytest.mark.xfail(strict=True, reason="the sqrt-log factor at n=2 is not resolved on [1e2, 1e6]")
def test_c9_log_cells(record, table):
    cells = [table[key] for key in sorted(LOG_CELLS)]
    ok = all(c.matches for c in cells)
    record(9, "n=2 sqrt-log cells", ok, "; ".join(_describe(c) for c in cells))
    assert ok


# ----------------------------------------------------------------- 10


@pytest.mark.parametrize("r", [1.0, 20.0])
def test_c10_zone_decay(record, r):
    fit = zone_decay_fit(UNIT, r)
    ok = fit.rate < 0 and fit.r_squared > 0.99
    record(10, f"r={r:g}", ok, f"rate {fit.rate:.4f}, r2 {fit.r_squared:.5f}")
    assert ok
