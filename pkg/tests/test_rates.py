import json
import math

import numpy as np
import pytest

from thermolab.kernels import DoubleKernelSpec
from thermolab.params import UNIT, derive
from thermolab.quadrature import gaussian_profile
from thermolab.rates import (BASELINE_FILE, ReferenceRate, compare_baseline, fit_log_linear,
                             fit_rate, i_of_t_series, blowup_probe, log_grid, pointwise_ratio_scan,
                             predicted_cell, profile_error_experiment, reference_rate, scan_key,
                             table1, trend_check, zone_decay_fit)

DP = derive(UNIT)
TS = log_grid(1e2, 1e6, 12)


def test_reference_rate_examples():
    assert reference_rate(ReferenceRate("D", 3), 3.0) == pytest.approx(2.0)
    assert reference_rate(ReferenceRate("E", 2), 0.0) == pytest.approx(1.0)
    assert reference_rate(ReferenceRate("D", 5), 15.0) == pytest.approx(0.5)


def test_reference_rate_pieces():
    t = 15.0
    lg = math.sqrt(math.log(math.e + t))
    assert reference_rate(ReferenceRate("D", 1), t) == pytest.approx(16 ** 1.5)
    assert reference_rate(ReferenceRate("D", 2), t) == pytest.approx(16 * lg)
    assert reference_rate(ReferenceRate("D", 4), t) == pytest.approx(lg)
    assert reference_rate(ReferenceRate("D", 6), t) == pytest.approx(16 ** -0.5)
    assert reference_rate(ReferenceRate("E", 1), t) == pytest.approx(4.0)
    assert reference_rate(ReferenceRate("E", 2), t) == pytest.approx(lg)
    assert reference_rate(ReferenceRate("E", 3), t) == pytest.approx(16 ** -0.25)
    with pytest.raises(ValueError):
        reference_rate(ReferenceRate("E", 3), -1.0)
    with pytest.raises(ValueError):
        ReferenceRate("F", 3)


def test_fit_pure_power():
    fit = fit_rate(TS, TS ** 1.5)
    assert fit.exponent == pytest.approx(1.5, abs=1e-12)
    assert fit.log_flag == "none"
    assert fit.r_squared == pytest.approx(1.0)


def test_fit_power_with_sqrt_log():
    fit = fit_rate(TS, TS ** 2 * np.sqrt(np.log(TS)))
    assert fit.log_flag == "sqrt_log"
    assert fit.exponent == pytest.approx(2.0, abs=1e-10)
    assert fit.rss * 2 <= fit.rss_power


def test_planted_exponents_with_noise():
    rng = np.random.default_rng(0)
    for _ in range(50):
        e = rng.uniform(-3, 3)
        amp = 10 ** rng.uniform(-3, 3)
        y = amp * TS ** e * np.exp(rng.normal(0, 0.01, TS.size))
        fit = fit_rate(TS, y, model="power")
        assert fit.exponent == pytest.approx(e, abs=0.01)
        assert fit.r_squared >= 0.999 or abs(e) < 0.05


def test_fit_rejects_bad_series():
    with pytest.raises(ValueError, match="positive"):
        fit_rate(TS, -TS)
    with pytest.raises(ValueError, match="8"):
        fit_rate(TS[:5], TS[:5])
    with pytest.raises(ValueError, match="decades"):
        fit_rate(np.linspace(10, 20, 10), np.linspace(10, 20, 10))
    with pytest.raises(ValueError):
        fit_rate(TS, TS, model="cubic")


def test_log_linear_fit():
    b, a, r2 = fit_log_linear(TS, 3.0 + 0.5 * np.log(TS))
    assert (b, a, r2) == (pytest.approx(0.5), pytest.approx(3.0), pytest.approx(1.0))


def test_i_of_t_exponent_n3():
    spec = DoubleKernelSpec(1.0, 1.0, DP.nu1, DP.nu2, DP.c1, DP.c2, 1)
    fit = fit_rate(TS, i_of_t_series(spec, 3, TS, threads=4), model="power")
    assert fit.exponent == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("n, expected", [(1, 1.5), (3, 0.5)])
def test_equal_speeds_give_heat_like_growth(n, expected):
    # l1 = l2 and beta1 = beta2: the difference is only in the damping.  The
    # integrand lives at r ~ t^-1/2, so the window must reach well past 1/sqrt(100).
    spec = DoubleKernelSpec(1.0, 1.0, 1.0, 1.0, DP.c1, DP.c2, 1)
    fit = fit_rate(TS, i_of_t_series(spec, n, TS, eps0=1.0, threads=4), model="power")
    assert fit.exponent == pytest.approx(expected, abs=0.05)


def test_blowup_probe_rates():
    spec = DoubleKernelSpec(1.0, 2.0, 1.0, 1.0, DP.c1, DP.c2, 1)
    eps1 = np.geomspace(1e-6, 1e-3, 10)
    fit, vals = blowup_probe(spec, 1, 1.0, eps1)
    assert fit.exponent == pytest.approx(-1.0, abs=0.05)
    # leading term (l1 - l2)^2 t^2 / eps1
    assert vals[0] * eps1[0] == pytest.approx(1.0, rel=1e-2)
    fit2, _ = blowup_probe(spec, 2, 1.0, eps1)
    assert fit2.log_flag == "log" and fit2.r_squared > 0.99
    assert fit2.exponent == pytest.approx(1.0, rel=1e-2)


def test_blowup_probe_rejects_convergent():
    spec = DoubleKernelSpec(1.0, 1.0, 1.0, 1.0, DP.c1, DP.c2, 1)
    with pytest.raises(ValueError, match="I_of_t"):
        blowup_probe(spec, 1, 1.0, np.geomspace(1e-6, 1e-3, 10))


def test_scan_zero_data():
    rep = pointwise_ratio_scan(UNIT, DP, (0, 0, 0, 0), "U", "small_zone", (1, 1e3), (1e-3, 0.1),
                               points=(16, 16))
    assert rep.sup_ratio == 0.0 and rep.stable


def test_small_zone_scan_matches_packaged_baseline():
    args = (UNIT, DP, (0, 0, 0, 1.0), "U", "small_zone", (1.0, 1e3), (1e-3, 0.1))
    rep = pointwise_ratio_scan(*args, points=(64, 64))
    assert math.isfinite(rep.sup_ratio) and rep.stable and rep.rhs_zeros == 0
    key = scan_key(UNIT, (0, 0, 0, 1.0), "U", "small_zone", (1.0, 1e3), (1e-3, 0.1), (64, 64))
    with open(BASELINE_FILE) as fh:
        base = json.load(fh)[key]
    assert rep.sup_ratio == pytest.approx(base["sup_ratio"], rel=0.1)
    assert rep.c == pytest.approx(base["c"], rel=0.1)


def test_compare_baseline_roundtrip(tmp_path):
    path = tmp_path / "base.json"
    assert compare_baseline(str(path), "k", {"x": 1.0})[0] == "stored"
    assert compare_baseline(str(path), "k", {"x": 1.05})[0] == "match"
    assert compare_baseline(str(path), "k", {"x": 1.2})[0] == "mismatch"


def test_large_zone_decay_fit():
    fit = zone_decay_fit(UNIT, 20.0)
    assert fit.rate < 0 and fit.r_squared > 0.99


def test_trend_check():
    ts = np.geomspace(1e2, 1e6, 9)
    assert trend_check(ts, ts ** -0.2).passed
    assert not trend_check(ts, ts ** -0.1).passed       # drops 2.5x only
    bumpy = ts ** -0.5
    bumpy[-2] = bumpy[-3] * 1.1
    assert not trend_check(ts, bumpy).passed


def test_profile_error_for_theta_n1():
    ts = np.geomspace(1e2, 1e6, 9)
    series = profile_error_experiment(UNIT, DP, gaussian_profile(1), "TypeIII", "Theta", ts, 1,
                                      threads=4)
    assert trend_check([t for t, _ in series], [v for _, v in series]).passed


def test_predicted_cells():
    assert predicted_cell("longitudinal_III", 1) == (1.5, "none")
    assert predicted_cell("thermal_III", 3) == (-0.25, "none")
    assert predicted_cell("thermal_II", 3) is None
    assert predicted_cell("longitudinal_III", 6) == (-0.5, "none")
    with pytest.raises(ValueError):
        predicted_cell("shear", 1)


def test_table_examples():
    cells = {(c.row, c.n): c for c in table1(UNIT, rows=("longitudinal_III", "thermal_III", "thermal_II"),
                                             dims=(1, 3), threads=4)}
    assert cells["longitudinal_III", 1].exponent == pytest.approx(1.5, abs=0.05)
    assert cells["thermal_III", 3].exponent == pytest.approx(-0.25, abs=0.05)
    bounded = cells["thermal_II", 3]
    assert bounded.bounded and abs(bounded.exponent) <= 0.05
    assert all(c.matches for c in cells.values())


def test_table_window_must_span_three_decades():
    with pytest.raises(ValueError):
        table1(UNIT, t_window=(1e2, 1e4))
