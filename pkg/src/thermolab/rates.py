"""Reference rates, rate fitting and the large-time experiments built on them."""
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .kernels import DoubleKernelSpec, kernel_radial, kernel_spec, undamped
from .params import derive
from .quadrature import (ABS_TOL, REL_TOL, DataProfile, I_of_t, RadialWindow, angular_constant,
                         kernel_square_integral, solution_l2_norm, window_preset)
from .roots import roots_array
from .solution import Model, Target, solution_arrays

# ---------------------------------------------------------- reference rates


@dataclass(frozen=True)
class ReferenceRate:
    family: str
    n: int

    def __post_init__(self):
        if self.family not in ("D", "E"):
            raise ValueError(f"rate family must be 'D' or 'E', got {self.family!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.n!r}")


def reference_rate(rate, t):
    """D_n(1+t) (displacement) or E_n(1+t) (temperature) at time t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be >= 0")
    n, s = rate.n, 1.0 + t
    log_part = np.sqrt(np.log(np.e + t))
    if rate.family == "D":
        if n in (1, 3):
            out = s ** (2 - n / 2)
        elif n in (2, 4):
            out = s ** (2 - n / 2) * log_part
        else:
            out = s ** (1 - n / 4)
    else:
        if n == 1:
            out = s ** 0.5
        elif n == 2:
            out = log_part
        else:
            out = s ** (0.5 - n / 4)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- fitting

LOG_FLAGS = ("none", "sqrt_log", "log")
MODEL_FLAG = {"power": "none", "power_sqrt_log": "sqrt_log", "power_log": "log"}
MODEL_LOG_POWER = {"power": 0.0, "power_sqrt_log": 0.5, "power_log": 1.0}


@dataclass(frozen=True)
class RateFit:
    exponent: float
    log_flag: str
    r_squared: float
    window: tuple
    intercept: float = 0.0
    model: str = "power"
    rss: float = 0.0
    # residual sum of squares of the plain power model, for model selection
    rss_power: float = 0.0


def _linear_fit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0 else 0.0)
    return float(coef[0]), float(coef[1]), rss, min(max(r2, 0.0), 1.0)


def _check_series(t, y, min_points=8, min_decades=2.0):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and values must be 1-d arrays of equal length")
    if t.size < min_points:
        raise ValueError(f"need at least {min_points} points, got {t.size}")
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise ValueError("rate fits need finite positive values")
    if np.any(t <= 1):
        raise ValueError("rate fits need t > 1 (the log factors use ln t)")
    if math.log10(t.max() / t.min()) < min_decades - 1e-9:
        raise ValueError(f"the series must span at least {min_decades} decades")
    return t, y


def fit_power(t, y, model="power"):
    """Least squares of log y - k log log t against log t, k = 0, 1/2, 1 by model."""
    k = MODEL_LOG_POWER[model]
    x = np.log(t)
    z = np.log(y) - k * np.log(np.log(t))
    slope, icpt, rss, r2 = _linear_fit(x, z)
    return slope, icpt, rss, r2


def fit_rate(t, values, model=None, improvement=2.0, min_decades=2.0):
    """Fit a power law, optionally with a sqrt-log factor.

    model None selects between power and power_sqrt_log: the log model wins when
    it lowers the residual sum of squares by at least the given factor.  An
    explicit model is fitted as asked.
    """
    t, y = _check_series(t, values, min_decades=min_decades)
    window = (float(t.min()), float(t.max()))
    p_slope, p_icpt, p_rss, p_r2 = fit_power(t, y, "power")
    if model is None:
        l_slope, l_icpt, l_rss, l_r2 = fit_power(t, y, "power_sqrt_log")
        if l_rss * improvement <= p_rss:
            return RateFit(l_slope, "sqrt_log", l_r2, window, l_icpt, "power_sqrt_log", l_rss, p_rss)
        return RateFit(p_slope, "none", p_r2, window, p_icpt, "power", p_rss, p_rss)
    if model not in MODEL_FLAG:
        raise ValueError(f"unknown model {model!r}; expected one of {sorted(MODEL_FLAG)}")
    slope, icpt, rss, r2 = fit_power(t, y, model)
    return RateFit(slope, MODEL_FLAG[model], r2, window, icpt, model, rss, p_rss)


def fit_log_linear(x, values):
    """values = a + b ln x; returns (b, a, r_squared)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(values, dtype=float)
    b, a, _, r2 = _linear_fit(np.log(x), y)
    return b, a, r2


def log_grid(t_min, t_max, points):
    if not 0 < t_min < t_max:
        raise ValueError("need 0 < t_min < t_max")
    return np.geomspace(t_min, t_max, int(points))


# ---------------------------------------------------------------- blow-up


def blowup_probe(spec, n, t_fixed, eps1_list, eps0=0.1, rel_tol=REL_TOL, abs_tol=ABS_TOL):
    """Divergence rate of the kernel integral over [eps1, eps0] as eps1 -> 0.

    n = 1: power fit of the partial integrals against eps1 (expected slope -1).
    n = 2: linear fit against ln(1/eps1); the exponent field then holds the
    coefficient of ln(1/eps1) and log_flag is 'log'.
    Returns (RateFit, partial integrals).
    """
    if n not in (1, 2):
        raise ValueError("blow-up probes are defined for n = 1 and n = 2")
    if spec.sigma != 1:
        raise ValueError("blow-up probes need sigma = 1")
    if spec.cancels:
        raise ValueError("l1 == l2 makes the integral converge; use I_of_t instead")
    eps1 = np.sort(np.asarray(eps1_list, dtype=float))
    if eps1.size < 8 or eps1[0] <= 0 or eps1[-1] >= eps0:
        raise ValueError("need at least 8 values of eps1 in (0, eps0)")
    vals = np.array([kernel_square_integral(spec, t_fixed, RadialWindow(e, eps0), n,
                                            rel_tol, abs_tol).value for e in eps1])
    window = (float(eps1[0]), float(eps1[-1]))
    if n == 1:
        slope, icpt, rss, r2 = _linear_fit(np.log(eps1), np.log(vals))
        return RateFit(slope, "none", r2, window, icpt, "power", rss, rss), vals
    slope, icpt, rss, r2 = _linear_fit(np.log(1.0 / eps1), vals)
    return RateFit(slope, "log", r2, window, icpt, "log_linear", rss, rss), vals


# ------------------------------------------------------------ integrals I


def i_of_t_series(spec, n, ts, eps0=0.1, rel_tol=REL_TOL, abs_tol=ABS_TOL, threads=1):
    """I(t; n) over an array of times."""
    def one(t):
        return I_of_t(spec, n, t, eps0, rel_tol, abs_tol).value
    return np.array(parallel_map(one, list(ts), threads))


def parallel_map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# -------------------------------------------------------- pointwise scans

POINTWISE_BOUNDS = ("small_zone", "large_zone", "bounded_zone")


@dataclass
class ScanReport:
    bound: str
    target: str
    sup_ratio: float
    c: float
    c_tilde: float
    argmax: tuple
    refined_sup: float
    stable: bool
    rhs_zeros: int = 0
    candidates: list = field(default_factory=list)


def _as_data(data, r):
    if isinstance(data, DataProfile):
        return data.amplitudes(r)
    return tuple(np.broadcast_to(np.asarray(x, dtype=complex), r.shape) for x in data)


def _scan_arrays(params, dp, data, target, bound, ts, rs):
    """LHS magnitudes and the template pieces on a (t, r) grid."""
    target = Target(target)
    data_r = _as_data(data, rs)
    a0, a1, th0, th1 = (np.abs(x) for x in data_r)
    size = a0 + a1 + th0 + th1
    lhs = np.empty((ts.size, rs.size))
    g0 = np.empty_like(lhs)
    for i, t in enumerate(ts):
        v = solution_arrays(params, rs, t, data_r, Model.TYPE_III, (target,))[target]
        if bound == "small_zone":
            kid = "G1" if target == Target.U else "G2"
            v = v - kernel_radial(kid, dp, t, rs) * data_r[3]
            g0[i] = np.abs(kernel_radial("G0", dp, t, rs))
        lhs[i] = np.abs(v)
    if bound == "large_zone":
        if target == Target.U:
            weight = a0 + a1 / rs + th0 / rs + th1 / rs ** 3
        else:
            weight = rs * a0 + a1 / rs + th0 + th1
    else:
        weight = size
    return lhs, g0, weight


def _template(bound, target, c, ct, T, R, g0, weight):
    if bound == "small_zone":
        if Target(target) == Target.U:
            core = (1.0 + R * T + np.abs(np.sin(ct * R * T)) / R) * np.exp(-c * R * R * T) + g0
        else:
            core = np.exp(-c * R * R * T)
        return core * weight
    return np.exp(-c * T) * weight


def _sup(lhs, rhs):
    tiny = 1e-300
    zero = (rhs <= tiny) & (lhs > tiny)
    ratio = np.where(rhs > tiny, lhs / np.where(rhs > tiny, rhs, 1.0), 0.0)
    idx = np.unravel_index(np.argmax(ratio), ratio.shape)
    return float(ratio[idx]), idx, int(zero.sum())


def pointwise_ratio_scan(params, dp, data, target, bound, t_range, r_range, points=(64, 64),
                         c_levels=6, ct_levels=7):
    """Sup over a (t, r) grid of |LHS| / template for the zone-wise pointwise bounds.

    small_zone: |v - G v1| against [(1 + r t + |sin(c~ r t)|/r) e^{-c r^2 t} + |G0|] Xi
    (theta uses e^{-c r^2 t} Xi); large_zone / bounded_zone: |v| against e^{-c t}
    times the zone's data weights.  c runs over c_max 2^-k and c~ over
    [nu2/2, nu1]; the reported pair is the largest c whose sup stays within a
    factor 2 of the smallest sup found.  The sup is then recomputed on a grid
    refined 2x in each direction; stable means it moved by less than 10%.
    """
    if bound not in POINTWISE_BOUNDS:
        raise ValueError(f"unknown bound {bound!r}; expected one of {POINTWISE_BOUNDS}")
    if params.delta <= 0:
        raise ValueError("pointwise scans are for the damped (type III) model")
    nt, nr = points
    ts = np.geomspace(t_range[0], t_range[1], nt)
    rs = np.geomspace(r_range[0], r_range[1], nr)
    if bound == "small_zone":
        c_max = min(dp.c1, dp.c2)
        cts = np.linspace(dp.nu2 / 2, dp.nu1, ct_levels)
    else:
        lam, _ = roots_array(params, np.geomspace(r_range[0], r_range[1], 200))
        c_max = float(np.min(-np.max(lam.real, axis=1)))
        cts = np.array([0.0])
    cs = c_max * 0.5 ** np.arange(c_levels)
    lhs, g0, weight = _scan_arrays(params, dp, data, target, bound, ts, rs)
    if not np.any(lhs > 0):
        return ScanReport(bound, Target(target).value, 0.0, float(cs[0]), float(cts[0]),
                          (float(ts[0]), float(rs[0])), 0.0, True)
    T, R = np.meshgrid(ts, rs, indexing="ij")
    W = np.broadcast_to(weight, T.shape)
    table = []
    for c in cs:
        for ct in cts:
            s, idx, zeros = _sup(lhs, _template(bound, target, c, ct, T, R, g0, W))
            table.append((float(c), float(ct), s, idx, zeros))
    best = min(x[2] for x in table)
    ok = [x for x in table if x[2] <= 2.0 * best]
    c, ct, s, idx, zeros = max(ok, key=lambda x: (x[0], -x[2]))
    ts2 = np.geomspace(t_range[0], t_range[1], 2 * nt)
    rs2 = np.geomspace(r_range[0], r_range[1], 2 * nr)
    lhs2, g02, weight2 = _scan_arrays(params, dp, data, target, bound, ts2, rs2)
    T2, R2 = np.meshgrid(ts2, rs2, indexing="ij")
    s2, _, zeros2 = _sup(lhs2, _template(bound, target, c, ct, T2, R2, g02,
                                         np.broadcast_to(weight2, T2.shape)))
    stable = abs(s2 - s) <= 0.1 * max(s, s2)
    return ScanReport(bound, Target(target).value, s, c, ct, (float(ts[idx[0]]), float(rs[idx[1]])),
                      s2, bool(stable), zeros + zeros2, [(x[0], x[1], x[2]) for x in table])


BASELINE_FILE = os.path.join(os.path.dirname(__file__), "baselines", "pointwise.json")


def scan_key(params, data, target, bound, t_range, r_range, points):
    """Stable text key of a scan configuration."""
    data = [float(abs(x)) for x in data]
    parts = [bound, Target(target).value, params.b, params.kappa, params.gamma, params.delta,
             *data, *t_range, *r_range, *points]
    return "|".join(p if isinstance(p, str) else "%.12g" % p for p in parts)


def compare_baseline(path, key, values, rel=0.1):
    """Compare numbers with a stored JSON baseline, storing them on first use.

    Returns ("stored" | "match" | "mismatch", baseline values).
    """
    data = {}
    if os.path.exists(path):
        with open(path) as fh:
            data = json.load(fh)
    if key not in data:
        data[key] = values
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
        return "stored", values
    base = data[key]
    for name, v in values.items():
        b = base.get(name)
        if b is None or abs(v - b) > rel * max(abs(b), 1e-300):
            return "mismatch", base
    return "match", base


# ------------------------------------------------------------ zone decay


@dataclass(frozen=True)
class DecayFit:
    r: float
    rate: float
    r_squared: float
    slowest_root: complex


def zone_decay_fit(params, r, t_range=(1.0, 50.0), data=(1.0, 1.0, 1.0, 1.0), samples=4000,
                   envelope_points=60):
    """Exponential decay of |u_hat| + |theta_hat| at a fixed frequency.

    The oscillation is removed with a running maximum over one period of the
    slowest-decaying mode; log of that envelope is fitted linearly in t.
    """
    if params.delta <= 0:
        raise ValueError("decay fits are for the damped (type III) model")
    lam, _ = roots_array(params, [r])
    lam = lam[0]
    slow = lam[np.argmax(lam.real)]
    t0, t1 = t_range
    period = 2 * math.pi / abs(slow.imag) if abs(slow.imag) > 0 else (t1 - t0) / 50.0
    ts = np.linspace(t0, t1 + period, samples)
    rr = np.array([float(r)])
    vals = np.empty(ts.size)
    for i, t in enumerate(ts):
        res = solution_arrays(params, rr, t, data, Model.TYPE_III)
        vals[i] = abs(res[Target.U][0]) + abs(res[Target.THETA][0])
    step = ts[1] - ts[0]
    width = max(1, int(math.ceil(period / step)))
    sample_t = np.linspace(t0, t1, envelope_points)
    env = np.empty(sample_t.size)
    for k, t in enumerate(sample_t):
        i0 = int(round((t - ts[0]) / step))
        env[k] = vals[i0:i0 + width + 1].max()
    slope, _, _, r2 = _linear_fit(sample_t, np.log(env))
    return DecayFit(float(r), slope, r2, complex(slow))


# ------------------------------------------------------ profile errors


@dataclass(frozen=True)
class TrendCheck:
    ratios: tuple
    times: tuple
    drop: float
    decreasing: bool
    passed: bool


def trend_check(ts, ratios, t_star=1e3, factor=5.0):
    """Vanishing-ratio test: decreasing for t >= t_star and a factor drop end to end."""
    ts = np.asarray(ts, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    tail = ratios[ts >= t_star]
    decreasing = bool(np.all(np.diff(tail) < 0))
    drop = float(ratios[0] / ratios[-1]) if ratios[-1] > 0 else math.inf
    return TrendCheck(tuple(ratios), tuple(ts), drop, decreasing, bool(decreasing and drop >= factor))


def profile_error_experiment(params, dp, data_profile, model, target, t_grid, n, eps0=0.1,
                             mu6=0.05, rho1=2.0, rel_tol=REL_TOL, abs_tol=ABS_TOL, threads=1):
    """(t, ||v - profile|| / reference rate) over t_grid.

    Type III uses the small window [0, eps0] and the plain L^2 norm; type II uses
    the localized windows chi_c1 (u) / chi_c2 (theta) with the e^{-|xi|^2} weight.
    """
    model, target = Model(model), Target(target)
    family = "D" if target == Target.U else "E"
    rate = ReferenceRate(family, n)

    def one(t):
        if model == Model.TYPE_III:
            window, weighted = RadialWindow.small(eps0), False
        else:
            kind = "chi_c1" if target == Target.U else "chi_c2"
            window, weighted = window_preset(kind, n, t, dp, mu6, rho1, abs_tol), True
        res = solution_l2_norm(params, dp, data_profile, model, target, t, window, n,
                               minus_profile=True, gaussian_weight=weighted,
                               rel_tol=rel_tol, abs_tol=abs_tol)
        return res.value / reference_rate(rate, t)
    ts = [float(t) for t in t_grid]
    return list(zip(ts, parallel_map(one, ts, threads)))


# --------------------------------------------------- optimal-rate table

TABLE_ROWS = ("transversal", "longitudinal_II", "longitudinal_III", "thermal_II", "thermal_III")
TABLE_DIMS = (1, 2, 3, 4, 5, 6)


def predicted_cell(row, n):
    """(exponent, log flag) predicted for a norm, or None for a bounded cell."""
    if row in ("transversal", "thermal_II"):
        return {1: (0.5, "none"), 2: (0.0, "sqrt_log")}.get(n)
    if row == "longitudinal_II":
        return {1: (1.5, "none"), 2: (1.0, "sqrt_log"), 3: (0.5, "none"), 4: (0.0, "sqrt_log")}.get(n)
    if row == "longitudinal_III":
        table = {1: (1.5, "none"), 2: (1.0, "sqrt_log"), 3: (0.5, "none"), 4: (0.0, "sqrt_log")}
        return table.get(n, (1.0 - n / 4.0, "none"))
    if row == "thermal_III":
        table = {1: (0.5, "none"), 2: (0.0, "sqrt_log"), 3: (-0.25, "none"), 4: (-0.5, "none")}
        return table.get(n, (0.5 - n / 4.0, "none"))
    raise ValueError(f"unknown row {row!r}")


def row_kernel(row, dp):
    """(DoubleKernelSpec, angular tag) of a row of the optimal-rate table."""
    if row == "transversal":
        return DoubleKernelSpec(1.0, 0.0, dp.b, dp.b, 0.0, 0.0, 0), "scalar"
    name = {"longitudinal_II": "G3", "longitudinal_III": "G1",
            "thermal_II": "G4", "thermal_III": "G2"}[row]
    return kernel_spec(name, dp), ("vector" if name in ("G1", "G3") else "scalar")


@dataclass
class TableCell:
    row: str
    n: int
    predicted: str
    exponent: float
    log_flag: str
    r_squared: float
    matches: bool
    bounded: bool
    eps0: float


def describe_prediction(pred):
    if pred is None:
        return "bounded"
    e, flag = pred
    return f"{e:g}" + ("+sqrt_log" if flag == "sqrt_log" else "")


# window sizes: undamped rows use the small zone, damped rows a unit window that
# the Gaussian truncation then shortens (see kernel_square_integral)
UNDAMPED_EPS0 = 0.1
DAMPED_EPS0 = 1.0
EXPONENT_TOL = 0.05


def table_cell(row, n, dp, ts, rel_tol=REL_TOL, abs_tol=ABS_TOL):
    spec, angular = row_kernel(row, dp)
    damped = row.endswith("_III")
    eps0 = DAMPED_EPS0 if damped else UNDAMPED_EPS0
    ang = angular_constant(angular, n)
    norms = np.array([math.sqrt(ang * kernel_square_integral(spec, t, RadialWindow.small(eps0), n,
                                                              rel_tol, abs_tol).value) for t in ts])
    pred = predicted_cell(row, n)
    fit = fit_rate(ts, norms)
    if pred is None:
        slope = fit_rate(ts, norms, model="power")
        return TableCell(row, n, "bounded", slope.exponent, fit.log_flag, slope.r_squared,
                         abs(slope.exponent) <= EXPONENT_TOL, True, eps0)
    e, flag = pred
    ok = fit.log_flag == flag and abs(fit.exponent - e) <= EXPONENT_TOL
    return TableCell(row, n, describe_prediction(pred), fit.exponent, fit.log_flag, fit.r_squared,
                     bool(ok), False, eps0)


def table1(params, dp=None, t_window=(1e2, 1e6), points=12, rows=TABLE_ROWS, dims=TABLE_DIMS,
           rel_tol=REL_TOL, abs_tol=ABS_TOL, threads=1):
    """Fit every (row, n) cell of the optimal-rate table from kernel norms."""
    if math.log10(t_window[1] / t_window[0]) < 3 - 1e-9:
        raise ValueError("the time window must span at least 3 decades")
    dp = dp or derive(params)
    if dp.delta == 0:
        raise ValueError("the damped rows need delta > 0")
    dp_ii = undamped(dp)
    ts = log_grid(t_window[0], t_window[1], points)
    cells = [(row, n) for row in rows for n in dims]

    def one(cell):
        row, n = cell
        use = dp_ii if row in ("transversal", "longitudinal_II", "thermal_II") else dp
        return table_cell(row, n, use, ts, rel_tol, abs_tol)
    return parallel_map(one, cells, threads)


def cell_as_dict(cell):
    return asdict(cell)
