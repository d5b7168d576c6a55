"""Radial quadrature for kernel and solution norms.

All norms reduce to (angular constant) x (integral over r), by Plancherel and
polar coordinates.  The engine uses 8-point Gauss-Legendre on uniform panels no
wider than a quarter oscillation, doubling the panel count until two successive
sums agree.  Long undamped windows, where that would take millions of panels,
are split: the part near r = 0 still uses panels and the rest is integrated
term by term against cos/sin weights with QUADPACK's Fourier-integral rule.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from . import _backend
from .kernels import Angular, KernelId, kernel_radial, kernel_spec
from .roots import roots_array
from .solution import Model, Target, solution_arrays, type2_modes

ORDER = 8
NODES, WEIGHTS = np.polynomial.legendre.leggauss(ORDER)
MIN_PANELS = 16
MAX_PANELS = 2_000_000
# beyond this many panels an undamped integrand switches to the split scheme
GAUSS_BUDGET = 200_000
CHUNK_PANELS = 1 << 14
REL_TOL = 1e-7
ABS_TOL = 1e-12
# exponential factors below e^-TAIL_LOG are dropped when truncating a window
TAIL_LOG = 40.0
# the split scheme keeps panels on [r_lo, SPLIT_PHASE / (nu_min t)]
SPLIT_PHASE = 60.0
GRADE_RATIO = 32.0


class QuadratureError(ArithmeticError):
    pass


class DivergentIntegralError(ValueError):
    pass


WINDOW_LABELS = ("small", "bounded", "large", "custom")


@dataclass(frozen=True)
class RadialWindow:
    r_lo: float
    r_hi: float
    label: str = "custom"
    # bound on what was cut off when an unbounded window was truncated at r_hi
    tail_bound: float = None

    def __post_init__(self):
        lo, hi = float(self.r_lo), float(self.r_hi)
        if not (0 <= lo < hi) or not math.isfinite(hi):
            raise ValueError(f"need 0 <= r_lo < r_hi < inf, got [{self.r_lo}, {self.r_hi}]")
        if self.label not in WINDOW_LABELS:
            raise ValueError(f"unknown window label {self.label!r}")
        object.__setattr__(self, "r_lo", lo)
        object.__setattr__(self, "r_hi", hi)

    @classmethod
    def small(cls, eps0=0.1):
        return cls(0.0, eps0, "small")

    @classmethod
    def bounded(cls, eps0=0.1, N0=10.0):
        return cls(eps0, N0, "bounded")

    @classmethod
    def large(cls, N0, r_max, tail_bound=None):
        return cls(N0, r_max, "large", tail_bound)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    est_error: float
    panels: int
    # upper end actually integrated when a decaying tail was cut off
    r_cut: float = None


def sphere_measure(n):
    """Surface measure of the unit sphere S^{n-1} in R^n."""
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")
    return math.exp(math.log(2.0) + 0.5 * n * math.log(math.pi) - gammaln(0.5 * n))


def angular_constant(angular, n):
    """|S^{n-1}| for scalar symbols, |S^{n-1}|/n per component for i xi/|xi|^2 symbols."""
    s = sphere_measure(n)
    return s / n if Angular(angular) == Angular.VECTOR else s


# ---------------------------------------------------------------- engine


def _uniform_gauss(panel_fn, lo, hi, hint, rel_tol, abs_tol, max_panels):
    width = hi - lo
    n = MIN_PANELS
    if hint > 0:
        n = max(n, math.ceil(width * 4.0 * hint / math.pi))
    if 2 * n > max_panels:
        raise QuadratureError(f"[{lo:.6g}, {hi:.6g}] with oscillation {hint:.6g} needs more than "
                              f"{max_panels} panels")
    prev = panel_fn(lo, width / n, n)
    while True:
        m = 2 * n
        cur = panel_fn(lo, width / m, m)
        err = abs(cur - prev)
        if err <= rel_tol * abs(cur) + abs_tol:
            return cur, err, m
        if 2 * m > max_panels:
            raise QuadratureError(f"no convergence on [{lo:.6g}, {hi:.6g}] within {max_panels} panels "
                                  f"(last change {err:.3e}, value {cur:.6e})")
        prev, n = cur, m


def _pieces(lo, hi):
    """Geometric pieces [lo, 2lo], [2lo, 4lo], ... when lo > 0 and hi/lo is large."""
    if lo <= 0 or hi / lo <= GRADE_RATIO:
        return [(lo, hi)]
    edges = [lo]
    while edges[-1] * 2.0 < hi:
        edges.append(edges[-1] * 2.0)
    edges[-1] = hi
    return list(zip(edges[:-1], edges[1:]))


def _gauss(panel_fn, lo, hi, hint, rel_tol, abs_tol, max_panels):
    pieces = _pieces(lo, hi)
    tol = abs_tol / len(pieces)
    vals, errs, panels = [], [], 0
    for a, b in pieces:
        v, e, p = _uniform_gauss(panel_fn, a, b, hint, rel_tol, tol, max_panels - panels)
        vals.append(v)
        errs.append(e)
        panels += p
    return math.fsum(vals), math.fsum(errs), panels


def _callable_panels(f):
    def panel_fn(lo, width, npan):
        half = 0.5 * width
        offs = half * (NODES + 1.0)
        parts = []
        for start in range(0, npan, CHUNK_PANELS):
            stop = min(npan, start + CHUNK_PANELS)
            r = (lo + width * np.arange(start, stop, dtype=float))[:, None] + offs[None, :]
            vals = np.asarray(f(r.ravel()), dtype=float).reshape(r.shape)
            parts.append(float(np.sum(vals @ WEIGHTS)))
        return math.fsum(parts) * half
    return panel_fn


def integrate_radial(f, window, t, osc_freq_hint, rel_tol=REL_TOL, abs_tol=ABS_TOL,
                     max_panels=MAX_PANELS):
    """Integrate a vectorized f(r) over the window.

    osc_freq_hint is the largest angular frequency in r (max beta * t); panels are
    kept below a quarter period of it.  Nodes are interior, so r = 0 is never sampled.
    """
    if t < 0:
        raise ValueError("time must be >= 0")
    value, err, panels = _gauss(_callable_panels(f), window.r_lo, window.r_hi,
                                abs(osc_freq_hint), rel_tol, abs_tol, max_panels)
    return QuadratureResult(value, err, panels)


# ------------------------------------------------ oscillatory-weight scheme


def _frequency_groups(omegas):
    """Ordered mode/sign pairs grouped by the frequency of their product."""
    groups = {}
    keys = {}
    for m, wm in enumerate(omegas):
        for s in (1, -1):
            for k, wk in enumerate(omegas):
                for q in (1, -1):
                    om = s * wm - q * wk
                    if om < 0:
                        continue
                    key = round(om, 12)
                    match = next((x for x in keys if abs(x - key) <= 1e-12 * (1 + abs(key))), None)
                    if match is None:
                        keys[key] = om
                        match = key
                    groups.setdefault(match, []).append((m, s, k, q))
    return [(keys[k], v) for k, v in sorted(groups.items())]


def _quad(f, lo, hi, **kw):
    # QUADPACK warns when roundoff stops it short of a very strict absolute
    # tolerance; the returned error bound is checked by the caller instead
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(f, lo, hi, **kw)


def trig_square_integral(modes, t, lo, hi, weight, rel_tol=REL_TOL, abs_tol=ABS_TOL):
    """Integral over [lo, hi] of weight(r) |sum_m P_m cos(w_m r t) + Q_m sin(w_m r t)|^2.

    modes is a list of (w_m, amp_m) with amp_m(r) -> (P_m, Q_m), smooth in r.
    Writing each mode as C+ e^{i w r t} + C- e^{-i w r t} turns the square into a
    sum over difference frequencies; every term is a smooth function times cos or
    sin of a fixed frequency, which QUADPACK integrates with modified moments.
    Returns (value, error estimate, number of integrand evaluations).
    """
    omegas = [float(w) for w, _ in modes]
    groups = _frequency_groups(omegas)
    evals = [0]

    def coefficients(r):
        evals[0] += 1
        out = []
        for _, amp in modes:
            P, Q = amp(np.array([r]))
            P, Q = complex(np.asarray(P).ravel()[0]), complex(np.asarray(Q).ravel()[0])
            out.append({1: 0.5 * (P - 1j * Q), -1: 0.5 * (P + 1j * Q)})
        return out

    def density(pairs, part):
        def g(r):
            c = coefficients(r)
            w = sum(c[m][s] * c[k][q].conjugate() for m, s, k, q in pairs)
            return float(weight(r)) * (w.real if part == "re" else w.imag)
        return g

    total, err = [], []
    # amplitudes may vary over decades near lo; graded pieces keep each one smooth
    pieces = _pieces(lo, hi) if lo > 0 else [(lo, hi)]
    n_terms = 2 * len(groups) * len(pieces)
    opts = dict(epsabs=abs_tol / n_terms, epsrel=rel_tol, limit=2000)
    for a, b in pieces:
        for om, pairs in groups:
            if om == 0:
                v, e = _quad(density(pairs, "re"), a, b, **opts)
                total.append(v)
                err.append(e)
                continue
            # pairs with negative frequency are conjugates of these, hence the factor 2
            wv = om * t
            v1, e1 = _quad(density(pairs, "re"), a, b, weight="cos", wvar=wv, maxp1=200, **opts)
            v2, e2 = _quad(density(pairs, "im"), a, b, weight="sin", wvar=wv, maxp1=200, **opts)
            total.append(2.0 * (v1 - v2))
            err.append(2.0 * (e1 + e2))
    value, error = math.fsum(total), math.fsum(err)
    if not error <= 100.0 * (rel_tol * abs(value) + abs_tol):
        raise QuadratureError(f"oscillatory-weight integration on [{lo:.6g}, {hi:.6g}] reached only "
                              f"{error:.3e} for value {value:.6e}")
    return value, error, evals[0]


def _split_integral(f, modes, weight, lo, hi, t, hint, nu_min, rel_tol, abs_tol, max_panels):
    """Panels near r = 0, trigonometric moments beyond SPLIT_PHASE / (nu_min t)."""
    split = min(hi, max(lo, SPLIT_PHASE / (nu_min * t)))
    value, err, panels = 0.0, 0.0, 0
    if split > lo:
        value, err, panels = _gauss(_callable_panels(f), lo, split, hint, rel_tol, abs_tol / 2, max_panels)
    if hi > split:
        v, e, _ = trig_square_integral(modes, t, split, hi, weight, rel_tol, abs_tol / 2)
        value += v
        err += e
    return value, err, panels


def _needs_split(lo, hi, hint):
    return (hi - lo) * 4.0 * hint / math.pi > GAUSS_BUDGET


# ------------------------------------------------------------- kernels


def _decay_cut(spec, t):
    """r beyond which every nonzero wave carries e^{-2 c r^2 t} < e^{-TAIL_LOG}, or None."""
    cs = [c for l, c in ((spec.l1, spec.c1), (spec.l2, spec.c2)) if l != 0]
    c = min(cs) if cs else 0.0
    if c <= 0 or t <= 0:
        return None
    return math.sqrt(TAIL_LOG / (2.0 * c * t))


def _kernel_modes(spec, t, power, extra=None):
    """Double kernel as two sine modes (amplitudes include e^{-c r^2 t} and r^-sigma)."""
    def mode(l, beta, c, sign):
        def amp(r):
            q = sign * l * np.exp(-c * r * r * t) / (beta * r ** (1.0 + spec.sigma))
            return np.zeros_like(q), q
        return (beta, amp)
    modes = [mode(spec.l1, spec.beta1, spec.c1, 1.0), mode(spec.l2, spec.beta2, spec.c2, -1.0)]

    def weight(r):
        w = r ** power
        return w * extra(r) if extra is not None else w
    return modes, weight


def kernel_square_integral(spec, t, window, n, rel_tol=REL_TOL, abs_tol=ABS_TOL,
                           max_panels=MAX_PANELS, gaussian_weight=False):
    """Integral over the window of kernel(r)^2 r^(n-1), kernel including r^-sigma.

    gaussian_weight multiplies the integrand by e^{-2 r^2} (the squared e^{-|xi|^2}
    weight of the localized spaces).
    """
    if t == 0:
        return QuadratureResult(0.0, 0.0, 0)
    lo, hi = window.r_lo, window.r_hi
    cut = _decay_cut(spec, t)
    if gaussian_weight:
        gcut = math.sqrt(TAIL_LOG / 2.0)
        cut = gcut if cut is None else min(cut, gcut)
    r_cut = None
    if cut is not None and cut < hi:
        hi = r_cut = max(cut, lo)
    if hi <= lo:
        return QuadratureResult(0.0, 0.0, 0, r_cut)
    hint = max(spec.beta1, spec.beta2) * t
    power = n - 1 - 2 * spec.sigma
    args = spec.args()
    if not gaussian_weight and not _needs_split(lo, hi, hint):
        def panel_fn(a, width, npan):
            return _backend.panel_sum(a, width, npan, t, *args, power, NODES, WEIGHTS)
        v, e, p = _gauss(panel_fn, lo, hi, hint, rel_tol, abs_tol, max_panels)
        return QuadratureResult(v, e, p, r_cut)

    extra = (lambda r: np.exp(-2.0 * r * r)) if gaussian_weight else None

    def f(r):
        k = _backend.kernel_values(r, t, *args, 0.0)
        v = k * k * r ** power
        return v * extra(r) if extra is not None else v

    if not _needs_split(lo, hi, hint):
        v, e, p = _gauss(_callable_panels(f), lo, hi, hint, rel_tol, abs_tol, max_panels)
        return QuadratureResult(v, e, p, r_cut)
    modes, weight = _kernel_modes(spec, t, n - 1, extra)
    v, e, p = _split_integral(f, modes, weight, lo, hi, t, hint, min(spec.beta1, spec.beta2),
                              rel_tol, abs_tol, max_panels)
    return QuadratureResult(v, e, p, r_cut)


def I_of_t(spec, n, t, eps0=0.1, rel_tol=REL_TOL, abs_tol=ABS_TOL, max_panels=MAX_PANELS):
    """Integral over [0, eps0] of |double kernel|^2 r^(n-1-2 sigma)."""
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n!r}")
    if t < 0:
        raise ValueError("time must be >= 0")
    if n < 1 + 2 * spec.sigma and not spec.cancels:
        raise DivergentIntegralError(
            f"the integral diverges at r = 0 for n={n} < 1 + 2 sigma with l1 != l2; "
            "use blowup_probe to measure the divergence over [eps1, eps0]")
    return kernel_square_integral(spec, t, RadialWindow.small(eps0), n, rel_tol, abs_tol, max_panels)


def kernel_l2_norm(kid, dp, n, t, window, rel_tol=REL_TOL, abs_tol=ABS_TOL,
                   max_panels=MAX_PANELS, gaussian_weight=False):
    """L^2 norm of a kernel restricted to a radial window (per component for G1/G3)."""
    if isinstance(kid, str):
        kid = KernelId(kid)
    ang = angular_constant(kid.angular, n)
    if kid.name == "G0":
        def f(r):
            k = kernel_radial(kid, dp, t, r)
            v = k * k * r ** (n - 1)
            return v * np.exp(-2.0 * r * r) if gaussian_weight else v
        res = integrate_radial(f, window, t, dp.nu1 * t, rel_tol, abs_tol, max_panels)
    else:
        res = kernel_square_integral(kernel_spec(kid, dp), t, window, n, rel_tol, abs_tol,
                                     max_panels, gaussian_weight)
    return _as_norm(res, ang)


def _as_norm(res, ang):
    sq = ang * res.value
    norm = math.sqrt(max(sq, 0.0))
    err = ang * res.est_error / (2.0 * norm) if norm > 0 else math.sqrt(ang * res.est_error)
    return QuadratureResult(norm, err, res.panels, res.r_cut)


# ------------------------------------------------------------- windows


def window_preset(kind, n, t, dp, mu6=0.05, rho1=2.0, abs_tol=ABS_TOL):
    """Frequency windows of the localized spaces L^2_{chi,1} and L^2_{chi,2}.

    The half-line window used at n = 2 is truncated where e^{-2 r^2} < abs_tol,
    since norms in these spaces carry the weight e^{-|xi|^2}.
    """
    if not mu6 > 0 or dp.nu1 * mu6 > 0.1:
        raise ValueError(f"mu6 must satisfy 0 < max(nu1, nu2) mu6 <= 0.1, got mu6={mu6}")
    lo_rho, hi_rho = 3 * math.pi / (4 * dp.nu1), 3 * math.pi / (4 * dp.nu2)
    if not lo_rho < rho1 < hi_rho:
        raise ValueError(f"rho1 must satisfy {lo_rho:.6g} < rho1 < {hi_rho:.6g}, got {rho1}")
    if not t > 0:
        raise ValueError("window presets need t > 0")
    table = {
        "chi_c1": {1: "near", 3: "near", 2: "half", 4: "band"},
        "chi_c2": {1: "near", 2: "band"},
    }
    if kind not in table:
        raise ValueError(f"unknown window kind {kind!r}; expected chi_c1 or chi_c2")
    shape = table[kind].get(n)
    if shape is None:
        raise ValueError(f"{kind} is defined for n in {sorted(table[kind])}, got n={n}")
    if shape == "near":
        return RadialWindow(0.0, mu6 / t)
    if shape == "band":
        if t <= 1:
            raise ValueError("the window [1/t, 1/sqrt(t)] needs t > 1")
        return RadialWindow(1.0 / t, 1.0 / math.sqrt(t))
    r_trunc = math.sqrt(math.log(1.0 / abs_tol) / 2.0)
    if rho1 / t >= r_trunc:
        raise ValueError("t too small for the half-line window")
    return RadialWindow(rho1 / t, r_trunc, "custom", tail_bound=abs_tol)


# ------------------------------------------------------------- solutions


@dataclass(frozen=True)
class DataProfile:
    """Radial Fourier data: u0_hat = i xi g0(r), u1_hat = i xi g1(r), theta hats h0(r), h1(r).

    Any of the four may be None (zero).  mean_theta1 is the mean of theta_1, i.e.
    h1(0); tail_radius bounds the r beyond which all hats are below e^{-TAIL_LOG/2}.
    """
    g0: object = None
    g1: object = None
    h0: object = None
    h1: object = None
    mean_theta1: float = 0.0
    tail_radius: float = math.inf

    def amplitudes(self, r):
        """(a0, a1, th0, th1) along i*xi_dir; u_hat = i xi g(r) has amplitude r g(r)."""
        r = np.asarray(r, dtype=float)
        z = np.zeros_like(r)
        pick = lambda fn: z if fn is None else np.asarray(fn(r), dtype=complex)
        return r * pick(self.g0), r * pick(self.g1), pick(self.h0), pick(self.h1)

    @property
    def is_zero(self):
        return all(x is None for x in (self.g0, self.g1, self.h0, self.h1))


def gaussian_profile(n, amplitude=1.0):
    """theta_1(x) = amplitude e^{-|x|^2}, other data zero.

    Its transform is amplitude pi^{n/2} e^{-r^2/4}, so the mean is amplitude pi^{n/2}.
    """
    scale = amplitude * math.pi ** (0.5 * n)
    return DataProfile(h1=lambda r: scale * np.exp(-0.25 * np.asarray(r) ** 2),
                       mean_theta1=scale, tail_radius=math.sqrt(2.0 * TAIL_LOG))


PROFILE_OF = {(Model.TYPE_III, Target.U): "G1", (Model.TYPE_III, Target.THETA): "G2",
              (Model.TYPE_II, Target.U): "G3", (Model.TYPE_II, Target.THETA): "G4"}


def decay_radius(params, t, r_hi, grid=400):
    """Smallest r on a log grid beyond which every mode has 2 t |Re lam| >= TAIL_LOG.

    Returns r_hi when no such point exists below r_hi (or for delta = 0).
    """
    if params.delta == 0 or t <= 0:
        return r_hi
    rs = np.geomspace(1e-6, max(r_hi, 2e-6), grid)
    lam, _ = roots_array(params, rs)
    rate = -np.max(lam.real, axis=1)
    ok = 2.0 * t * rate >= TAIL_LOG
    # suffix test: every grid point from index i on is fine
    suffix = np.flip(np.logical_and.accumulate(np.flip(ok)))
    idx = np.argmax(suffix) if suffix.any() else None
    if idx is None:
        return r_hi
    # step back one grid cell so the cut sits below the first good point
    return float(min(r_hi, rs[max(idx - 1, 0)]))


def solution_l2_norm(params, dp, data_profile, model, target, t, window, n, minus_profile=False,
                     gaussian_weight=False, rel_tol=REL_TOL, abs_tol=ABS_TOL, max_panels=MAX_PANELS):
    """L^2 norm over a radial window of the exact solution (or its distance to the profile).

    target U is measured as the full vector norm, so its angular constant is |S^{n-1}|.
    minus_profile subtracts the kernel profile times the mean of theta_1 (G1/G2 for
    type III, G3/G4 for type II).  gaussian_weight applies e^{-|xi|^2}.
    """
    model, target = Model(model), Target(target)
    if model == Model.TYPE_II and params.delta != 0:
        raise ValueError("the type II model requires delta = 0")
    if model == Model.TYPE_III and params.delta == 0:
        raise ValueError("the type III model requires delta > 0")
    ang = sphere_measure(n)
    if data_profile.is_zero or t < 0:
        if t < 0:
            raise ValueError("time must be >= 0")
        return QuadratureResult(0.0, 0.0, 0)
    lo = window.r_lo
    hi = min(window.r_hi, data_profile.tail_radius)
    if gaussian_weight:
        hi = min(hi, math.sqrt(TAIL_LOG / 2.0))
    if model == Model.TYPE_III:
        hi = min(hi, decay_radius(params, t, hi))
    r_cut = hi if hi < window.r_hi else None
    if hi <= lo:
        return QuadratureResult(0.0, 0.0, 0, r_cut)
    pid = PROFILE_OF[(model, target)]
    P = data_profile.mean_theta1

    def f(r):
        data = data_profile.amplitudes(r)
        v = solution_arrays(params, r, t, data, model, (target,))[target]
        if minus_profile:
            v = v - kernel_radial(pid, dp, t, r) * P
        out = np.abs(v) ** 2 * r ** (n - 1)
        return out * np.exp(-2.0 * r * r) if gaussian_weight else out

    hint = dp.nu1 * t
    if model == Model.TYPE_II and _needs_split(lo, hi, hint):
        spec = kernel_spec(pid, dp)

        def mode_amp(which):
            def amp(r):
                modes = type2_modes(params, dp, r, data_profile.amplitudes(r), target)
                _, A, B = modes[which]
                if minus_profile:
                    l = spec.l1 if which == 0 else -spec.l2
                    beta = spec.beta1 if which == 0 else spec.beta2
                    B = B - l * P / (beta * r ** (1.0 + spec.sigma))
                return A, B
            return amp

        modes = [(dp.nu1, mode_amp(0)), (dp.nu2, mode_amp(1))]

        def weight(r):
            w = r ** (n - 1)
            return w * math.exp(-2.0 * r * r) if gaussian_weight else w

        v, e, p = _split_integral(f, modes, weight, lo, hi, t, hint, dp.nu2, rel_tol, abs_tol, max_panels)
    else:
        v, e, p = _gauss(_callable_panels(f), lo, hi, hint, rel_tol, abs_tol, max_panels)
    return _as_norm(QuadratureResult(v, e, p, r_cut), ang)
