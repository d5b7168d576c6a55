"""Exact per-frequency solutions.

Curl-free displacement data are carried as a scalar amplitude a along i*xi_dir,
i.e. u_hat = i xi_dir a.  With that convention the Fourier symbols become
grad -> i xi_dir r, div(i xi_dir a) -> -r a and Lap -> -r^2.

Each unknown solves the same fourth-order ODE in t,

    v'''' + delta r^2 v''' + alpha1 r^2 v'' + b^2 delta r^4 v' + b^2 kappa r^4 v = 0,

whose initial data (v0..v3) come from reduce_data.
"""
import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .params import derive
from ._kernels_py import sinc as _sinc, sinc_difference
from .roots import RootSet, Zone, roots_array, ZONE_BY_CODE

EXP_FLOOR = -700.0
GAP_TOL = 1e-8
# below this max|lam|*t the exponential modes cancel to the size of (|lam| t)^3,
# so the divided-difference form is used instead of the Cramer coefficients
SMALL_PHASE = 1.0
# Cramer coefficients lose about eps/gap relative accuracy near coincident roots;
# evaluation switches to divided differences well before the hard GAP_TOL limit
FALLBACK_GAP = 1e-3


class Target(str, enum.Enum):
    U = "U"
    THETA = "Theta"


class Model(str, enum.Enum):
    TYPE_II = "TypeII"
    TYPE_III = "TypeIII"


class DegenerateRootsError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SpectralState:
    """Fourier data at one frequency xi = r * xi_dir.

    u0hat, u1hat are n-vectors; only their component along i*xi_dir enters the
    coupled dynamics, so they must be curl-free (parallel to i*xi_dir).
    """
    u0hat: tuple
    u1hat: tuple
    th0hat: complex
    th1hat: complex
    r: float
    xi_dir: tuple = (1.0,)

    @classmethod
    def curl_free(cls, a0, a1, th0, th1, r, xi_dir=(1.0,)):
        d = np.asarray(xi_dir, dtype=float)
        d = d / np.linalg.norm(d)
        return cls(tuple(1j * d * a0), tuple(1j * d * a1), complex(th0), complex(th1), float(r),
                   tuple(d))

    def amplitudes(self):
        d = np.asarray(self.xi_dir, dtype=float)
        d = d / np.linalg.norm(d)
        out = []
        for u in (self.u0hat, self.u1hat):
            u = np.asarray(u, dtype=complex)
            if u.shape != d.shape:
                raise ValueError("displacement data and xi_dir have different dimensions")
            a = -1j * np.dot(d, u)
            if np.linalg.norm(u - 1j * d * a) > 1e-12 * max(1.0, np.linalg.norm(u)):
                raise ValueError("displacement data are not curl-free (not parallel to i*xi_dir)")
            out.append(complex(a))
        return out[0], out[1], complex(self.th0hat), complex(self.th1hat)

    @property
    def size(self):
        """Aggregate |u0|+|u1|+|th0|+|th1| used by the pointwise templates."""
        a0, a1, t0, t1 = self.amplitudes()
        return abs(a0) + abs(a1) + abs(t0) + abs(t1)


@dataclass(frozen=True)
class FourthOrderData:
    v: tuple
    target: Target
    model: Model


@dataclass(frozen=True)
class ModeCoefficients:
    d: tuple


def _reduce(params, r, a0, a1, th0, th1, target, model):
    b2, k, g, dl = params.b ** 2, params.kappa, params.gamma, params.delta
    if model == Model.TYPE_II and dl != 0:
        raise ValueError("the type II reduction requires delta = 0")
    r2 = r * r
    if target == Target.U:
        v2 = -b2 * r2 * a0 - g * r * th0
        v3 = -b2 * r2 * a1 - g * r * th1
        return a0, a1, v2, v3
    kg = k + g * g
    v2 = -b2 * g * r2 * r * a0 - kg * r2 * th0 - dl * r2 * th1
    v3 = (b2 * dl * g * r2 * r2 * r * a0 - b2 * g * r2 * r * a1 + kg * dl * r2 * r2 * th0
          - kg * r2 * th1 + dl * dl * r2 * r2 * th1)
    return th0, th1, v2, v3


def reduce_data(params, state, target, model):
    """Fourth-order initial data (v0, v1, v2, v3) for the amplitude of u or for theta."""
    target, model = Target(target), Model(model)
    a0, a1, th0, th1 = state.amplitudes()
    v = _reduce(params, state.r, a0, a1, th0, th1, target, model)
    return FourthOrderData(tuple(complex(x) for x in v), target, model)


def _elementary(others):
    x, y, z = others
    return x + y + z, x * y + x * z + y * z, x * y * z


def cramer_coefficients(lam, v):
    """Mode coefficients d_j = det(V_j)/det(V) for arrays lam, v of shape (..., 4).

    Expanding det(V_j) along the replaced column gives
    d_j = (v3 - e1 v2 + e2 v1 - e3 v0) / prod_{m != j}(lam_j - lam_m)
    with e1..e3 the elementary symmetric functions of the other three roots.
    """
    lam = np.asarray(lam, dtype=complex)
    v = np.asarray(v, dtype=complex)
    d = np.empty(np.broadcast_shapes(lam.shape, v.shape), dtype=complex)
    for j in range(4):
        others = [lam[..., m] for m in range(4) if m != j]
        e1, e2, e3 = _elementary(others)
        num = v[..., 3] - e1 * v[..., 2] + e2 * v[..., 1] - e3 * v[..., 0]
        den = np.ones_like(lam[..., 0])
        for m in others:
            den = den * (lam[..., j] - m)
        d[..., j] = num / den
    return d


def vandermonde_determinant(lam):
    lam = np.asarray(lam, dtype=complex)
    det = np.ones_like(lam[..., 0])
    for j in range(4):
        for k in range(j + 1, 4):
            det = det * (lam[..., k] - lam[..., j])
    return det


def min_gap(lam):
    lam = np.asarray(lam, dtype=complex)
    gaps = [np.abs(lam[..., j] - lam[..., k]) for j in range(4) for k in range(j + 1, 4)]
    return np.min(np.stack(gaps, axis=-1), axis=-1)


def _check_gap(lam):
    scale = np.max(np.abs(lam), axis=-1)
    bad = ~(min_gap(lam) > GAP_TOL * scale)
    if np.any(bad):
        raise DegenerateRootsError(
            "roots are (nearly) coincident; use the divided-difference evaluation instead")


def vandermonde_solve(roots, data):
    """Coefficients of the four exponential modes from the Cramer determinants."""
    lam = roots.as_array() if isinstance(roots, RootSet) else np.asarray(roots, dtype=complex)
    v = np.asarray(data.v if isinstance(data, FourthOrderData) else data, dtype=complex)
    _check_gap(lam)
    return ModeCoefficients(tuple(complex(x) for x in cramer_coefficients(lam, v)))


def generic_coefficients(lam, v):
    """Same coefficients from a dense linear solve of the row-scaled Vandermonde system."""
    lam = np.asarray(lam, dtype=complex)
    v = np.asarray(v, dtype=complex)
    s = np.max(np.abs(lam), axis=-1, keepdims=True)
    s = np.where(s > 0, s, 1.0)
    mu = lam / s
    V = np.stack([mu ** k for k in range(4)], axis=-2)
    rhs = v / s ** np.arange(4)
    return np.linalg.solve(V, rhs[..., None])[..., 0]


def _pair_layout(zone_code):
    z = ZONE_BY_CODE[zone_code]
    if z in (Zone.TWO_CONJUGATE_PAIRS, Zone.TWO_IMAGINARY_PAIRS):
        return [(0, 1), (2, 3)], []
    if z == Zone.TWO_REAL_ONE_PAIR:
        return [(2, 3)], [0, 1]
    return [], [0, 1, 2, 3]


def _expo(x):
    return np.where(x < EXP_FLOOR, 0.0, np.exp(np.maximum(x, EXP_FLOOR)))


def modal_sum(lam, d, t, zone_code):
    """sum_j d_j exp(lam_j t) in the real cos/sin form, for arrays sharing one zone layout."""
    pairs, reals = _pair_layout(zone_code)
    lam = np.asarray(lam, dtype=complex)
    d = np.asarray(d, dtype=complex)
    out = np.zeros(np.broadcast_shapes(lam[..., 0].shape, d[..., 0].shape, np.shape(t)),
                   dtype=complex)
    for p, q in pairs:
        lr, li = lam[..., p].real, lam[..., p].imag
        plus, minus = d[..., p] + d[..., q], d[..., p] - d[..., q]
        out = out + _expo(lr * t) * (np.cos(li * t) * plus + 1j * np.sin(li * t) * minus)
    for j in reals:
        out = out + d[..., j] * _expo(lam[..., j].real * t)
    return out


def evaluate_type3(coeffs, roots, t, derivatives=0):
    """Value (and optionally time derivatives up to order 3) of the damped solution.

    Returns a complex scalar when derivatives == 0, else an array
    [v(t), v'(t), ..., v^(derivatives)(t)].
    """
    lam = roots.as_array()
    d = np.asarray(coeffs.d, dtype=complex)
    code = ZONE_BY_CODE.index(roots.zone)
    vals = [complex(modal_sum(lam, d * lam ** m, t, code)) for m in range(derivatives + 1)]
    return vals[0] if derivatives == 0 else np.array(vals)


def _shift_matrices(lam):
    N = lam.shape[0]
    J = np.zeros((N, 4, 4), dtype=complex)
    idx = np.arange(4)
    J[:, idx, idx] = lam
    J[:, idx[1:], idx[:-1]] = 1.0
    return J


def divided_difference_solution(lam, v, t, derivatives=0):
    """Evaluate the ODE solution through divided differences of exp(lam t).

    With J the bidiagonal matrix carrying the roots on its diagonal, the first
    column of f(J) lists the divided differences f[lam_1..lam_k].  The Newton
    coefficients follow from a unit lower-triangular system, so nothing divides
    by root gaps and coincident roots are handled exactly.
    lam, v have shape (N, 4); t is a scalar.  Returns shape (derivatives+1, N).
    """
    lam = np.atleast_2d(np.asarray(lam, dtype=complex))
    v = np.atleast_2d(np.asarray(v, dtype=complex))
    J = _shift_matrices(lam)
    cols = [np.zeros((lam.shape[0], 4), dtype=complex)]
    cols[0][:, 0] = 1.0
    for _ in range(3):
        cols.append(np.einsum("nij,nj->ni", J, cols[-1]))
    L = np.stack(cols, axis=1)  # L[n, m, k] = (lam^m)[lam_1..lam_{k+1}]
    c = np.zeros_like(v)
    for m in range(4):
        c[:, m] = v[:, m] - np.einsum("nk,nk->n", L[:, m, :m], c[:, :m])
    M = expm(t * J) if t > 0 else np.broadcast_to(np.eye(4, dtype=complex), J.shape)
    first = M[:, :, 0]
    out = []
    for m in range(derivatives + 1):
        out.append(np.einsum("nk,nk->n", c, first))
        first = np.einsum("nij,nj->ni", J, first)
    return np.array(out)


def _type3_arrays(params, r, t, data, targets):
    lam, zone = roots_array(params, r)
    out = {}
    scale = np.max(np.abs(lam), axis=1)
    fallback = (zone == ZONE_BY_CODE.index(Zone.DEGENERATE)) | (scale * t < SMALL_PHASE)
    live = ~fallback
    if np.any(live):
        fallback[live] = ~(min_gap(lam[live]) > FALLBACK_GAP * scale[live])
    for target in targets:
        v = np.stack(_reduce(params, r, *data, target, Model.TYPE_III), axis=1).astype(complex)
        val = np.zeros(r.shape, dtype=complex)
        fast = ~fallback
        for code in np.unique(zone[fast]):
            sel = fast & (zone == code)
            d = cramer_coefficients(lam[sel], v[sel])
            val[sel] = modal_sum(lam[sel], d, t, code)
        if np.any(fallback):
            val[fallback] = divided_difference_solution(lam[fallback], v[fallback], t)[0]
        out[target] = val
    return out


def _type2_arrays(params, dp, r, t, data, targets):
    a0, a1, th0, th1 = data
    nu1, nu2, a2 = dp.nu1, dp.nu2, dp.alpha2
    x1, x2 = nu1 * r * t, nu2 * r * t
    c1, c2 = np.cos(x1), np.cos(x2)
    s1, s2 = t * _sinc(x1), t * _sinc(x2)
    # (cos x1 - cos x2)/r and (S1 - S2)/r, both finite at r = 0
    dcos_r = -(nu1 - nu2) * t * np.sin(0.5 * (x1 + x2)) * _sinc(0.5 * (x1 - x2))
    dsin_r = np.where(r > 0, t * sinc_difference(x1, x2) / np.where(r > 0, r, 1.0), 0.0)
    g, b2 = params.gamma, params.b ** 2
    out = {}
    if Target.U in targets:
        p1, p2 = nu2 ** 2 - b2, nu1 ** 2 - b2
        out[Target.U] = -((p1 * c1 - p2 * c2) * a0 + (p1 * s1 - p2 * s2) * a1
                          - g * dcos_r * th0 - g * dsin_r * th1) / a2
    if Target.THETA in targets:
        kg = params.kappa + g * g
        q1, q2 = nu2 ** 2 - kg, nu1 ** 2 - kg
        rr = r * r
        out[Target.THETA] = -((q1 * c1 - q2 * c2) * th0 + (q1 * s1 - q2 * s2) * th1
                              - b2 * g * rr * dcos_r * a0 - b2 * g * rr * dsin_r * a1) / a2
    return out


def solution_arrays(params, r, t, data, model, targets=(Target.U, Target.THETA)):
    """Vectorized solution amplitudes over an array of r at one time t.

    data = (a0, a1, th0, th1), each broadcastable against r.  Returns a dict keyed
    by Target with complex arrays (the U entry is the amplitude along i*xi_dir).
    """
    model = Model(model)
    targets = tuple(Target(x) for x in targets)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    data = tuple(np.broadcast_to(np.asarray(x, dtype=complex), r.shape) for x in data)
    if model == Model.TYPE_II and params.delta != 0:
        raise ValueError("the type II model requires delta = 0")
    if params.delta == 0:
        # the damped formulas reduce to the closed form exactly at delta = 0
        return _type2_arrays(params, derive(params), r, float(t), data, targets)
    return _type3_arrays(params, r, float(t), data, targets)


def evaluate_type2(params, dp, state, t):
    """Closed-form undamped solution (u_hat vector, theta_hat) at time t."""
    if params.delta != 0:
        raise ValueError("the closed form applies to delta = 0 only")
    a0, a1, th0, th1 = state.amplitudes()
    res = _type2_arrays(params, dp, np.array([state.r]), float(t),
                        tuple(np.array([x]) for x in (a0, a1, th0, th1)), (Target.U, Target.THETA))
    d = np.asarray(state.xi_dir, dtype=float)
    d = d / np.linalg.norm(d)
    return 1j * d * complex(res[Target.U][0]), complex(res[Target.THETA][0])


def solution_magnitudes(params, dp, state, model, t):
    """(|u_hat|, |theta_hat|) at one frequency and time."""
    a0, a1, th0, th1 = state.amplitudes()
    res = solution_arrays(params, np.array([state.r]), t,
                          (a0, a1, th0, th1), model)
    return abs(res[Target.U][0]), abs(res[Target.THETA][0])


def type2_modes(params, dp, r, data, target):
    """Undamped solution split into t-independent trigonometric modes.

    Returns ((nu1, A1, B1), (nu2, A2, B2)) with
        v(t, r) = A1 cos(nu1 r t) + B1 sin(nu1 r t) + A2 cos(nu2 r t) + B2 sin(nu2 r t).
    The amplitudes carry 1/r and 1/r^2 factors that cancel between the modes as
    r -> 0, so this form is meant for r t well away from zero.
    """
    if params.delta != 0:
        raise ValueError("the trigonometric mode split applies to delta = 0 only")
    r = np.asarray(r, dtype=float)
    a0, a1, th0, th1 = (np.asarray(x, dtype=complex) for x in data)
    nu1, nu2, a2 = dp.nu1, dp.nu2, dp.alpha2
    g, b2 = params.gamma, params.b ** 2
    target = Target(target)
    if target == Target.U:
        p1, p2 = nu2 ** 2 - b2, nu1 ** 2 - b2
        A1 = -(p1 * a0 - g * th0 / r) / a2
        A2 = -(-p2 * a0 + g * th0 / r) / a2
        B1 = -(p1 * a1 / (nu1 * r) - g * th1 / (nu1 * r * r)) / a2
        B2 = -(-p2 * a1 / (nu2 * r) + g * th1 / (nu2 * r * r)) / a2
    else:
        kg = params.kappa + g * g
        q1, q2 = nu2 ** 2 - kg, nu1 ** 2 - kg
        A1 = -(q1 * th0 - b2 * g * r * a0) / a2
        A2 = -(-q2 * th0 + b2 * g * r * a0) / a2
        B1 = -(q1 * th1 / (nu1 * r) - b2 * g * a1 / nu1) / a2
        B2 = -(-q2 * th1 / (nu2 * r) + b2 * g * a1 / nu2) / a2
    return (nu1, A1, B1), (nu2, A2, B2)
