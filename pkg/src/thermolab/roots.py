"""Characteristic roots of the per-frequency quartic

    P(lam) = lam^4 + delta r^2 lam^3 + (b^2+kappa+gamma^2) r^2 lam^2 + b^2 delta r^4 lam + b^2 kappa r^4

Roots are computed for the rescaled variable mu = lam / r, whose monic polynomial
has O(1) coefficients at small r, via companion-matrix eigenvalues and two Newton
polishing steps.
"""
import enum
from dataclasses import dataclass

import numpy as np

from .params import derive


class RootError(ArithmeticError):
    pass


class Zone(str, enum.Enum):
    TWO_CONJUGATE_PAIRS = "TwoConjugatePairs"
    TWO_REAL_ONE_PAIR = "TwoRealOnePair"
    TWO_IMAGINARY_PAIRS = "TwoImaginaryPairs"
    FOUR_REAL = "FourReal"
    DEGENERATE = "Degenerate"


ZONE_BY_CODE = [Zone.TWO_CONJUGATE_PAIRS, Zone.TWO_REAL_ONE_PAIR,
                Zone.TWO_IMAGINARY_PAIRS, Zone.FOUR_REAL, Zone.DEGENERATE]
_PAIRS, _ONE_PAIR, _IMAG, _FOUR_REAL, _DEGEN = range(5)

REAL_TOL = 1e-9
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class ZoneConfig:
    eps0: float = 0.1
    N0: float = 10.0

    def __post_init__(self):
        if not 0 < self.eps0 < self.N0:
            raise ValueError(f"need 0 < eps0 < N0, got eps0={self.eps0}, N0={self.N0}")


@dataclass(frozen=True)
class RootSet:
    """Four roots at one frequency, ordered by zone.

    TwoConjugatePairs / TwoImaginaryPairs: (p1, conj p1, p2, conj p2) with
    0 < Im p1 < Im p2, so the slow (nu2, c2) pair comes first.
    TwoRealOnePair: (lam1, lam2, p, conj p) with lam1 < lam2 < 0.
    """
    roots: tuple
    zone: Zone
    r: float

    def as_array(self):
        return np.array(self.roots, dtype=complex)

    @property
    def pairs(self):
        """(lam_R, lam_I) of each conjugate pair in storage order."""
        lam = self.as_array()
        if self.zone in (Zone.TWO_CONJUGATE_PAIRS, Zone.TWO_IMAGINARY_PAIRS):
            return [(lam[0].real, lam[0].imag), (lam[2].real, lam[2].imag)]
        if self.zone == Zone.TWO_REAL_ONE_PAIR:
            return [(lam[2].real, lam[2].imag)]
        return []

    @property
    def real_roots(self):
        lam = self.as_array()
        if self.zone == Zone.TWO_REAL_ONE_PAIR:
            return [lam[0].real, lam[1].real]
        if self.zone == Zone.FOUR_REAL:
            return list(lam.real)
        return []


def quartic_coefficients(params, r):
    r2 = r * r
    b2 = params.b ** 2
    alpha1 = b2 + params.kappa + params.gamma ** 2
    return (1.0, params.delta * r2, alpha1 * r2, b2 * params.delta * r2 * r2,
            b2 * params.kappa * r2 * r2)


def quartic_value(params, r, lam):
    a, b, c, d, e = quartic_coefficients(params, r)
    return (((a * lam + b) * lam + c) * lam + d) * lam + e


def residual_scale(params, r, lam):
    coeffs = quartic_coefficients(params, r)
    return max(abs(x) for x in coeffs) * np.maximum(1.0, np.abs(lam)) ** 4


def _scaled_coeffs(params, r):
    b2 = params.b ** 2
    alpha1 = b2 + params.kappa + params.gamma ** 2
    d = params.delta
    ones = np.ones_like(r)
    return d * r, alpha1 * ones, b2 * d * r, b2 * params.kappa * ones


def _polish(mu, A, B, C, D, steps=2):
    for _ in range(steps):
        q = (((mu + A) * mu + B) * mu + C) * mu + D
        dq = ((4.0 * mu + 3.0 * A) * mu + 2.0 * B) * mu + C
        # near a multiple root Newton moves one member of the cluster but not the
        # others, which spoils the symmetric eigenvalue split; leave those alone
        ok = np.abs(dq) > 1e-6 * (1.0 + np.abs(mu)) ** 3 * (1.0 + np.abs(A) + np.abs(B))
        step = np.where(ok, q / np.where(ok, dq, 1.0), 0.0)
        trial = mu - step
        qt = (((trial + A) * trial + B) * trial + C) * trial + D
        mu = np.where(np.abs(qt) <= np.abs(q), trial, mu)
    return mu


def roots_array(params, r):
    """Ordered roots lam (shape (N, 4)) and zone codes (shape (N,)) for an array of r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ValueError("frequency magnitudes must be finite and >= 0")
    N = r.size
    lam = np.zeros((N, 4), dtype=complex)
    zone = np.full(N, _DEGEN, dtype=np.int8)
    live = r > 0
    if params.delta == 0:
        dp = derive(params)
        rl = r[live]
        lam[live] = 1j * np.stack([dp.nu2 * rl, -dp.nu2 * rl, dp.nu1 * rl, -dp.nu1 * rl], axis=1)
        zone[live] = _IMAG
        return lam, zone
    if not np.any(live):
        return lam, zone

    rl = r[live]
    A, B, C, D = _scaled_coeffs(params, rl)
    comp = np.zeros((rl.size, 4, 4))
    comp[:, 0, 0] = -A
    comp[:, 0, 1] = -B
    comp[:, 0, 2] = -C
    comp[:, 0, 3] = -D
    comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
    mu = np.linalg.eigvals(comp).astype(complex)
    mu = _polish(mu, A[:, None], B[:, None], C[:, None], D[:, None])

    im = mu.imag
    is_real = np.abs(im) <= REAL_TOL * (1.0 + np.abs(mu))
    nreal = is_real.sum(axis=1)
    if np.any((nreal % 2) == 1):
        bad = rl[(nreal % 2) == 1][0]
        raise RootError(f"root conjugacy pattern is inconsistent at r={bad!r}")

    out = np.empty_like(mu)
    codes = np.empty(rl.size, dtype=np.int8)

    sel = nreal == 0
    if np.any(sel):
        m = mu[sel]
        order = np.argsort(-m.imag, axis=1)
        big = np.take_along_axis(m, order[:, :1], axis=1)[:, 0]
        small = np.take_along_axis(m, order[:, 1:2], axis=1)[:, 0]
        out[sel] = np.stack([small, small.conj(), big, big.conj()], axis=1)
        codes[sel] = _PAIRS

    sel = nreal == 2
    if np.any(sel):
        m = mu[sel]
        rmask = is_real[sel]
        key = np.where(rmask, m.real, np.inf)
        order = np.argsort(key, axis=1)
        lo = np.take_along_axis(m, order[:, :1], axis=1)[:, 0].real
        hi = np.take_along_axis(m, order[:, 1:2], axis=1)[:, 0].real
        top = np.take_along_axis(m, np.argmax(np.where(rmask, -np.inf, m.imag), axis=1)[:, None],
                                 axis=1)[:, 0]
        out[sel] = np.stack([lo + 0j, hi + 0j, top, top.conj()], axis=1)
        codes[sel] = _ONE_PAIR

    sel = nreal == 4
    if np.any(sel):
        out[sel] = np.sort(mu[sel].real, axis=1) + 0j
        codes[sel] = _FOUR_REAL

    lam[live] = out * rl[:, None]
    zone[live] = codes
    return lam, zone


def solve_quartic(params, dp, r):
    """RootSet at a single frequency magnitude r >= 0 (r = 0 gives the degenerate zero root)."""
    lam, zone = roots_array(params, [float(r)])
    lam = lam[0]
    if r > 0:
        for x in lam:
            res = abs(quartic_value(params, r, x))
            if not res <= RESIDUAL_TOL * residual_scale(params, r, x):
                raise RootError(f"root {x} at r={r} has residual {res:.3e} after refinement")
    return RootSet(tuple(complex(x) for x in lam), ZONE_BY_CODE[zone[0]], float(r))


def _monic_discriminant(b, c, d, e):
    return (256 * e ** 3 - 192 * b * d * e ** 2 - 128 * c ** 2 * e ** 2 + 144 * c * d ** 2 * e
            - 27 * d ** 4 + 144 * b ** 2 * c * e ** 2 - 6 * b ** 2 * d ** 2 * e
            - 80 * b * c ** 2 * d * e + 18 * b * c * d ** 3 + 16 * c ** 4 * e
            - 4 * c ** 3 * d ** 2 - 27 * b ** 4 * e ** 2 + 18 * b ** 3 * c * d * e
            - 4 * b ** 3 * d ** 3 - 4 * b ** 2 * c ** 3 * e + b ** 2 * c ** 2 * d ** 2)


def discriminant(params, r):
    """Exact quartic discriminant and the auxiliary factor 8ac - 3b^2.

    Evaluated for the rescaled polynomial and multiplied back by r^12, which keeps
    the O(r^12) value free of cancellation at small r.
    """
    r = float(r)
    if r <= 0:
        raise ValueError("discriminant needs r > 0")
    A, B, C, D = (float(x) for x in _scaled_coeffs(params, np.float64(r)))
    disc = _monic_discriminant(A, B, C, D) * r ** 12
    b2 = params.b ** 2
    aux = 8.0 * (b2 + params.kappa + params.gamma ** 2) * r * r - 3.0 * params.delta ** 2 * r ** 4
    return disc, aux


def asymptotic_roots(dp, r, zone, config=ZoneConfig()):
    """Leading-order root approximations in the small or large frequency zone."""
    r = float(r)
    if zone == "small":
        if not 0 <= r <= config.eps0:
            raise ValueError(f"small-zone expansion needs r <= eps0={config.eps0}, got {r}")
        p1 = complex(-dp.c2 * r * r, dp.nu2 * r)
        p2 = complex(-dp.c1 * r * r, dp.nu1 * r)
        tag = Zone.TWO_IMAGINARY_PAIRS if dp.delta == 0 else Zone.TWO_CONJUGATE_PAIRS
        return RootSet((p1, p1.conjugate(), p2, p2.conjugate()), tag, r)
    if zone == "large":
        if dp.delta == 0:
            raise ValueError("large-zone expansion needs delta > 0")
        if r < config.N0:
            raise ValueError(f"large-zone expansion needs r >= N0={config.N0}, got {r}")
        p = complex(-dp.gamma ** 2 / (2.0 * dp.delta), dp.b * r)
        return RootSet((complex(-dp.delta * r * r), complex(-dp.kappa / dp.delta), p, p.conjugate()),
                       Zone.TWO_REAL_ONE_PAIR, r)
    raise ValueError(f"zone must be 'small' or 'large', got {zone!r}")
