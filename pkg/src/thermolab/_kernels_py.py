"""Numpy implementations of the hot kernel loops.

The compiled module _ckernels provides the same two entry points
(kernel_values, panel_sum); this file is the fallback and the reference.
"""
import math

import numpy as np

SERIES_X = 1e-3
CHUNK_PANELS = 1 << 15


def sinc(x):
    """sin(x)/x with a short Taylor series below SERIES_X."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SERIES_X
    xs = np.where(small, 1.0, x)
    x2 = x * x
    series = 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    return np.where(small, series, np.sin(xs) / xs)


def sinc_difference(x1, x2, threshold=SERIES_X):
    """sin(x1)/x1 - sin(x2)/x2 without cancellation for small arguments."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    small = np.maximum(np.abs(x1), np.abs(x2)) < threshold
    a, b = x1 * x1, x2 * x2
    # a^k - b^k all carry the factor (a - b), so the series has no cancellation
    dk1 = a - b
    dk2 = dk1 * (a + b)
    dk3 = dk1 * (a * a + a * b + b * b)
    dk4 = dk2 * (a * a + b * b)
    series = -dk1 / 6.0 + dk2 / 120.0 - dk3 / 5040.0 + dk4 / 362880.0
    return np.where(small, series, sinc(x1) - sinc(x2))


def cos_difference(x1, x2):
    """cos(x1) - cos(x2) via the product formula."""
    return -2.0 * np.sin(0.5 * (x1 + x2)) * np.sin(0.5 * (x1 - x2))


def kernel_values(r, t, l1, l2, b1, b2, c1, c2, sigma=0.0, mode="auto"):
    """l1 sin(b1 r t) e^{-c1 r^2 t}/(b1 r) - l2 sin(b2 r t) e^{-c2 r^2 t}/(b2 r), times r^-sigma.

    mode "auto" uses the compensated form whenever l1 == l2, "series" forces the
    Taylor branch of that form, "direct" subtracts the two waves naively.
    r = 0 returns the limit: 0 when l1 == l2 and sigma < 2, t (l1 - l2) for sigma = 0,
    and a signed infinity for a non-cancelling singular kernel.
    """
    r = np.asarray(r, dtype=float)
    x1, x2 = b1 * r * t, b2 * r * t
    rrt = r * r * t
    if l1 == l2 and mode != "direct":
        e2 = np.exp(-c2 * rrt)
        thr = np.inf if mode == "series" else SERIES_X
        core = l1 * t * e2 * (sinc(x1) * np.expm1(-(c1 - c2) * rrt) + sinc_difference(x1, x2, thr))
    else:
        core = t * (l1 * sinc(x1) * np.exp(-c1 * rrt) - l2 * sinc(x2) * np.exp(-c2 * rrt))
    if sigma == 0:
        return core
    zero = r == 0
    rs = np.where(zero, 1.0, r)
    out = core * rs ** (-sigma)
    if np.any(zero):
        if l1 == l2:
            at_zero = 0.0 if sigma < 2 else np.nan
        else:
            at_zero = math.copysign(math.inf, (l1 - l2) * t) if t > 0 else 0.0
        out = np.where(zero, at_zero, out)
    return out


def panel_sum(lo, width, npan, t, l1, l2, b1, b2, c1, c2, power, nodes, weights):
    """Composite Gauss sum of kernel^2 * r^power over npan equal panels starting at lo.

    Panels are processed in ascending order in fixed-size chunks whose totals are
    combined with math.fsum, so repeated runs give identical bits.
    """
    half = 0.5 * width
    offs = half * (np.asarray(nodes) + 1.0)
    w = np.asarray(weights)
    parts = []
    for start in range(0, int(npan), CHUNK_PANELS):
        stop = min(int(npan), start + CHUNK_PANELS)
        left = lo + width * np.arange(start, stop, dtype=float)
        r = left[:, None] + offs[None, :]
        k = kernel_values(r, t, l1, l2, b1, b2, c1, c2, 0.0)
        f = k * k
        if power != 0:
            f = f * r ** power
        parts.append(float(np.sum(f @ w)))
    return math.fsum(parts) * half
