# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of kernel_values (auto mode) and panel_sum."""
import math

import numpy as np

from libc.math cimport sin, exp, expm1, fabs, pow, INFINITY, NAN

cdef double SERIES_X = 1e-3


cdef inline double _sinc(double x) noexcept nogil:
    cdef double x2
    if fabs(x) < SERIES_X:
        x2 = x * x
        return 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    return sin(x) / x


cdef inline double _sinc_difference(double x1, double x2) noexcept nogil:
    cdef double a, b, dk1, dk2, dk3, dk4
    if fabs(x1) < SERIES_X and fabs(x2) < SERIES_X:
        a = x1 * x1
        b = x2 * x2
        dk1 = a - b
        dk2 = dk1 * (a + b)
        dk3 = dk1 * (a * a + a * b + b * b)
        dk4 = dk2 * (a * a + b * b)
        return -dk1 / 6.0 + dk2 / 120.0 - dk3 / 5040.0 + dk4 / 362880.0
    return _sinc(x1) - _sinc(x2)


cdef inline double _core(double r, double t, double l1, double l2, double b1, double b2,
                         double c1, double c2, bint equal) noexcept nogil:
    cdef double x1 = b1 * r * t
    cdef double x2 = b2 * r * t
    cdef double rrt = r * r * t
    cdef double e2
    if equal:
        e2 = exp(-c2 * rrt)
        return l1 * t * e2 * (_sinc(x1) * expm1(-(c1 - c2) * rrt) + _sinc_difference(x1, x2))
    return t * (l1 * _sinc(x1) * exp(-c1 * rrt) - l2 * _sinc(x2) * exp(-c2 * rrt))


def kernel_values(r, double t, double l1, double l2, double b1, double b2, double c1,
                  double c2, double sigma=0.0, mode="auto"):
    if mode != "auto":
        raise ValueError("the compiled backend only implements mode='auto'")
    arr = np.asarray(r, dtype=float)
    flat = np.ascontiguousarray(arr.ravel())
    out = np.empty_like(flat)
    cdef double[::1] rv = flat
    cdef double[::1] ov = out
    cdef Py_ssize_t i, m = flat.shape[0]
    cdef bint equal = l1 == l2
    cdef double v, at_zero
    if equal:
        at_zero = 0.0 if sigma < 2 else NAN
    elif t > 0:
        at_zero = INFINITY if (l1 - l2) > 0 else -INFINITY
    else:
        at_zero = 0.0
    with nogil:
        for i in range(m):
            v = _core(rv[i], t, l1, l2, b1, b2, c1, c2, equal)
            if sigma != 0:
                if rv[i] == 0:
                    v = at_zero
                else:
                    v = v * pow(rv[i], -sigma)
            ov[i] = v
    return out.reshape(arr.shape)


def panel_sum(double lo, double width, long npan, double t, double l1, double l2, double b1,
              double b2, double c1, double c2, double power, nodes, weights):
    """Gauss sum of kernel^2 * r^power over npan panels, Neumaier-compensated in panel order."""
    node_arr = np.ascontiguousarray(nodes, dtype=float)
    weight_arr = np.ascontiguousarray(weights, dtype=float)
    cdef double[::1] xs = node_arr
    cdef double[::1] ws = weight_arr
    cdef Py_ssize_t q = xs.shape[0]
    cdef double half = 0.5 * width
    cdef bint equal = l1 == l2
    cdef long k
    cdef Py_ssize_t j
    cdef double left, r, f, panel, total = 0.0, comp = 0.0, tmp
    with nogil:
        for k in range(npan):
            left = lo + width * <double>k
            panel = 0.0
            for j in range(q):
                r = left + half * (xs[j] + 1.0)
                f = _core(r, t, l1, l2, b1, b2, c1, c2, equal)
                f = f * f
                if power != 0:
                    f = f * pow(r, power)
                panel += ws[j] * f
            tmp = total + panel
            if fabs(total) >= fabs(panel):
                comp += (total - tmp) + panel
            else:
                comp += (panel - tmp) + total
            total = tmp
    return (total + comp) * half
