"""Double (diffusion) waves kernels and the asymptotic profiles built from them.

Every kernel is handled as a radial factor plus an angular tag.  The vector
kernels G1 and G3 point along i xi/|xi|^2; their radial factor already includes
the 1/r from that direction vector, so multiplying by i*xi_dir rebuilds the symbol.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._kernels_py import cos_difference, kernel_values
from .params import ModelParams, derive


class Angular(str, enum.Enum):
    SCALAR = "scalar"
    VECTOR = "vector"


@dataclass(frozen=True)
class DoubleKernelSpec:
    """l1 sin(beta1 r t)/(beta1 r) e^{-c1 r^2 t} - l2 sin(beta2 r t)/(beta2 r) e^{-c2 r^2 t}, over r^sigma."""
    l1: float
    l2: float
    beta1: float
    beta2: float
    c1: float = 0.0
    c2: float = 0.0
    sigma: float = 0

    def __post_init__(self):
        for name in ("l1", "l2", "beta1", "beta2", "c1", "c2", "sigma"):
            v = getattr(self, name)
            if isinstance(v, bool) or not math.isfinite(float(v)):
                raise ValueError(f"{name} must be a finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.beta1 <= 0 or self.beta2 <= 0:
            raise ValueError("propagation speeds beta1, beta2 must be > 0")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("diffusion coefficients c1, c2 must be >= 0")
        if self.sigma < 0:
            raise ValueError("singularity order sigma must be >= 0")

    @property
    def cancels(self):
        """True when the two waves cancel at r = 0 (equal amplitudes)."""
        return self.l1 == self.l2

    def swapped(self):
        return DoubleKernelSpec(self.l2, self.l1, self.beta2, self.beta1, self.c2, self.c1, self.sigma)

    def args(self):
        return (self.l1, self.l2, self.beta1, self.beta2, self.c1, self.c2)


KERNEL_NAMES = ("G0", "G1", "G2", "G3", "G4", "M")


@dataclass(frozen=True)
class KernelId:
    name: str
    spec: DoubleKernelSpec = None

    def __post_init__(self):
        if self.name not in KERNEL_NAMES:
            raise ValueError(f"unknown kernel {self.name!r}; expected one of {KERNEL_NAMES}")
        if (self.name == "M") != (self.spec is not None):
            raise ValueError("a DoubleKernelSpec is required for M and only for M")

    @property
    def angular(self):
        return Angular.VECTOR if self.name in ("G1", "G3") else Angular.SCALAR


def kernel_spec(kid, dp):
    """DoubleKernelSpec realizing G1..G4 (or the spec carried by M).

    G1/G3 use sigma = 1 so that the returned value is the radial factor including
    the 1/r of the direction vector.  G3/G4 are the undamped (c = 0) versions.
    """
    if isinstance(kid, str):
        kid = KernelId(kid)
    if kid.name == "M":
        return kid.spec
    if kid.name == "G0":
        raise ValueError("G0 is a cosine kernel and has no DoubleKernelSpec")
    c1, c2 = (dp.c1, dp.c2) if kid.name in ("G1", "G2") else (0.0, 0.0)
    if kid.name in ("G1", "G3"):
        amp = dp.gamma / dp.alpha2
        return DoubleKernelSpec(amp, amp, dp.nu1, dp.nu2, c1, c2, 1)
    a0, a2 = dp.alpha0, dp.alpha2
    return DoubleKernelSpec(-(a0 - a2) / (2 * a2), -(a0 + a2) / (2 * a2), dp.nu1, dp.nu2, c1, c2, 0)


def double_kernel(spec, t, r, branch="auto"):
    """Evaluate the double kernel times r^-sigma on an array of r.

    branch="auto" uses the compensated split whenever l1 == l2 (via the compiled
    backend when present); "series" and "direct" force one branch for comparisons.
    """
    if t < 0:
        raise ValueError("time must be >= 0")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("frequency magnitudes must be >= 0")
    if branch == "auto":
        return _backend.kernel_values(r, float(t), *spec.args(), spec.sigma)
    if branch not in ("series", "direct"):
        raise ValueError(f"unknown branch {branch!r}")
    return kernel_values(r, float(t), *spec.args(), spec.sigma, mode=branch)


def cosine_kernel(dp, t, r):
    """G0 = (cos(nu1 r t) e^{-c1 r^2 t} - cos(nu2 r t) e^{-c2 r^2 t}) / r, zero at r = 0."""
    r = np.asarray(r, dtype=float)
    x1, x2 = dp.nu1 * r * t, dp.nu2 * r * t
    rrt = r * r * t
    e2 = np.exp(-dp.c2 * rrt)
    num = e2 * (np.cos(x1) * np.expm1(-(dp.c1 - dp.c2) * rrt) + cos_difference(x1, x2))
    return np.where(r > 0, num / np.where(r > 0, r, 1.0), 0.0)


def kernel_radial(kid, dp, t, r):
    """Radial factor of G0..G4 or M at time t over an array of r."""
    if isinstance(kid, str):
        kid = KernelId(kid)
    if t < 0:
        raise ValueError("time must be >= 0")
    if kid.name == "G0":
        return cosine_kernel(dp, float(t), r)
    return double_kernel(kernel_spec(kid, dp), t, r)


PROFILE_KERNELS = {"phi": "G1", "psi": "G2", "phi_tilde": "G3", "psi_tilde": "G4"}


def profile_amplitude(name, dp, mean_theta1, t, r):
    """Radial factor of a large-time profile: its kernel times the mean of theta_1."""
    try:
        kid = PROFILE_KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; expected one of {sorted(PROFILE_KERNELS)}") from None
    return kernel_radial(kid, dp, t, r) * mean_theta1


def undamped(dp):
    """Derived constants of the same parameter set with delta = 0."""
    return derive(ModelParams(dp.b, dp.kappa, dp.gamma, 0.0))
