"""Physical constants of the thermoelastic system and the closed-form derived constants.

The system couples an elastic displacement u to a temperature difference theta:

    u_tt - b^2 Lap u + gamma grad theta = 0
    theta_tt - kappa Lap theta - delta Lap theta_t + gamma div u_tt = 0

delta = 0 is the undamped (type II) model, delta > 0 the damped (type III) one.
"""
import math
import numbers
from dataclasses import dataclass


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    b: float
    kappa: float
    gamma: float
    delta: float = 0.0

    def __post_init__(self):
        for name in ("b", "kappa", "gamma", "delta"):
            value = getattr(self, name)
            if isinstance(value, numbers.Real) and not isinstance(value, bool):
                object.__setattr__(self, name, float(value))
                value = float(value)
            if isinstance(value, bool) or not isinstance(value, numbers.Real) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite number, got {value!r}")
        if self.b <= 0:
            raise ParameterError(f"wave speed b must be > 0, got {self.b}")
        if self.kappa <= 0:
            raise ParameterError(f"thermal parameter kappa must be > 0, got {self.kappa}")
        if self.gamma == 0:
            raise ParameterError("coupling gamma must be nonzero")
        if self.delta < 0:
            raise ParameterError(f"dissipation delta must be >= 0, got {self.delta}")

    @property
    def damped(self):
        """True for the type III model (delta > 0)."""
        return self.delta > 0

    def with_delta(self, delta):
        return ModelParams(self.b, self.kappa, self.gamma, delta)

    def as_dict(self):
        return {"b": self.b, "kappa": self.kappa, "gamma": self.gamma, "delta": self.delta}


@dataclass(frozen=True)
class DerivedParams:
    alpha0: float
    alpha1: float
    alpha2: float
    nu1: float
    nu2: float
    c1: float
    c2: float
    b: float
    kappa: float
    gamma: float
    delta: float
    # alpha0 == 0 makes both diffusion coefficients equal; some of the rate
    # estimates assume they differ, so callers are told rather than refused.
    equal_diffusion: bool = False


def derive(params):
    """Closed-form constants for a parameter set.

    alpha2 is built from its sum-of-squares form and nu2 from nu1*nu2 = b*sqrt(kappa),
    which avoids the cancellation in sqrt(alpha1^2 - 4 b^2 kappa) and in alpha1 - alpha2.
    """
    if not isinstance(params, ModelParams):
        raise ParameterError("derive expects a ModelParams instance")
    b2, k, g2, d = params.b ** 2, params.kappa, params.gamma ** 2, params.delta
    alpha0 = b2 - k - g2
    alpha1 = b2 + k + g2
    alpha2 = math.sqrt((b2 - k) ** 2 + g2 * g2 + 2.0 * g2 * (b2 + k))
    nu1 = math.sqrt(0.5 * (alpha1 + alpha2))
    nu2 = params.b * math.sqrt(k) / nu1
    ratio = alpha0 / alpha2
    c1 = 0.25 * d * (1.0 - ratio)
    c2 = 0.25 * d * (1.0 + ratio)
    equal = abs(alpha0) <= 1e-14 * alpha1
    return DerivedParams(alpha0, alpha1, alpha2, nu1, nu2, c1, c2,
                         params.b, params.kappa, params.gamma, d, equal)


@dataclass(frozen=True)
class ThresholdFlags:
    n: int
    u_condition: bool
    theta_condition: bool
    # both sides of the two-sided theta condition at n=2 (None elsewhere)
    theta_forward: bool = None
    theta_reverse: bool = None
    u_lhs: float = None
    u_rhs: float = None


def threshold_flags(dp, n):
    """Whether the lower-bound hypotheses hold in dimension n.

    The displacement bound needs alpha1 < 3 alpha2 at n = 4; the temperature bound
    needs one of two strict inequalities at n = 2.  Other dimensions are unconditional.
    """
    if int(n) != n or n < 1:
        raise ParameterError(f"dimension must be a positive integer, got {n!r}")
    a0, a1, a2 = dp.alpha0, dp.alpha1, dp.alpha2
    u_ok = True
    u_lhs = u_rhs = None
    if n == 4:
        u_lhs, u_rhs = a1, 3.0 * a2
        u_ok = a1 < 3.0 * a2
    th_ok = True
    fwd = rev = None
    if n == 2:
        left = (a0 - a2) ** 2 * (a1 - a2)
        right = (a0 + a2) ** 2 * (a1 + a2)
        fwd = left > 2.0 * right
        rev = right > 2.0 * left
        th_ok = fwd or rev
    return ThresholdFlags(n, u_ok, th_ok, fwd, rev, u_lhs, u_rhs)


UNIT = ModelParams(1.0, 1.0, 1.0, 1.0)
